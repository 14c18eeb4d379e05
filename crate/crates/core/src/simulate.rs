//! Data-generating processes and the Monte Carlo harness.
//!
//! Every individual (or market, or replication) draws from its own RNG
//! stream, seeded by `derive_seed(master, index)`, so results do not depend
//! on thread count and any unit can be regenerated in isolation.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};
use rayon::prelude::*;

use crate::aggregate::AggregateDataset;
use crate::choice::logit_unchecked;
use crate::error::{Error, Result};
use crate::identset::DiscreteDgp;
use crate::panel::PanelDataset;
use crate::pipeline::{estimate_panel, EstimatorOptions};
use crate::util::{derive_seed, dot, normalized};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("matrix must be square"));
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 {
                return Err(Error::invalid("matrix must be symmetric"));
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return Err(Error::invalid("matrix must be positive definite"));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Time-varying discrete control: `Z_it = 1{x^1_{1,it} + noise * v_it > threshold}`
/// with `v_it ~ U[0, 1]`, shifting option 1's utility by `shift * Z_it`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlDesign {
    pub threshold: f64,
    pub noise: f64,
    pub shift: f64,
}

impl Default for ControlDesign {
    fn default() -> Self {
        Self { threshold: 0.75, noise: 0.5, shift: -2.0 }
    }
}

/// Two-period trinary panel with three uniform covariates per option,
/// correlated normal shocks scaled by the fixed effect, and fixed effects
/// `A^k = (w^k + sum_j X^k_{j,i1}) / 4`, `w^k ~ U[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct McDgpConfig {
    pub n: usize,
    pub beta: Vec<f64>,
    /// Correlation of `(u^0, u^1, u^2)`.
    pub corr: Vec<Vec<f64>>,
    /// When false, `A = 0` in utilities.
    pub fixed_effects: bool,
    /// When false, `eps^k = u^k - u^0` instead of `A^k (u^k - u^0)`.
    pub heteroskedastic: bool,
    pub control: Option<ControlDesign>,
    pub seed: u64,
}

impl McDgpConfig {
    pub const PERIODS: usize = 2;
    pub const OPTIONS: usize = 2;
    pub const DX: usize = 3;

    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            beta: vec![1.0, 0.5, 0.0],
            corr: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.5], vec![0.0, 0.5, 1.0]],
            fixed_effects: true,
            heteroskedastic: true,
            control: None,
            seed,
        }
    }

    pub fn with_control(mut self, control: ControlDesign) -> Self {
        self.control = Some(control);
        self
    }

    pub fn true_direction(&self) -> Vec<f64> {
        normalized(&self.beta)
    }
}

/// Latent draws kept alongside a simulated panel, flattened `[i][t][k]`
/// for shocks and `[i][k]` for effects.
#[derive(Clone, Debug, Default)]
pub struct Latents {
    pub effects: Vec<f64>,
    pub shocks: Vec<f64>,
}

struct Unit {
    x: Vec<f64>,
    y: Vec<usize>,
    z: Vec<i64>,
    a: Vec<f64>,
    eps: Vec<f64>,
}

fn simulate_unit(cfg: &McDgpConfig, chol: &[Vec<f64>], seed: u64) -> Unit {
    let (periods, options, dx) = (McDgpConfig::PERIODS, McDgpConfig::OPTIONS, McDgpConfig::DX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..periods * options * dx).map(|_| rng.random::<f64>()).collect();
    let a: Vec<f64> = (0..options)
        .map(|k| {
            let w: f64 = rng.random();
            let first: f64 = x[k * dx..(k + 1) * dx].iter().sum();
            (w + first) / 4.0
        })
        .collect();
    let mut y = Vec::with_capacity(periods);
    let mut z = Vec::with_capacity(periods);
    let mut eps = Vec::with_capacity(periods * options);
    for t in 0..periods {
        let xt = &x[t * options * dx..(t + 1) * options * dx];
        let e: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u: Vec<f64> = (0..3).map(|r| (0..=r).map(|c| chol[r][c] * e[c]).sum()).collect();
        let zt = match &cfg.control {
            Some(c) => {
                let v: f64 = rng.random();
                i64::from(xt[0] + c.noise * v > c.threshold)
            }
            None => 0,
        };
        let mut best = (0usize, 0.0_f64);
        for k in 0..options {
            let scale = if cfg.heteroskedastic { a[k] } else { 1.0 };
            let mut shock = scale * (u[k + 1] - u[0]);
            if k == 0 {
                if let Some(c) = &cfg.control {
                    shock += c.shift * zt as f64;
                }
            }
            eps.push(shock);
            let effect = if cfg.fixed_effects { a[k] } else { 0.0 };
            let util = dot(&cfg.beta, &xt[k * dx..(k + 1) * dx]) + effect + shock;
            if util > best.1 {
                best = (k + 1, util);
            }
        }
        y.push(best.0);
        z.push(zt);
    }
    Unit { x, y, z, a, eps }
}

/// Simulated panel together with its latent effects and shocks.
pub fn simulate_panel_detailed(cfg: &McDgpConfig) -> Result<(PanelDataset, Latents)> {
    if cfg.n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if cfg.beta.len() != McDgpConfig::DX {
        return Err(Error::DimensionMismatch { what: "beta", expected: McDgpConfig::DX, got: cfg.beta.len() });
    }
    let chol = cholesky(&cfg.corr)?;
    if chol.len() != 3 {
        return Err(Error::DimensionMismatch { what: "correlation matrix", expected: 3, got: chol.len() });
    }
    let units: Vec<Unit> = (0..cfg.n).into_par_iter().map(|i| simulate_unit(cfg, &chol, derive_seed(cfg.seed, i as u64))).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut lat = Latents::default();
    for u in units {
        x.extend(u.x);
        y.extend(u.y);
        z.extend(u.z);
        lat.effects.extend(u.a);
        lat.shocks.extend(u.eps);
    }
    let z = cfg.control.as_ref().map(|_| z);
    let d = PanelDataset::from_arrays(McDgpConfig::PERIODS, McDgpConfig::OPTIONS, McDgpConfig::DX, x, y, z)?;
    Ok((d, lat))
}

pub fn simulate_panel(cfg: &McDgpConfig) -> Result<PanelDataset> {
    Ok(simulate_panel_detailed(cfg)?.0)
}

/// Simulates `n_agents` individuals of a discrete design at fixed
/// covariates `xs` (one matrix per period) and returns the empirical
/// inside-option frequencies per period.
pub fn simulate_discrete_choices(dgp: &DiscreteDgp, xs: &[&[f64]], n_agents: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_agents == 0 {
        return Err(Error::invalid("n_agents must be positive"));
    }
    let k = dgp.options;
    for x in xs {
        if x.len() != k * dgp.dx {
            return Err(Error::DimensionMismatch { what: "covariate matrix", expected: k * dgp.dx, got: x.len() });
        }
    }
    let cum: Vec<f64> = dgp
        .mixture
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.prob;
            Some(*acc)
        })
        .collect();
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let chunk = 10_000;
    let chunks = n_agents.div_ceil(chunk);
    let counts: Vec<Vec<usize>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut counts = vec![0usize; xs.len() * k];
            let agents = chunk.min(n_agents - c * chunk);
            for _ in 0..agents {
                let r: f64 = rng.random();
                let comp = &dgp.mixture[cum.iter().position(|&p| r < p).unwrap_or(cum.len() - 1)];
                let mut a = comp.intercept.clone();
                for l in &comp.loadings {
                    a[l.option] += l.coef * xs[0][l.source_option * dgp.dx + l.source_coord];
                }
                for (m, x) in xs.iter().enumerate() {
                    let outside: f64 = gumbel.sample(&mut rng);
                    let mut best = (0usize, outside);
                    for opt in 0..k {
                        let u = dot(&dgp.beta, &x[opt * dgp.dx..(opt + 1) * dgp.dx]) + a[opt] + gumbel.sample(&mut rng);
                        if u > best.1 {
                            best = (opt + 1, u);
                        }
                    }
                    if best.0 > 0 {
                        counts[m * k + best.0 - 1] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut freq = vec![vec![0.0; k]; xs.len()];
    for c in &counts {
        for (idx, v) in c.iter().enumerate() {
            freq[idx / k][idx % k] += *v as f64;
        }
    }
    freq.iter_mut().flatten().for_each(|v| *v /= n_agents as f64);
    Ok(freq)
}

/// Market-level panel with logit shares: `S_ct = logit(beta' X_ct + A_c)`
/// with `X ~ U[0, 1]` and `A_c^k ~ N(0, 1)`. With `consumers = Some(m)` the
/// shares are empirical frequencies of `m` simulated consumers.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateDgpConfig {
    pub markets: usize,
    pub periods: usize,
    pub options: usize,
    pub beta: Vec<f64>,
    pub consumers: Option<usize>,
    pub seed: u64,
}

impl AggregateDgpConfig {
    pub fn new(markets: usize, seed: u64) -> Self {
        Self { markets, periods: 2, options: 2, beta: vec![1.0, 0.5, 0.0], consumers: None, seed }
    }
}

pub fn simulate_aggregate(cfg: &AggregateDgpConfig) -> Result<AggregateDataset> {
    if cfg.markets == 0 || cfg.periods < 2 || cfg.options == 0 || cfg.beta.is_empty() {
        return Err(Error::invalid("need markets >= 1, periods >= 2, options >= 1 and a nonempty beta"));
    }
    if cfg.consumers == Some(0) {
        return Err(Error::invalid("consumer count must be positive"));
    }
    let (t_n, k_n, dx) = (cfg.periods, cfg.options, cfg.beta.len());
    let markets: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.markets)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, c as u64));
            let a: Vec<f64> = (0..k_n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x: Vec<f64> = (0..t_n * k_n * dx).map(|_| rng.random::<f64>()).collect();
            let mut s = Vec::with_capacity(t_n * k_n);
            for t in 0..t_n {
                let index: Vec<f64> = (0..k_n).map(|k| dot(&cfg.beta, &x[(t * k_n + k) * dx..(t * k_n + k + 1) * dx]) + a[k]).collect();
                let p = logit_unchecked(&index);
                match cfg.consumers {
                    None => s.extend(p),
                    Some(m) => {
                        let mut counts = vec![0usize; k_n];
                        for _ in 0..m {
                            let r: f64 = rng.random();
                            let mut acc = 0.0;
                            for (k, pk) in p.iter().enumerate() {
                                acc += pk;
                                if r < acc {
                                    counts[k] += 1;
                                    break;
                                }
                            }
                        }
                        s.extend(counts.iter().map(|&c| c as f64 / m as f64));
                    }
                }
            }
            (x, s)
        })
        .collect();
    let mut x = Vec::with_capacity(cfg.markets * t_n * k_n * dx);
    let mut s = Vec::with_capacity(cfg.markets * t_n * k_n);
    for (mx, ms) in markets {
        x.extend(mx);
        s.extend(ms);
    }
    let counts = cfg.consumers.map(|m| vec![m as u64; cfg.markets * t_n]);
    AggregateDataset::from_arrays(t_n, k_n, dx, x, s, counts)
}

/// Bias, standard deviation and root mean squared error of each coordinate
/// of the normalized estimate across replications.
#[derive(Clone, Debug, PartialEq)]
pub struct McTable {
    pub n: usize,
    pub repetitions: usize,
    pub failed: usize,
    pub seed: u64,
    pub truth: Vec<f64>,
    pub bias: Vec<f64>,
    pub sd: Vec<f64>,
    pub rmse: Vec<f64>,
}

impl McTable {
    /// Aggregates per-replication estimates; SD uses divisor `R`, so
    /// `rmse^2 = bias^2 + sd^2`.
    pub fn from_estimates(n: usize, seed: u64, truth: &[f64], estimates: &[Vec<f64>], failed: usize) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::invalid("no successful replications"));
        }
        let r = estimates.len() as f64;
        let dx = truth.len();
        let mut bias = vec![0.0; dx];
        let mut sd = vec![0.0; dx];
        let mut rmse = vec![0.0; dx];
        for j in 0..dx {
            let mean = estimates.iter().map(|e| e[j]).sum::<f64>() / r;
            bias[j] = mean - truth[j];
            sd[j] = (estimates.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / r).sqrt();
            rmse[j] = (estimates.iter().map(|e| (e[j] - truth[j]).powi(2)).sum::<f64>() / r).sqrt();
        }
        Ok(Self { n, repetitions: estimates.len() + failed, failed, seed, truth: truth.to_vec(), bias, sd, rmse })
    }

    pub fn csv_header(dx: usize) -> String {
        let mut h = String::from("n,repetitions,failed");
        for j in 1..=dx {
            write!(h, ",bias_{j},sd_{j},rmse_{j}").unwrap();
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{},{}", self.n, self.repetitions, self.failed);
        for j in 0..self.bias.len() {
            write!(row, ",{:?},{:?},{:?}", self.bias[j], self.sd[j], self.rmse[j]).unwrap();
        }
        row
    }

    /// Aligned text rendering of several tables, one row per sample size.
    pub fn render_text(tables: &[McTable]) -> String {
        let dx = tables.first().map_or(0, |t| t.bias.len());
        let mut out = String::new();
        write!(out, "{:>6} |", "n").unwrap();
        for j in 1..=dx {
            write!(out, " {:^26} |", format!("beta_{j}")).unwrap();
        }
        out.push('\n');
        write!(out, "{:>6} |", "").unwrap();
        for _ in 0..dx {
            write!(out, " {:>8} {:>8} {:>8} |", "BIAS", "SD", "rMSE").unwrap();
        }
        out.push('\n');
        for t in tables {
            write!(out, "{:>6} |", t.n).unwrap();
            for j in 0..dx {
                write!(out, " {:>8.4} {:>8.4} {:>8.4} |", t.bias[j], t.sd[j], t.rmse[j]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Replication `r` uses `derive_seed(cfg.seed, r)` for its data and the
/// optimizer seed from `opts`. Replications whose terms are identically zero
/// are counted as failed and excluded.
pub fn run_monte_carlo(cfg: &McDgpConfig, n_reps: usize, opts: &EstimatorOptions) -> Result<McTable> {
    if n_reps < 2 {
        return Err(Error::invalid("need at least two replications"));
    }
    let outcomes: Vec<Option<Vec<f64>>> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rep = cfg.clone();
            rep.seed = derive_seed(cfg.seed, r as u64);
            let d = simulate_panel(&rep).ok()?;
            let est = estimate_panel(&d, opts).ok()?;
            est.result.identified().then_some(est.result.beta_hat)
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    let estimates: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
    McTable::from_estimates(cfg.n, cfg.seed, &cfg.true_direction(), &estimates, failed)
}
