//! Property battery run by the `check` command: surplus gradient identity,
//! cyclic monotonicity of logit probabilities, convexity and homogeneity of
//! the objective, and the optimizer against an exhaustive grid.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::choice::{
    cyclic_monotonicity_residual, logit_unchecked, numeric_gradient, random_cycle, social_surplus_gumbel, DEFAULT_GRADIENT_STEP,
};
use crate::error::Result;
use crate::moments::{q_n, PairTerms, TermSet};
use crate::optimizer::{estimate_beta, grid_oracle, Normalization, OptimizerOptions};
use crate::util::{derive_seed, normalized};

pub const GRADIENT_TOL: f64 = 1e-6;
pub const CYCLE_TOL: f64 = 1e-12;
pub const CONVEXITY_SLACK: f64 = 1e-10;
pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const ORACLE_SLACK: f64 = 1e-2;

/// Deliberate defects used to confirm that the battery can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Use `[x]_+` in place of `[x]_-` in the objective.
    HingeSignFlip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    /// Fewer draws and no solver comparison.
    pub quick: bool,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { quick: false, seed: 2024, fault: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<24} {} ({:.2}s)", self.name, self.detail, self.seconds)
    }
}

struct Objective {
    fault: Option<Fault>,
}

impl Objective {
    fn terms(&self, terms: &TermSet) -> TermSet {
        match self.fault {
            Some(Fault::HingeSignFlip) => terms.scaled(-1.0),
            None => terms.clone(),
        }
    }

    fn value(&self, b: &[f64], terms: &TermSet) -> Result<f64> {
        q_n(b, &self.terms(terms))
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Worst `|grad G(u) - logit(u)|_inf` over `draws` random `u` in `[-5, 5]^K`,
/// cycling `K` through 1, 2, 3.
pub fn gradient_identity(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for d in 0..draws {
        let k = 1 + d % 3;
        let u: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let grad = numeric_gradient(|v| social_surplus_gumbel(v).expect("finite"), &u, DEFAULT_GRADIENT_STEP)?;
        let p = logit_unchecked(&u);
        for (a, b) in grad.iter().zip(&p) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Smallest cyclic-monotonicity residual of the logit map over random cycles
/// of length 2 to 5.
pub fn cyclic_monotonicity(cycles: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for c in 0..cycles {
        let len = 2 + c % 4;
        let dim = 1 + (c / 4) % 3;
        let cycle = random_cycle(&mut rng, len, dim, -5.0, 5.0);
        worst = worst.min(cyclic_monotonicity_residual(logit_unchecked, &cycle)?);
    }
    Ok(worst)
}

/// Random term set with `pairs` pairs of `per_pair` Gaussian terms, tilted
/// toward a random direction so the minimum is informative.
pub fn random_terms(dx: usize, pairs: usize, per_pair: usize, seed: u64) -> TermSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = normalized(&(0..dx).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>());
    let tilt = rng.random_range(0.0..1.5);
    let out = (0..pairs)
        .map(|p| {
            let mut terms = PairTerms::new((p, p + 1));
            for i in 0..per_pair {
                let g: Vec<f64> = dir
                    .iter()
                    .map(|d| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        tilt * d + e
                    })
                    .collect();
                terms.push(i, &g);
            }
            terms
        })
        .collect();
    TermSet::new(dx, out).expect("well-formed terms")
}

fn random_point(rng: &mut ChaCha8Rng, dx: usize) -> Vec<f64> {
    (0..dx).map(|_| rng.random_range(-2.0..=2.0)).collect()
}

/// Convexity and degree-one homogeneity of the objective over random
/// triples, plus a zero at a direction every term agrees with. Returns the
/// verdict and a summary line.
pub fn objective_shape(triples: usize, seed: u64, fault: Option<Fault>) -> Result<(bool, String)> {
    let obj = &Objective { fault };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_convex = f64::NEG_INFINITY;
    let mut worst_homog = 0.0_f64;
    for r in 0..triples {
        let dx = 2 + r % 3;
        let terms = random_terms(dx, 1 + r % 3, 30, derive_seed(seed, r as u64));
        let a = random_point(&mut rng, dx);
        let b = random_point(&mut rng, dx);
        let lam: f64 = rng.random();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        let gap = obj.value(&mid, &terms)? - lam * obj.value(&a, &terms)? - (1.0 - lam) * obj.value(&b, &terms)?;
        worst_convex = worst_convex.max(gap);
        let base = obj.value(&a, &terms)?;
        for scale in [0.5, 2.0] {
            let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
            worst_homog = worst_homog.max((obj.value(&scaled, &terms)? - scale * base).abs());
        }
    }
    // terms all on one side of a known direction: zero there, positive opposite
    let mut anchored_ok = true;
    for r in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ 0xa5a5, r));
        let dx = 3;
        let b0 = normalized(&random_point(&mut rng, dx));
        let mut pair = PairTerms::new((0, 1));
        for i in 0..40 {
            let mut g = random_point(&mut rng, dx);
            let along: f64 = g.iter().zip(&b0).map(|(x, y)| x * y).sum();
            if along < 0.0 {
                g.iter_mut().for_each(|v| *v = -*v);
            }
            pair.push(i, &g);
        }
        let terms = TermSet::new(dx, vec![pair])?;
        let neg: Vec<f64> = b0.iter().map(|v| -v).collect();
        anchored_ok &= obj.value(&b0, &terms)? == 0.0 && obj.value(&neg, &terms)? > 0.0;
    }
    let passed = worst_convex <= CONVEXITY_SLACK && worst_homog <= HOMOGENEITY_TOL && anchored_ok;
    Ok((
        passed,
        format!(
            "convexity gap {worst_convex:.3e}, homogeneity error {worst_homog:.3e}, anchored direction {}",
            if anchored_ok { "ok" } else { "violated" }
        ),
    ))
}

/// Largest excess of the estimator's objective over the grid oracle's, both
/// measured by the true objective on the max-norm sphere.
pub fn solver_vs_oracle(cases: usize, seed: u64, fault: Option<Fault>) -> Result<(bool, String)> {
    let obj = &Objective { fault };
    let mut worst = f64::NEG_INFINITY;
    for c in 0..cases {
        let dx = 2 + c % 2;
        let terms = random_terms(dx, 1 + c % 2, 60, derive_seed(seed, 1000 + c as u64));
        let est = estimate_beta(&obj.terms(&terms), &OptimizerOptions { seed: c as u64, ..Default::default() })?;
        let solver = q_n(&est.beta_tilde, &terms)?;
        let resolution = if dx == 2 { 3600 } else { 360 };
        let (_, oracle) = grid_oracle(&terms, resolution, Normalization::MaxNorm)?;
        worst = worst.max(solver - oracle);
    }
    Ok((worst <= ORACLE_SLACK, format!("max(solver - oracle) = {worst:.3e} over {cases} term sets")))
}

/// Runs every check; the quick mode shrinks draw counts and solver cases.
pub fn run_battery(opts: &CheckOptions) -> Vec<CheckOutcome> {
    let (draws, cycles, triples, cases) = if opts.quick { (30, 200, 50, 4) } else { (100, 1000, 200, 20) };
    let seed = opts.seed;
    vec![
        timed("gradient identity", || {
            let worst = gradient_identity(draws, derive_seed(seed, 1))?;
            Ok((worst < GRADIENT_TOL, format!("max error {worst:.3e} over {draws} points")))
        }),
        timed("cyclic monotonicity", || {
            let worst = cyclic_monotonicity(cycles, derive_seed(seed, 2))?;
            Ok((worst >= -CYCLE_TOL, format!("min residual {worst:.3e} over {cycles} cycles")))
        }),
        timed("objective shape", || objective_shape(triples, derive_seed(seed, 3), opts.fault)),
        timed("solver vs grid oracle", || solver_vs_oracle(cases, derive_seed(seed, 4), opts.fault)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_battery_passes() {
        let out = run_battery(&CheckOptions { quick: true, ..Default::default() });
        for o in &out {
            assert!(o.passed, "{o}");
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        let out = run_battery(&CheckOptions { quick: true, fault: Some(Fault::HingeSignFlip), ..Default::default() });
        assert!(out.iter().any(|o| !o.passed));
        assert!(out.iter().find(|o| o.name == "objective shape").is_some_and(|o| !o.passed));
    }
}
