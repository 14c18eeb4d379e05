//! Population identified sets under discrete-support designs.
//!
//! With finite covariate support and a finite fixed-effect mixture, the
//! pairwise conditional choice probabilities can be computed exactly. Each
//! covariate tuple then yields an inequality `b' g >= 0`; the identified set
//! is the intersection of these half-spaces. Sampling tuples gives an outer
//! approximation that tightens as more tuples are added.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::choice::logit_unchecked;
use crate::error::{Error, Result};
use crate::util::{derive_seed, dot};

/// Membership tolerance on `b' g`.
pub const MEMBER_TOL: f64 = 1e-10;

/// `A^option += coef * x_1[source_option, source_coord]`, where `x_1` is the
/// covariate matrix of the first period of the cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct Loading {
    pub option: usize,
    pub source_option: usize,
    pub source_coord: usize,
    pub coef: f64,
}

/// One point of the fixed-effect mixture: `A = intercept + loadings(x_1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectComponent {
    pub prob: f64,
    pub intercept: Vec<f64>,
    pub loadings: Vec<Loading>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorLaw {
    /// Differences of i.i.d. type-I extreme value shocks: logit choice
    /// probabilities given `(x, A)`.
    Gumbel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDgp {
    pub options: usize,
    pub dx: usize,
    /// Support of each covariate entry, option-major (`k * dx + j`).
    pub support: Vec<Vec<f64>>,
    pub mixture: Vec<EffectComponent>,
    pub errors: ErrorLaw,
    pub beta: Vec<f64>,
}

impl DiscreteDgp {
    pub fn new(options: usize, dx: usize, support: Vec<Vec<f64>>, mixture: Vec<EffectComponent>, beta: Vec<f64>) -> Result<Self> {
        if support.len() != options * dx {
            return Err(Error::DimensionMismatch { what: "support list", expected: options * dx, got: support.len() });
        }
        if support.iter().any(|s| s.is_empty() || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("every covariate needs a nonempty finite support"));
        }
        if beta.len() != dx {
            return Err(Error::DimensionMismatch { what: "beta", expected: dx, got: beta.len() });
        }
        let total: f64 = mixture.iter().map(|c| c.prob).sum();
        if mixture.is_empty() || (total - 1.0).abs() > 1e-12 || mixture.iter().any(|c| c.prob < 0.0) {
            return Err(Error::invalid("fixed-effect mixture probabilities must be nonnegative and sum to one"));
        }
        for c in &mixture {
            if c.intercept.len() != options {
                return Err(Error::DimensionMismatch { what: "effect intercept", expected: options, got: c.intercept.len() });
            }
            if c.loadings.iter().any(|l| l.option >= options || l.source_option >= options || l.source_coord >= dx) {
                return Err(Error::invalid("effect loading index out of range"));
            }
        }
        Ok(Self { options, dx, support, mixture, errors: ErrorLaw::Gumbel, beta })
    }

    /// Trinary choice, three covariates, every covariate supported on
    /// `{1, 1/2, ..., 1/s}`, `beta = (1, 1, 1)`, and fixed effects
    /// `A^1 = w1 x^1_{1,1}`, `A^2 = w2 x^1_{3,1}` with `w1 in {1, 2}` and
    /// `w2 in {0, -1}` independent and equally likely.
    pub fn support_points_design(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("support size must be positive"));
        }
        let points: Vec<f64> = (1..=s).map(|m| 1.0 / m as f64).collect();
        let mut mixture = Vec::new();
        for w1 in [1.0, 2.0] {
            for w2 in [0.0, -1.0] {
                mixture.push(EffectComponent {
                    prob: 0.25,
                    intercept: vec![0.0, 0.0],
                    loadings: vec![
                        Loading { option: 0, source_option: 0, source_coord: 0, coef: w1 },
                        Loading { option: 1, source_option: 0, source_coord: 2, coef: w2 },
                    ],
                });
            }
        }
        Self::new(2, 3, vec![points; 6], mixture, vec![1.0, 1.0, 1.0])
    }

    /// Binary choice with one finite-valued covariate (`{0, 1}`) and two
    /// bounded covariates on an 11-point grid in `[0, 1]`. With
    /// `beta = (1, 0.5, 0)` the ratio `beta_2 / beta_1` is below
    /// `-max(G_1 ∩ (-inf, 0)) / C = 1`, so no difference with a negative
    /// first coordinate can satisfy `beta' g > 0` and the cone of
    /// inequalities is not a half-space.
    pub fn bounded_finite_design() -> Result<Self> {
        let grid: Vec<f64> = (0..=10).map(|m| m as f64 / 10.0).collect();
        let mixture = vec![
            EffectComponent { prob: 0.5, intercept: vec![0.0], loadings: vec![] },
            EffectComponent {
                prob: 0.5,
                intercept: vec![-0.5],
                loadings: vec![Loading { option: 0, source_option: 0, source_coord: 1, coef: 1.0 }],
            },
        ];
        Self::new(1, 3, vec![vec![0.0, 1.0], grid.clone(), grid], mixture, vec![1.0, 0.5, 0.0])
    }

    fn check_support(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.options * self.dx {
            return Err(Error::DimensionMismatch { what: "covariate matrix", expected: self.options * self.dx, got: x.len() });
        }
        for (c, v) in x.iter().enumerate() {
            if !self.support[c].contains(v) {
                return Err(Error::invalid(format!("covariate entry {c} = {v} outside the declared support")));
            }
        }
        Ok(())
    }

    fn effects(&self, comp: &EffectComponent, x_first: &[f64]) -> Vec<f64> {
        let mut a = comp.intercept.clone();
        for l in &comp.loadings {
            a[l.option] += l.coef * x_first[l.source_option * self.dx + l.source_coord];
        }
        a
    }

    fn index(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        (0..self.options).map(|k| dot(&self.beta, &x[k * self.dx..(k + 1) * self.dx]) + a[k]).collect()
    }

    fn ccp_unchecked(&self, xs: &[&[f64]], m: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.options];
        for comp in &self.mixture {
            let a = self.effects(comp, xs[0]);
            let pm = match self.errors {
                ErrorLaw::Gumbel => logit_unchecked(&self.index(xs[m], &a)),
            };
            for (acc, v) in p.iter_mut().zip(pm) {
                *acc += comp.prob * v;
            }
        }
        p
    }

    /// `E[Y_m | X_1 = xs[0], ..., X_M = xs[M-1]]` (period `m` zero-based),
    /// averaging logit probabilities over the fixed-effect mixture. The
    /// effects depend on the first period's covariates only.
    pub fn true_ccp(&self, xs: &[&[f64]], m: usize) -> Result<Vec<f64>> {
        if m >= xs.len() {
            return Err(Error::invalid("period index out of range"));
        }
        for x in xs {
            self.check_support(x)?;
        }
        Ok(self.ccp_unchecked(xs, m))
    }

    /// Pairwise conditional choice probability for a two-period panel.
    pub fn true_pair_ccp(&self, x1: &[f64], x2: &[f64], period: usize) -> Result<Vec<f64>> {
        if period > 1 {
            return Err(Error::invalid("period must be 0 or 1"));
        }
        self.true_ccp(&[x1, x2], period)
    }

    /// `sum_m sum_k (x_m^k - x_{m+1}^k) p_m^k` for a cycle of covariate
    /// matrices.
    pub fn cycle_term(&self, xs: &[&[f64]]) -> Vec<f64> {
        let m_len = xs.len();
        let mut g = vec![0.0; self.dx];
        for m in 0..m_len {
            let p = self.ccp_unchecked(xs, m);
            let (cur, next) = (xs[m], xs[(m + 1) % m_len]);
            for (k, pk) in p.iter().enumerate() {
                for j in 0..self.dx {
                    g[j] += (cur[k * self.dx + j] - next[k * self.dx + j]) * pk;
                }
            }
        }
        g
    }

    pub fn draw_covariates<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.support.iter().map(|s| s[rng.random_range(0..s.len())]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GSample {
    pub dx: usize,
    pub gs: Vec<Vec<f64>>,
    pub cycle_length: usize,
    pub seed: u64,
}

impl GSample {
    pub fn len(&self) -> usize {
        self.gs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gs.is_empty()
    }

    /// Union of two samples.
    pub fn extend(&mut self, other: &GSample) {
        self.gs.extend(other.gs.iter().cloned());
    }
}

/// Draws `n_pairs` covariate cycles uniformly from the support product set
/// and returns their inequality vectors. Draw `r` uses its own sub-seed, so
/// a smaller budget is always a prefix of a larger one.
pub fn sample_g_set(dgp: &DiscreteDgp, n_pairs: usize, seed: u64, cycle_length: usize) -> Result<GSample> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be positive"));
    }
    if cycle_length < 2 {
        return Err(Error::invalid("cycle length must be at least 2"));
    }
    let gs = (0..n_pairs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let xs: Vec<Vec<f64>> = (0..cycle_length).map(|_| dgp.draw_covariates(&mut rng)).collect();
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            dgp.cycle_term(&refs)
        })
        .collect();
    Ok(GSample { dx: dgp.dx, gs, cycle_length, seed })
}

/// One free axis of the scan: coordinate `index` ranging over `steps`
/// cells of `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub index: usize,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.steps as f64
    }

    pub fn center(&self, cell: usize) -> f64 {
        self.min + (cell as f64 + 0.5) * self.width()
    }

    pub fn cell_of(&self, v: f64) -> Option<usize> {
        if v < self.min || v > self.max {
            return None;
        }
        Some((((v - self.min) / self.width()) as usize).min(self.steps - 1))
    }
}

/// Scan layout: coordinate `fixed.0` held at `fixed.1`, two free axes, all
/// other coordinates zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub dx: usize,
    pub fixed: (usize, f64),
    pub x_axis: Axis,
    pub y_axis: Axis,
}

impl GridSpec {
    /// `b_1 = 1` with `(b_2, b_3)` over `[min, max]^2`.
    pub fn square(min: f64, max: f64, steps: usize) -> Self {
        GridSpec { dx: 3, fixed: (0, 1.0), x_axis: Axis { index: 1, min, max, steps }, y_axis: Axis { index: 2, min, max, steps } }
    }

    fn validate(&self) -> Result<()> {
        let axes = [self.x_axis, self.y_axis];
        if axes.iter().any(|a| a.steps == 0 || a.min.is_nan() || a.max.is_nan() || a.max <= a.min) {
            return Err(Error::invalid("empty grid"));
        }
        let idx = [self.fixed.0, self.x_axis.index, self.y_axis.index];
        if idx.iter().any(|&i| i >= self.dx) || idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2] {
            return Err(Error::invalid("grid axes must be distinct coordinates below dx"));
        }
        Ok(())
    }

    pub fn point(&self, bx: f64, by: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.dx];
        b[self.fixed.0] = self.fixed.1;
        b[self.x_axis.index] = bx;
        b[self.y_axis.index] = by;
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdSetGrid {
    pub spec: GridSpec,
    /// Row-major: `member[iy * x_steps + ix]`.
    pub member: Vec<bool>,
    pub area: f64,
}

/// Whether `b` satisfies every inequality up to [`MEMBER_TOL`].
pub fn is_member(gs: &GSample, b: &[f64]) -> bool {
    gs.gs.iter().all(|g| dot(b, g) >= -MEMBER_TOL)
}

/// Evaluates membership at every cell center.
pub fn scan_identified_set(gs: &GSample, spec: &GridSpec) -> Result<IdSetGrid> {
    spec.validate()?;
    if gs.dx != spec.dx {
        return Err(Error::DimensionMismatch { what: "grid dimension", expected: gs.dx, got: spec.dx });
    }
    let (ax, ay) = (spec.x_axis, spec.y_axis);
    // Drop inequalities that hold on the whole box: b'g is affine in the two
    // free coordinates, so it suffices to check the corners.
    let binding: Vec<&Vec<f64>> = gs
        .gs
        .iter()
        .filter(|g| {
            [(ax.min, ay.min), (ax.min, ay.max), (ax.max, ay.min), (ax.max, ay.max)]
                .iter()
                .any(|&(x, y)| dot(&spec.point(x, y), g) < -MEMBER_TOL)
        })
        .collect();
    let member: Vec<bool> = (0..ax.steps * ay.steps)
        .into_par_iter()
        .map(|cell| {
            let b = spec.point(ax.center(cell % ax.steps), ay.center(cell / ax.steps));
            binding.iter().all(|g| dot(&b, g) >= -MEMBER_TOL)
        })
        .collect();
    let count = member.iter().filter(|m| **m).count();
    Ok(IdSetGrid { spec: spec.clone(), member, area: count as f64 * ax.width() * ay.width() })
}

impl IdSetGrid {
    pub fn count(&self) -> usize {
        self.member.iter().filter(|m| **m).count()
    }

    pub fn member_at(&self, ix: usize, iy: usize) -> bool {
        self.member[iy * self.spec.x_axis.steps + ix]
    }

    /// Membership of the cell containing `(bx, by)`; `false` outside the grid.
    pub fn contains_point(&self, bx: f64, by: f64) -> bool {
        match (self.spec.x_axis.cell_of(bx), self.spec.y_axis.cell_of(by)) {
            (Some(ix), Some(iy)) => self.member_at(ix, iy),
            _ => false,
        }
    }

    pub fn is_subset_of(&self, other: &IdSetGrid) -> bool {
        self.member.len() == other.member.len() && self.member.iter().zip(&other.member).all(|(a, b)| !a || *b)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let (ax, ay) = (self.spec.x_axis, self.spec.y_axis);
        writeln!(out, "beta_{},beta_{},member", ax.index + 1, ay.index + 1)?;
        for iy in 0..ay.steps {
            for ix in 0..ax.steps {
                writeln!(out, "{:?},{:?},{}", ax.center(ix), ay.center(iy), u8::from(self.member_at(ix, iy)))?;
            }
        }
        Ok(())
    }

    /// Plain (P1) portable bitmap, members black, top row at the largest
    /// value of the second axis.
    pub fn write_pbm<W: Write>(&self, out: &mut W) -> Result<()> {
        let (nx, ny) = (self.spec.x_axis.steps, self.spec.y_axis.steps);
        writeln!(out, "P1")?;
        writeln!(out, "{nx} {ny}")?;
        for iy in (0..ny).rev() {
            let row: Vec<&str> = (0..nx).map(|ix| if self.member_at(ix, iy) { "1" } else { "0" }).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn save_pbm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pbm(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Default cell tolerance for [`singleton_diagnostic`]: the 3x3 block of
/// cells within one grid step of a point.
pub const DEFAULT_SINGLETON_CELLS: usize = 9;

/// True when the member set is no larger than `tol_cells` cells.
pub fn singleton_diagnostic(grid: &IdSetGrid, tol_cells: Option<usize>) -> bool {
    grid.count() <= tol_cells.unwrap_or(DEFAULT_SINGLETON_CELLS)
}

#[derive(Clone, Debug)]
pub struct NestedScan {
    pub s: usize,
    pub budget: usize,
    pub sample: GSample,
    pub grid: IdSetGrid,
}

/// Scans the support-points design for each `s` in increasing order. The
/// inequality set for `s` is the union of the samples drawn for every
/// `s' <= s`; the supports are nested, so each union is still a subset of
/// the population set for `s`, and the member sets are nested by
/// construction.
pub fn scan_support_sequence(s_values: &[usize], budget: usize, seed: u64, spec: &GridSpec) -> Result<Vec<NestedScan>> {
    let mut sorted = s_values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut pooled: Option<GSample> = None;
    let mut out = Vec::new();
    for s in sorted {
        let dgp = DiscreteDgp::support_points_design(s)?;
        let fresh = sample_g_set(&dgp, budget, derive_seed(seed, s as u64), 2)?;
        let sample = match pooled.take() {
            Some(mut p) => {
                p.extend(&fresh);
                p
            }
            None => fresh,
        };
        let grid = scan_identified_set(&sample, spec)?;
        out.push(NestedScan { s, budget, sample: sample.clone(), grid });
        pooled = Some(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_mixture_gives_logit() {
        let mix = vec![EffectComponent { prob: 1.0, intercept: vec![0.0, 0.0], loadings: vec![] }];
        let support = vec![vec![0.5, 1.0]; 4];
        let dgp = DiscreteDgp::new(2, 2, support, mix, vec![1.0, -0.5]).unwrap();
        let x = [0.5, 1.0, 1.0, 0.5];
        let p1 = dgp.true_pair_ccp(&x, &x, 0).unwrap();
        let p2 = dgp.true_pair_ccp(&x, &x, 1).unwrap();
        let direct = logit_unchecked(&[0.5 - 0.5, 1.0 - 0.25]);
        assert_eq!(p1, direct);
        assert_eq!(p2, direct);
    }

    #[test]
    fn equal_periods_give_equal_ccps() {
        let dgp = DiscreteDgp::support_points_design(3).unwrap();
        let x = [1.0, 0.5, 1.0 / 3.0, 0.5, 0.5, 1.0];
        let p1 = dgp.true_pair_ccp(&x, &x, 0).unwrap();
        let p2 = dgp.true_pair_ccp(&x, &x, 1).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(dgp.cycle_term(&[&x, &x]), vec![0.0; 3]);
    }

    #[test]
    fn outside_support_is_rejected() {
        let dgp = DiscreteDgp::support_points_design(2).unwrap();
        let ok = [1.0, 0.5, 1.0, 0.5, 0.5, 1.0];
        let bad = [1.0, 0.25, 1.0, 0.5, 0.5, 1.0];
        assert!(dgp.true_pair_ccp(&ok, &bad, 0).is_err());
        assert!(dgp.true_pair_ccp(&ok, &ok, 2).is_err());
    }

    #[test]
    fn mixture_must_sum_to_one() {
        let mix = vec![EffectComponent { prob: 0.4, intercept: vec![0.0], loadings: vec![] }];
        assert!(DiscreteDgp::new(1, 1, vec![vec![1.0]], mix, vec![1.0]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_nested() {
        let dgp = DiscreteDgp::support_points_design(3).unwrap();
        let a = sample_g_set(&dgp, 1, 99, 2).unwrap();
        let b = sample_g_set(&dgp, 1, 99, 2).unwrap();
        assert_eq!(a, b);
        let big = sample_g_set(&dgp, 50, 99, 2).unwrap();
        assert_eq!(big.gs[0], a.gs[0]);
    }

    #[test]
    fn truth_satisfies_every_sampled_inequality() {
        for s in [2, 4] {
            let dgp = DiscreteDgp::support_points_design(s).unwrap();
            let gs = sample_g_set(&dgp, 10_000, 5, 2).unwrap();
            assert!(gs.gs.iter().all(|g| dot(&dgp.beta, g) >= -1e-10));
        }
        let dgp = DiscreteDgp::support_points_design(3).unwrap();
        let gs = sample_g_set(&dgp, 2_000, 5, 3).unwrap();
        assert!(gs.gs.iter().all(|g| dot(&dgp.beta, g) >= -1e-10));
    }

    #[test]
    fn single_support_point_gives_zero_terms() {
        let dgp = DiscreteDgp::support_points_design(1).unwrap();
        let gs = sample_g_set(&dgp, 20, 1, 2).unwrap();
        assert!(gs.gs.iter().all(|g| g.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn scan_trivial_cases() {
        let spec = GridSpec::square(0.5, 1.9, 20);
        let empty = GSample { dx: 3, gs: vec![], cycle_length: 2, seed: 0 };
        let grid = scan_identified_set(&empty, &spec).unwrap();
        assert_eq!(grid.count(), 400);
        assert!(!singleton_diagnostic(&grid, None));
        let e1 = GSample { dx: 3, gs: vec![vec![1.0, 0.0, 0.0]], cycle_length: 2, seed: 0 };
        assert_eq!(scan_identified_set(&e1, &spec).unwrap().count(), 400);
        let bad = GridSpec::square(1.0, 1.0, 10);
        assert!(scan_identified_set(&empty, &bad).is_err());
    }

    #[test]
    fn one_cell_is_a_singleton() {
        let spec = GridSpec::square(0.0, 1.0, 4);
        let mut member = vec![false; 16];
        member[5] = true;
        let grid = IdSetGrid { spec, member, area: 1.0 / 16.0 };
        assert!(singleton_diagnostic(&grid, None));
        assert!(singleton_diagnostic(&grid, Some(1)));
    }

    #[test]
    fn adding_inequalities_never_grows_the_set() {
        let dgp = DiscreteDgp::support_points_design(3).unwrap();
        let spec = GridSpec::square(0.5, 1.9, 40);
        let small = sample_g_set(&dgp, 500, 3, 2).unwrap();
        let large = sample_g_set(&dgp, 5_000, 3, 2).unwrap();
        let a = scan_identified_set(&small, &spec).unwrap();
        let b = scan_identified_set(&large, &spec).unwrap();
        assert!(b.is_subset_of(&a));
        assert!(is_member(&large, &[1.0, 1.0, 1.0]));
    }

    #[test]
    fn exports() {
        let spec = GridSpec::square(0.0, 1.0, 2);
        let grid = IdSetGrid { spec, member: vec![true, false, false, true], area: 0.5 };
        let mut csv = Vec::new();
        grid.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().next(), Some("beta_2,beta_3,member"));
        assert_eq!(csv.lines().nth(1), Some("0.25,0.25,1"));
        let mut pbm = Vec::new();
        grid.write_pbm(&mut pbm).unwrap();
        assert_eq!(String::from_utf8(pbm).unwrap(), "P1\n2 2\n0 1\n1 0\n");
    }
}
