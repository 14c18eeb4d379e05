//! Random-utility primitives: logit choice probabilities, the social
//! surplus function, numeric gradients and a cyclic-monotonicity checker.
//!
//! Option 0 is the outside option; its systematic utility is normalized to
//! zero and it is never stored. A utility vector therefore has one entry per
//! inside option.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};

use crate::error::{Error, Result};
use crate::util::dot;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const DEFAULT_GRADIENT_STEP: f64 = 1e-5;

/// Choice probabilities of the inside options 1..=K. The outside option's
/// probability is the residual `1 - sum`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceProbs(Vec<f64>);

impl ChoiceProbs {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("choice probabilities must be finite and nonnegative"));
        }
        if p.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::invalid("inside choice probabilities sum above one"));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn outside(&self) -> f64 {
        (1.0 - self.0.iter().sum::<f64>()).max(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for ChoiceProbs {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A closed cycle of utility vectors; the last point connects back to the
/// first.
#[derive(Clone, Debug)]
pub struct Cycle {
    points: Vec<Vec<f64>>,
}

impl Cycle {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a cycle needs at least two points"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("cycle points must have positive dimension"));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { what: "cycle point", expected: dim, got: bad.len() });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

fn check_utilities(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::invalid("utility vector must have at least one inside option"));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("utility vector has non-finite entries"));
    }
    Ok(())
}

/// `max(0, u)` shift and the shifted denominator `exp(-m) + sum exp(u_k - m)`.
fn shifted_denominator(u: &[f64]) -> (f64, f64) {
    let m = u.iter().copied().fold(0.0_f64, f64::max);
    let denom = (-m).exp() + u.iter().map(|v| (v - m).exp()).sum::<f64>();
    (m, denom)
}

/// Multinomial logit probabilities `exp(u_k) / (1 + sum_k' exp(u_k'))`.
pub fn logit_ccp(u: &[f64]) -> Result<ChoiceProbs> {
    check_utilities(u)?;
    Ok(ChoiceProbs(logit_unchecked(u)))
}

/// Same as [`logit_ccp`] without input validation, for hot loops that
/// already guarantee finite input.
pub fn logit_unchecked(u: &[f64]) -> Vec<f64> {
    let (m, denom) = shifted_denominator(u);
    u.iter().map(|v| (v - m).exp() / denom).collect()
}

/// Expected maximum utility under i.i.d. standard Gumbel shocks on all
/// K + 1 options: `gamma + log(1 + sum exp(u_k))`.
pub fn social_surplus_gumbel(u: &[f64]) -> Result<f64> {
    check_utilities(u)?;
    let (m, denom) = shifted_denominator(u);
    Ok(EULER_GAMMA + m + denom.ln())
}

/// Source of random utility shocks. `draw` fills `shocks` (length K + 1),
/// index 0 being the outside option's shock.
pub trait ShockSampler: Sync {
    fn draw(&self, rng: &mut dyn RngCore, shocks: &mut [f64]);
}

/// I.i.d. standard Gumbel (type-I extreme value) shocks on every option.
#[derive(Clone, Copy, Debug, Default)]
pub struct GumbelShocks;

impl ShockSampler for GumbelShocks {
    fn draw(&self, rng: &mut dyn RngCore, shocks: &mut [f64]) {
        let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
        for s in shocks.iter_mut() {
            *s = g.sample(rng);
        }
    }
}

/// I.i.d. standard normal shocks on every option.
#[derive(Clone, Copy, Debug, Default)]
pub struct GaussianShocks;

impl ShockSampler for GaussianShocks {
    fn draw(&self, rng: &mut dyn RngCore, shocks: &mut [f64]) {
        for s in shocks.iter_mut() {
            *s = StandardNormal.sample(rng);
        }
    }
}

/// Uniform shocks on `[lo, hi]` for the inside options; the outside
/// option's shock is fixed at zero.
#[derive(Clone, Copy, Debug)]
pub struct UniformShocks {
    pub lo: f64,
    pub hi: f64,
}

impl ShockSampler for UniformShocks {
    fn draw(&self, rng: &mut dyn RngCore, shocks: &mut [f64]) {
        shocks[0] = 0.0;
        for s in shocks[1..].iter_mut() {
            *s = rng.random_range(self.lo..=self.hi);
        }
    }
}

/// Monte Carlo estimate of `E max(eps_0, max_k(u_k + eps_k))`.
///
/// Samplers that fix the outside shock at zero give the normalized form
/// `E max(0, max_k(u_k + eps_k))`.
pub fn social_surplus_mc(u: &[f64], sampler: &dyn ShockSampler, n_draws: usize, seed: u64) -> Result<f64> {
    check_utilities(u)?;
    if n_draws == 0 {
        return Err(Error::invalid("n_draws must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shocks = vec![0.0; u.len() + 1];
    let mut total = 0.0;
    for _ in 0..n_draws {
        sampler.draw(&mut rng, &mut shocks);
        let best = u.iter().zip(&shocks[1..]).map(|(v, e)| v + e).fold(shocks[0], f64::max);
        total += best;
    }
    Ok(total / n_draws as f64)
}

/// Central-difference gradient of `f` at `u`.
pub fn numeric_gradient<F>(f: F, u: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid("gradient step must be positive"));
    }
    let mut probe = u.to_vec();
    let mut grad = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        probe[k] = u[k] + h;
        let up = f(&probe);
        probe[k] = u[k] - h;
        let down = f(&probe);
        probe[k] = u[k];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `sum_m (u_m - u_{m+1})' f(u_m)` with `u_{M+1} = u_1`. The map is cyclic
/// monotone along the cycle iff the residual is nonnegative.
pub fn cyclic_monotonicity_residual<F>(f: F, cycle: &Cycle) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let pts = cycle.points();
    let m = pts.len();
    let mut total = 0.0;
    for (idx, point) in pts.iter().enumerate() {
        let next = &pts[(idx + 1) % m];
        let value = f(point);
        if value.len() != point.len() {
            return Err(Error::DimensionMismatch { what: "map output", expected: point.len(), got: value.len() });
        }
        let diff: Vec<f64> = point.iter().zip(next).map(|(a, b)| a - b).collect();
        total += dot(&diff, &value);
    }
    Ok(total)
}

/// Draws a random cycle with `len` points uniformly in `[lo, hi]^dim`.
pub fn random_cycle<R: Rng + ?Sized>(rng: &mut R, len: usize, dim: usize, lo: f64, hi: f64) -> Cycle {
    let points = (0..len).map(|_| (0..dim).map(|_| rng.random_range(lo..=hi)).collect()).collect();
    Cycle::new(points).expect("random cycle is well formed")
}
