//! Minimization of `Q_n` over the unit max-norm sphere.
//!
//! The sphere `{b : max_j |b_j| = 1}` is the union of the `2 dx` faces
//! `{b : b_j = ±1, |b_j'| <= 1}`. Each face is convex and `Q_n` is convex,
//! so each face is solved by projected subgradient descent on the free
//! coordinates. The best face gives `beta_tilde`, which is then rescaled to
//! unit Euclidean norm.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{q_n, value_and_subgradient, TermSet};
use crate::util::{derive_seed, norm2};

pub const UNIDENTIFIED_NOTE: &str = "objective identically zero - parameter not identified from these terms";

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    /// Step at iteration `k` is `step_scale / sqrt(k)` along the unit
    /// subgradient direction.
    pub step_scale: f64,
    /// Improvements smaller than `stall_tol` times the starting objective do
    /// not reset the stall counter.
    pub stall_tol: f64,
    pub stall_window: usize,
    /// Random starting points per face, in addition to the origin.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { max_iter: 5000, step_scale: 1.0, stall_tol: 1e-10, stall_window: 500, restarts: 4, seed: 0 }
    }
}

/// The face `b_j = sign` with the remaining coordinates in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub j: usize,
    pub sign: i8,
}

impl Face {
    pub fn new(j: usize, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::invalid("face sign must be +1 or -1"));
        }
        Ok(Self { j, sign })
    }

    /// All `2 dx` faces in tie-break order: `j` ascending, `+1` before `-1`.
    pub fn all(dx: usize) -> Vec<Face> {
        (0..dx).flat_map(|j| [Face { j, sign: 1 }, Face { j, sign: -1 }]).collect()
    }

    fn index(&self) -> u64 {
        2 * self.j as u64 + u64::from(self.sign < 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceSolution {
    pub b: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn descend(terms: &TermSet, face: Face, start: Vec<f64>, opts: &OptimizerOptions) -> Result<FaceSolution> {
    let mut b = start;
    b[face.j] = f64::from(face.sign);
    let (mut value, mut sg) = value_and_subgradient(&b, terms)?;
    let mut best = FaceSolution { b: b.clone(), value, iterations: 0, converged: false };
    // relative to the starting value so the path is invariant to rescaling the terms
    let tol = opts.stall_tol * value;
    let mut last_gain = 0;
    for iter in 1..=opts.max_iter {
        if best.value <= 0.0 {
            best.converged = true;
            return Ok(best);
        }
        sg[face.j] = 0.0;
        let len = norm2(&sg);
        if len == 0.0 {
            best.converged = true;
            return Ok(best);
        }
        let step = opts.step_scale / (iter as f64).sqrt() / len;
        for (idx, (x, d)) in b.iter_mut().zip(&sg).enumerate() {
            if idx != face.j {
                *x = (*x - step * d).clamp(-1.0, 1.0);
            }
        }
        (value, sg) = value_and_subgradient(&b, terms)?;
        best.iterations = iter;
        if value < best.value {
            if value < best.value - tol {
                last_gain = iter;
            }
            best.b.copy_from_slice(&b);
            best.value = value;
        }
        if iter - last_gain >= opts.stall_window {
            best.converged = true;
            return Ok(best);
        }
    }
    Ok(best)
}

/// Best point found on one face, over the origin start and
/// `opts.restarts` seeded random starts.
pub fn minimize_face(terms: &TermSet, face: Face, opts: &OptimizerOptions) -> Result<FaceSolution> {
    let dx = terms.dx();
    if face.j >= dx {
        return Err(Error::invalid(format!("face coordinate {} out of range", face.j)));
    }
    let mut starts = vec![vec![0.0; dx]];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, face.index()));
    for _ in 0..opts.restarts {
        starts.push((0..dx).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    let mut best: Option<FaceSolution> = None;
    for start in starts {
        let sol = descend(terms, face, start, opts)?;
        if best.as_ref().is_none_or(|b| sol.value < b.value) {
            best = Some(sol);
        }
        if best.as_ref().is_some_and(|b| b.value <= 0.0) {
            break;
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub beta_tilde: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub qn_value: f64,
    pub face: Face,
    pub iterations: usize,
    pub converged: bool,
    pub note: Option<String>,
}

impl EstimateResult {
    fn from_tilde(beta_tilde: Vec<f64>, qn_value: f64, face: Face, iterations: usize, converged: bool, note: Option<String>) -> Self {
        let n = norm2(&beta_tilde);
        let beta_hat = beta_tilde.iter().map(|v| v / n).collect();
        Self { beta_tilde, beta_hat, qn_value, face, iterations, converged, note }
    }

    pub fn identified(&self) -> bool {
        self.note.is_none()
    }

    /// Key-value text document; vectors are comma-separated and floats use
    /// round-trip formatting.
    pub fn to_document(&self) -> String {
        self.to_string()
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl fmt::Display for EstimateResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(note) = &self.note {
            writeln!(f, "# {note}")?;
        }
        writeln!(f, "beta_tilde = {}", join(&self.beta_tilde))?;
        writeln!(f, "beta_hat = {}", join(&self.beta_hat))?;
        writeln!(f, "qn_value = {:?}", self.qn_value)?;
        writeln!(f, "face_j = {}", self.face.j + 1)?;
        writeln!(f, "face_sign = {}", if self.face.sign > 0 { "+1" } else { "-1" })?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "converged = {}", self.converged)
    }
}

impl FromStr for EstimateResult {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let doc = crate::kv::parse(s)?;
        let vector = |key: &str| -> Result<Vec<f64>> {
            doc.require(key)?
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number in {key}"))))
                .collect()
        };
        let scalar = |key: &str| -> Result<&str> { doc.require(key) };
        let face_j: usize = scalar("face_j")?.parse().map_err(|_| Error::invalid("bad face_j"))?;
        let face_sign: i8 = scalar("face_sign")?.trim_start_matches('+').parse().map_err(|_| Error::invalid("bad face_sign"))?;
        if face_j == 0 {
            return Err(Error::invalid("face_j is one-based"));
        }
        let note = s.lines().find_map(|l| l.trim().strip_prefix('#').map(|n| n.trim().to_string()));
        Ok(Self {
            beta_tilde: vector("beta_tilde")?,
            beta_hat: vector("beta_hat")?,
            qn_value: scalar("qn_value")?.parse().map_err(|_| Error::invalid("bad qn_value"))?,
            face: Face::new(face_j - 1, face_sign)?,
            iterations: scalar("iterations")?.parse().map_err(|_| Error::invalid("bad iterations"))?,
            converged: scalar("converged")?.parse().map_err(|_| Error::invalid("bad converged"))?,
            note,
        })
    }
}

/// Solves every face and keeps the smallest objective (ties: smallest `j`,
/// then `+1`). Faces run in parallel; the reduction is sequential in face
/// order, so the result does not depend on the thread count.
pub fn estimate_beta(terms: &TermSet, opts: &OptimizerOptions) -> Result<EstimateResult> {
    if terms.is_empty() {
        return Err(Error::EmptyTerms);
    }
    let dx = terms.dx();
    if terms.all_zero() {
        let mut b = vec![0.0; dx];
        b[0] = 1.0;
        return Ok(EstimateResult::from_tilde(b, 0.0, Face { j: 0, sign: 1 }, 0, true, Some(UNIDENTIFIED_NOTE.into())));
    }
    let faces = Face::all(dx);
    let sols: Vec<FaceSolution> = faces.par_iter().map(|&face| minimize_face(terms, face, opts)).collect::<Result<_>>()?;
    let mut best = 0;
    for idx in 1..sols.len() {
        if sols[idx].value < sols[best].value {
            best = idx;
        }
    }
    let sol = &sols[best];
    let value = q_n(&sol.b, terms)?;
    Ok(EstimateResult::from_tilde(sol.b.clone(), value, faces[best], sol.iterations, sol.converged, None))
}

/// Scaling applied to grid directions before evaluating `Q_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Euclidean,
    /// Rescale to `max_j |b_j| = 1`, the estimator's constraint set.
    MaxNorm,
}

/// Exhaustive search over an angular grid of directions (`dx` of 2 or 3).
///
/// For `dx = 2` the grid has `resolution` equally spaced angles. For
/// `dx = 3` it has `resolution` azimuths times `resolution / 2 + 1` polar
/// angles (poles included).
pub fn grid_oracle(terms: &TermSet, resolution: usize, norm: Normalization) -> Result<(Vec<f64>, f64)> {
    let dx = terms.dx();
    if !(2..=3).contains(&dx) {
        return Err(Error::invalid(format!("grid oracle supports dx in {{2, 3}}, got {dx}")));
    }
    if resolution < 4 {
        return Err(Error::invalid("grid resolution must be at least 4"));
    }
    if terms.is_empty() {
        return Err(Error::EmptyTerms);
    }
    let tau = std::f64::consts::TAU;
    let dirs: Vec<Vec<f64>> = if dx == 2 {
        (0..resolution)
            .map(|i| {
                let a = tau * i as f64 / resolution as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let polar = resolution / 2;
        (0..=polar)
            .flat_map(|p| {
                let th = std::f64::consts::PI * p as f64 / polar as f64;
                let azimuths = if p == 0 || p == polar { 1 } else { resolution };
                (0..azimuths).map(move |a| {
                    let ph = tau * a as f64 / resolution as f64;
                    vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
                })
            })
            .collect()
    };
    let values: Vec<(Vec<f64>, f64)> = dirs
        .into_par_iter()
        .map(|d| {
            let b = match norm {
                Normalization::Euclidean => d,
                Normalization::MaxNorm => {
                    let m = crate::util::norm_inf(&d);
                    d.iter().map(|v| v / m).collect()
                }
            };
            let v = q_n(&b, terms).expect("validated terms");
            (b, v)
        })
        .collect();
    let mut best = 0;
    for idx in 1..values.len() {
        if values[idx].1 < values[best].1 {
            best = idx;
        }
    }
    Ok(values.into_iter().nth(best).expect("nonempty grid"))
}
