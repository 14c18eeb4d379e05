//! First-stage k-nearest-neighbor estimates of pairwise conditional choice
//! probabilities `E[Y_j | X_s = x_s, X_t = x_t]` for `j in {s, t}`.
//!
//! The design row of individual `i` for the pair `(s, t)` is the
//! concatenation of `X_is` and `X_it`; the target row is the concatenation of
//! the inside-option indicators of `Y_is` and `Y_it`. Distances are
//! Euclidean after dividing each coordinate by its sample standard
//! deviation; coordinates with (numerically) zero spread are dropped.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

const MIN_SCALE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CcpFit {
    pair: (usize, usize),
    k: usize,
    options: usize,
    /// Standardized retained features, row-major `n x width`.
    features: Vec<f64>,
    width: usize,
    /// One-hot targets, row-major `n x 2K`.
    targets: Vec<f64>,
    /// Retained raw coordinates with their mean and standard deviation.
    retained: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    raw_width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub k_grid: Vec<usize>,
    pub cv_loss: Vec<f64>,
    pub k_star: usize,
}

fn design_rows(d: &PanelDataset, s: usize, t: usize) -> (Vec<f64>, Vec<f64>) {
    let n = d.n();
    let w = d.options() * d.dx();
    let mut raw = Vec::with_capacity(n * 2 * w);
    let mut targets = Vec::with_capacity(n * 2 * d.options());
    for i in 0..n {
        raw.extend_from_slice(d.x_it(i, s));
        raw.extend_from_slice(d.x_it(i, t));
        targets.extend(d.one_hot(i, s));
        targets.extend(d.one_hot(i, t));
    }
    (raw, targets)
}

fn check_pair(d: &PanelDataset, s: usize, t: usize) -> Result<()> {
    if s >= t {
        return Err(Error::invalid(format!("period pair requires s < t, got ({s}, {t})")));
    }
    if t >= d.periods() {
        return Err(Error::invalid(format!("period {t} out of range for T = {}", d.periods())));
    }
    Ok(())
}

/// Fits the k-NN estimator for the period pair `(s, t)` (zero-based).
pub fn fit_ccp(d: &PanelDataset, s: usize, t: usize, k: usize) -> Result<CcpFit> {
    check_pair(d, s, t)?;
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    let (raw, targets) = design_rows(d, s, t);
    Ok(CcpFit::from_raw(raw, targets, 2 * d.options() * d.dx(), d.options(), (s, t), k))
}

impl CcpFit {
    fn from_raw(raw: Vec<f64>, targets: Vec<f64>, raw_width: usize, options: usize, pair: (usize, usize), k: usize) -> Self {
        let n = raw.len() / raw_width;
        let mut retained = Vec::new();
        let mut center = Vec::new();
        let mut scale = Vec::new();
        for c in 0..raw_width {
            let mean = (0..n).map(|i| raw[i * raw_width + c]).sum::<f64>() / n as f64;
            let ss = (0..n).map(|i| (raw[i * raw_width + c] - mean).powi(2)).sum::<f64>();
            let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            if sd >= MIN_SCALE {
                retained.push(c);
                center.push(mean);
                scale.push(sd);
            }
        }
        let width = retained.len();
        let mut features = Vec::with_capacity(n * width);
        for i in 0..n {
            for (idx, &c) in retained.iter().enumerate() {
                features.push((raw[i * raw_width + c] - center[idx]) / scale[idx]);
            }
        }
        Self { pair, k, options, features, width, targets, retained, center, scale, raw_width }
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.targets.len() / (2 * self.options)
    }

    /// Standard deviations of the retained raw coordinates.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn retained_features(&self) -> &[usize] {
        &self.retained
    }

    fn standardize(&self, x_s: &[f64], x_t: &[f64]) -> Vec<f64> {
        let half = self.raw_width / 2;
        self.retained
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let v = if c < half { x_s[c] } else { x_t[c - half] };
                (v - self.center[idx]) / self.scale[idx]
            })
            .collect()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    fn target(&self, i: usize) -> &[f64] {
        let w = 2 * self.options;
        &self.targets[i * w..(i + 1) * w]
    }

    /// Indices of the `k` nearest training rows to `query` (standardized),
    /// ordered by `(distance, index)`.
    fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = (0..self.n()).filter(|&i| Some(i) != exclude).map(|i| (sq_dist(self.row(i), query), i)).collect();
        take_smallest(&mut cand, k);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    fn average(&self, rows: &[usize]) -> Vec<f64> {
        let w = 2 * self.options;
        let mut acc = vec![0.0; w];
        for &i in rows {
            for (a, v) in acc.iter_mut().zip(self.target(i)) {
                *a += v;
            }
        }
        let m = rows.len() as f64;
        acc.iter_mut().for_each(|a| *a = (*a / m).clamp(0.0, 1.0));
        acc
    }

    /// Predicted inside-option probabilities for period `s` and period `t`
    /// at covariates `(x_s, x_t)`, each of length `K * dx`.
    pub fn predict(&self, x_s: &[f64], x_t: &[f64], exclude: Option<usize>) -> Result<(Vec<f64>, Vec<f64>)> {
        let half = self.raw_width / 2;
        if x_s.len() != half || x_t.len() != half {
            return Err(Error::DimensionMismatch { what: "query covariates", expected: half, got: x_s.len().max(x_t.len()) });
        }
        if let Some(e) = exclude {
            if e >= self.n() {
                return Err(Error::invalid(format!("excluded row {e} out of range")));
            }
        }
        let available = self.n() - usize::from(exclude.is_some());
        if available < self.k {
            return Err(Error::invalid("not enough rows left for k neighbors"));
        }
        let q = self.standardize(x_s, x_t);
        let rows = self.nearest(&q, self.k, exclude);
        let mut p = self.average(&rows);
        let p_t = p.split_off(self.options);
        Ok((p, p_t))
    }

    /// Predictions at training row `i`, the row itself included as a
    /// neighbor.
    pub fn predict_row(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let rows = self.nearest(self.row(i), self.k, None);
        let mut p = self.average(&rows);
        let p_t = p.split_off(self.options);
        (p, p_t)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest entries of `cand`, sorted.
fn take_smallest(cand: &mut Vec<(f64, usize)>, k: usize) {
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_dist_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist_then_index);
}

/// Ten geometrically spaced neighbor counts from `max(5, ceil(n^(1/3)))` to
/// `ceil(n^0.8)`, capped at `n - 1` and deduplicated.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let nf = n as f64;
    let cap = n - 1;
    let lo = (nf.cbrt().ceil() as usize).max(5).min(cap);
    let hi = (nf.powf(0.8).ceil() as usize).clamp(lo, cap);
    let steps = 10;
    let mut grid: Vec<usize> = (0..steps)
        .map(|s| {
            let frac = s as f64 / (steps - 1) as f64;
            ((lo as f64) * (hi as f64 / lo as f64).powf(frac)).round() as usize
        })
        .map(|k| k.clamp(lo, hi))
        .collect();
    grid.dedup();
    grid
}

/// Leave-one-out cross-validation of the neighbor count for the pair
/// `(s, t)`; ties go to the smaller `k`.
pub fn loo_cv_select_k(d: &PanelDataset, s: usize, t: usize, k_grid: &[usize]) -> Result<CvReport> {
    check_pair(d, s, t)?;
    if k_grid.is_empty() {
        return Err(Error::invalid("empty k grid"));
    }
    let n = d.n();
    if let Some(&bad) = k_grid.iter().find(|&&k| k == 0 || k + 1 > n) {
        return Err(Error::invalid(format!("k = {bad} invalid for leave-one-out with n = {n}")));
    }
    let k_max = *k_grid.iter().max().unwrap();
    let fit = fit_ccp(d, s, t, k_max)?;
    let w = 2 * d.options();

    // Per left-out row: squared error of the running neighbor mean at each k.
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows = fit.nearest(fit.row(i), k_max, Some(i));
            let own = fit.target(i);
            let mut sum = vec![0.0; w];
            let mut out = Vec::with_capacity(k_grid.len());
            let mut used = 0;
            for &k in k_grid {
                // k_grid need not be sorted
                if k < used {
                    sum.iter_mut().for_each(|v| *v = 0.0);
                    used = 0;
                }
                for &r in &rows[used..k] {
                    for (a, v) in sum.iter_mut().zip(fit.target(r)) {
                        *a += v;
                    }
                }
                used = k;
                let err: f64 = sum
                    .iter()
                    .zip(own)
                    .map(|(a, o)| {
                        let p = (a / k as f64).clamp(0.0, 1.0);
                        (p - o) * (p - o)
                    })
                    .sum();
                out.push(err);
            }
            out
        })
        .collect();

    let cv_loss: Vec<f64> = (0..k_grid.len()).map(|g| per_row.iter().map(|r| r[g]).sum()).collect();
    let mut best = 0;
    for g in 1..k_grid.len() {
        let better = cv_loss[g] < cv_loss[best] || (cv_loss[g] == cv_loss[best] && k_grid[g] < k_grid[best]);
        if better {
            best = g;
        }
    }
    Ok(CvReport { k_grid: k_grid.to_vec(), cv_loss, k_star: k_grid[best] })
}

/// How the neighbor count is chosen for each pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    /// Leave-one-out CV over the given grid, or [`default_k_grid`] if `None`.
    CrossValidate(Option<Vec<usize>>),
}

impl Default for KChoice {
    fn default() -> Self {
        KChoice::CrossValidate(None)
    }
}

/// First-stage fits keyed by period pair `(s, t)`.
pub type PairFits = BTreeMap<(usize, usize), CcpFit>;

/// Fits every pair `s < t` of the panel.
pub fn fit_all_pairs(d: &PanelDataset, choice: &KChoice) -> Result<(PairFits, Vec<CvReport>)> {
    let mut fits = BTreeMap::new();
    let mut reports = Vec::new();
    for s in 0..d.periods() {
        for t in s + 1..d.periods() {
            let k = match choice {
                KChoice::Fixed(k) => *k,
                KChoice::CrossValidate(grid) => {
                    let grid = grid
                        .as_ref()
                        .map(|g| g.iter().copied().filter(|&k| k < d.n()).collect::<Vec<_>>())
                        .unwrap_or_else(|| default_k_grid(d.n()));
                    let report = loo_cv_select_k(d, s, t, &grid)?;
                    let k = report.k_star;
                    reports.push(report);
                    k
                }
            };
            fits.insert((s, t), fit_ccp(d, s, t, k)?);
        }
    }
    Ok((fits, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    // n individuals, T = 2, K = 1, dx = 1: covariates (x_s, x_t) per row.
    fn scalar_panel(rows: &[(f64, f64, usize, usize)]) -> PanelDataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &(a, b, ya, yb) in rows {
            x.push(a);
            x.push(b);
            y.push(ya);
            y.push(yb);
        }
        PanelDataset::from_arrays(2, 1, 1, x, y, None).unwrap()
    }

    #[test]
    fn k_equal_n_averages_everything() {
        let d = scalar_panel(&[(0.0, 1.0, 1, 0), (2.0, 0.5, 0, 0), (1.0, 3.0, 1, 1)]);
        let fit = fit_ccp(&d, 0, 1, 3).unwrap();
        let (ps, pt) = fit.predict(&[10.0], &[-4.0], None).unwrap();
        assert!((ps[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pt[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_coordinate_is_dropped() {
        let d = scalar_panel(&[(1.0, 0.0, 1, 0), (1.0, 0.5, 0, 0), (1.0, 3.0, 1, 1)]);
        let fit = fit_ccp(&d, 0, 1, 1).unwrap();
        assert_eq!(fit.retained_features(), &[1]);
        assert!(fit.scale().iter().all(|s| *s > 0.0));
        let (ps, _) = fit.predict(&[99.0], &[2.9], None).unwrap();
        assert_eq!(ps, vec![1.0]);
    }

    #[test]
    fn one_neighbor_at_training_point_is_self() {
        let d = scalar_panel(&[(0.0, 0.0, 1, 0), (0.4, 1.0, 0, 1), (2.0, 2.0, 1, 1), (0.4, 1.0, 0, 1)]);
        let fit = fit_ccp(&d, 0, 1, 1).unwrap();
        for i in 0..d.n() {
            let (ps, pt) = fit.predict_row(i);
            assert_eq!(ps, d.one_hot(i, 0));
            assert_eq!(pt, d.one_hot(i, 1));
        }
    }

    #[test]
    fn five_point_hand_enumeration() {
        // x_t constant so only x_s matters. x_s = 0, 1, 2, 4, 8; query 2.6.
        // Distances (raw) 2.6, 1.6, 0.6, 1.4, 5.4 -> nearest two are rows 2 and 3.
        let d = scalar_panel(&[(0.0, 5.0, 1, 0), (1.0, 5.0, 1, 0), (2.0, 5.0, 0, 1), (4.0, 5.0, 1, 1), (8.0, 5.0, 0, 0)]);
        let fit = fit_ccp(&d, 0, 1, 2).unwrap();
        let (ps, pt) = fit.predict(&[2.6], &[5.0], None).unwrap();
        assert_eq!(ps, vec![0.5]);
        assert_eq!(pt, vec![1.0]);
        // excluding row 3 brings in row 1 (distance 1.6)
        let (ps, pt) = fit.predict(&[2.6], &[5.0], Some(3)).unwrap();
        assert_eq!(ps, vec![0.5]);
        assert_eq!(pt, vec![0.5]);
    }

    #[test]
    fn ties_break_by_row_index() {
        let d = scalar_panel(&[(1.0, 0.0, 1, 0), (-1.0, 0.0, 0, 1), (3.0, 1.0, 0, 0)]);
        let fit = fit_ccp(&d, 0, 1, 1).unwrap();
        // query at x_s = 0 is equidistant from rows 0 and 1 in standardized space
        let q_s = [0.0];
        let q_t = [0.0];
        let (ps, _) = fit.predict(&q_s, &q_t, None).unwrap();
        assert_eq!(ps, vec![1.0]);
    }

    #[test]
    fn fit_argument_errors() {
        let d = scalar_panel(&[(0.0, 1.0, 1, 0), (2.0, 0.5, 0, 0)]);
        assert!(fit_ccp(&d, 0, 1, 0).is_err());
        assert!(fit_ccp(&d, 0, 1, 3).is_err());
        assert!(fit_ccp(&d, 1, 1, 1).is_err());
        assert!(fit_ccp(&d, 1, 0, 1).is_err());
        let fit = fit_ccp(&d, 0, 1, 1).unwrap();
        assert!(fit.predict(&[0.0], &[0.0], Some(2)).is_err());
        assert!(fit.predict(&[0.0, 1.0], &[0.0], None).is_err());
    }

    #[test]
    fn cv_tie_goes_to_smallest_k() {
        let rows: Vec<_> = (0..8).map(|i| (i as f64, (i * i) as f64, 1, 1)).collect();
        let d = scalar_panel(&rows);
        let r = loo_cv_select_k(&d, 0, 1, &[4, 2, 6]).unwrap();
        assert!(r.cv_loss.iter().all(|l| *l == 0.0));
        assert_eq!(r.k_star, 2);
    }

    #[test]
    fn cv_rejects_bad_grids() {
        let d = scalar_panel(&[(0.0, 1.0, 1, 0), (2.0, 0.5, 0, 0), (1.0, 3.0, 1, 1)]);
        assert!(loo_cv_select_k(&d, 0, 1, &[]).is_err());
        assert!(loo_cv_select_k(&d, 0, 1, &[3]).is_err());
        assert!(loo_cv_select_k(&d, 0, 1, &[2]).is_ok());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_k_grid(500);
        assert_eq!(*g.first().unwrap(), 8);
        assert_eq!(*g.last().unwrap(), (500f64.powf(0.8)).ceil() as usize);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() <= 10);
        let small = default_k_grid(6);
        assert!(small.iter().all(|&k| k <= 5));
    }
}
