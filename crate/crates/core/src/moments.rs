//! Length-2 cycle moment terms and the hinge objective.
//!
//! For a period pair `(s, t)` and individual `i` the term is
//! `g_i = sum_k (X^k_is - X^k_it) (p^k_s - p^k_t)`, a `dx`-vector. At the
//! true parameter `b' g_i >= 0` in the population, and
//! `Q_n(b) = max_{s<t} mean_i [b' g_i]_-` measures the violation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::{default_k_grid, fit_ccp, loo_cv_select_k, CcpFit, KChoice, PairFits};
use crate::panel::PanelDataset;
use crate::util::dot;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTerm {
    pub g: Vec<f64>,
    pub pair: (usize, usize),
    pub individual: usize,
}

/// Terms for one period pair, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerms {
    pub pair: (usize, usize),
    individuals: Vec<usize>,
    g: Vec<f64>,
}

impl PairTerms {
    pub fn new(pair: (usize, usize)) -> Self {
        Self { pair, individuals: Vec::new(), g: Vec::new() }
    }

    pub fn push(&mut self, individual: usize, g: &[f64]) {
        self.individuals.push(individual);
        self.g.extend_from_slice(g);
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[usize] {
        &self.individuals
    }

    pub fn g_rows(&self, dx: usize) -> std::slice::ChunksExact<'_, f64> {
        self.g.chunks_exact(dx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermSet {
    dx: usize,
    pairs: Vec<PairTerms>,
}

impl TermSet {
    /// Pairs are kept sorted by `(s, t)`.
    pub fn new(dx: usize, mut pairs: Vec<PairTerms>) -> Result<Self> {
        if dx == 0 {
            return Err(Error::invalid("covariate dimension must be positive"));
        }
        for p in &pairs {
            if p.pair.0 >= p.pair.1 {
                return Err(Error::invalid(format!("pair key ({}, {}) must have s < t", p.pair.0, p.pair.1)));
            }
            if p.g.len() != p.len() * dx {
                return Err(Error::DimensionMismatch { what: "term vector", expected: p.len() * dx, got: p.g.len() });
            }
        }
        pairs.sort_by_key(|p| p.pair);
        Ok(Self { dx, pairs })
    }

    /// A single-pair term set from explicit g vectors.
    pub fn from_vectors(dx: usize, gs: &[Vec<f64>]) -> Result<Self> {
        let mut p = PairTerms::new((0, 1));
        for (i, g) in gs.iter().enumerate() {
            if g.len() != dx {
                return Err(Error::DimensionMismatch { what: "term vector", expected: dx, got: g.len() });
            }
            p.push(i, g);
        }
        Self::new(dx, vec![p])
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn pairs(&self) -> &[PairTerms] {
        &self.pairs
    }

    pub fn total_terms(&self) -> usize {
        self.pairs.iter().map(|p| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_terms() == 0
    }

    /// Whether every term vector is exactly zero.
    pub fn all_zero(&self) -> bool {
        self.pairs.iter().all(|p| p.g.iter().all(|v| *v == 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = MomentTerm> + '_ {
        self.pairs.iter().flat_map(move |p| {
            p.individuals.iter().zip(p.g.chunks_exact(self.dx)).map(move |(&i, g)| MomentTerm {
                g: g.to_vec(),
                pair: p.pair,
                individual: i,
            })
        })
    }

    /// Every term multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> TermSet {
        let pairs = self
            .pairs
            .iter()
            .map(|p| PairTerms { pair: p.pair, individuals: p.individuals.clone(), g: p.g.iter().map(|v| v * lambda).collect() })
            .collect();
        TermSet { dx: self.dx, pairs }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = String::from("pair_s,pair_t,id");
        for j in 1..=self.dx {
            header.push_str(&format!(",g_{j}"));
        }
        writeln!(f, "{header}")?;
        for term in self.terms() {
            let gs: Vec<String> = term.g.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{},{},{},{}", term.pair.0 + 1, term.pair.1 + 1, term.individual + 1, gs.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

/// `sum_k (x_s^k - x_t^k) (p_s^k - p_t^k)` with covariates laid out
/// option-major.
pub fn pair_term(x_s: &[f64], x_t: &[f64], p_s: &[f64], p_t: &[f64], dx: usize) -> Vec<f64> {
    let mut g = vec![0.0; dx];
    for (k, (ps, pt)) in p_s.iter().zip(p_t).enumerate() {
        let dp = ps - pt;
        if dp == 0.0 {
            continue;
        }
        for j in 0..dx {
            g[j] += (x_s[k * dx + j] - x_t[k * dx + j]) * dp;
        }
    }
    g
}

fn terms_for_fit(d: &PanelDataset, fit: &CcpFit, rows: &[usize]) -> PairTerms {
    let (s, t) = fit.pair();
    let dx = d.dx();
    let gs: Vec<Vec<f64>> = (0..rows.len())
        .into_par_iter()
        .map(|local| {
            let i = rows[local];
            let (p_s, p_t) = fit.predict_row(local);
            pair_term(d.x_it(i, s), d.x_it(i, t), &p_s, &p_t, dx)
        })
        .collect();
    let mut out = PairTerms::new((s, t));
    for (local, g) in gs.iter().enumerate() {
        out.push(rows[local], g);
    }
    out
}

/// Terms for every pair `s < t`, using the first-stage fit of each pair
/// evaluated at the individual's own covariates.
pub fn build_terms(d: &PanelDataset, fits: &PairFits) -> Result<TermSet> {
    let all: Vec<usize> = (0..d.n()).collect();
    let mut pairs = Vec::new();
    for s in 0..d.periods() {
        for t in s + 1..d.periods() {
            let fit = fits.get(&(s, t)).ok_or(Error::MissingFit { s, t })?;
            if fit.n() != d.n() {
                return Err(Error::invalid(format!("fit for ({s}, {t}) was built on {} rows, dataset has {}", fit.n(), d.n())));
            }
            pairs.push(terms_for_fit(d, fit, &all));
        }
    }
    TermSet::new(d.dx(), pairs)
}

/// First-stage fits for one control cell: individuals whose control label
/// equals `z` in both periods of the pair.
#[derive(Clone, Debug)]
pub struct CellFit {
    pub pair: (usize, usize),
    pub z: i64,
    pub rows: Vec<usize>,
    pub fit: CcpFit,
}

#[derive(Clone, Debug, Default)]
pub struct MatchedFits {
    pub cells: Vec<CellFit>,
    pub warnings: Vec<String>,
}

/// Smallest cell that is fitted; smaller cells are skipped with a warning.
pub const DEFAULT_MIN_CELL: usize = 6;

/// Groups individuals by control label for every pair (keeping only those
/// with `Z_is == Z_it`) and fits the first stage within each cell.
pub fn fit_matched_cells(d: &PanelDataset, choice: &KChoice, min_cell: usize) -> Result<MatchedFits> {
    if !d.has_controls() {
        return Err(Error::invalid("control matching requires a z column"));
    }
    let mut out = MatchedFits::default();
    for s in 0..d.periods() {
        for t in s + 1..d.periods() {
            let mut cells: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for i in 0..d.n() {
                let (zs, zt) = (d.control(i, s).unwrap(), d.control(i, t).unwrap());
                if zs == zt {
                    cells.entry(zs).or_default().push(i);
                }
            }
            if cells.is_empty() {
                out.warnings.push(format!("pair ({}, {}): no individual has a time-constant control", s + 1, t + 1));
            }
            for (z, rows) in cells {
                if rows.len() < min_cell.max(2) {
                    out.warnings.push(format!(
                        "pair ({}, {}): control cell z = {z} has {} observations, skipped",
                        s + 1,
                        t + 1,
                        rows.len()
                    ));
                    continue;
                }
                let sub = d.select(&rows);
                let k = match choice {
                    KChoice::Fixed(k) => (*k).min(sub.n()),
                    KChoice::CrossValidate(grid) => {
                        let grid: Vec<usize> = grid
                            .clone()
                            .unwrap_or_else(|| default_k_grid(sub.n()))
                            .into_iter()
                            .filter(|&k| k >= 1 && k < sub.n())
                            .collect();
                        if grid.is_empty() {
                            1
                        } else {
                            loo_cv_select_k(&sub, s, t, &grid)?.k_star
                        }
                    }
                };
                let fit = fit_ccp(&sub, s, t, k)?;
                out.cells.push(CellFit { pair: (s, t), z, rows, fit });
            }
        }
    }
    Ok(out)
}

/// Terms restricted to individuals whose control is constant across the
/// pair, using within-cell first-stage fits. Pairs without any fitted cell
/// get an empty term list.
pub fn build_terms_matched(d: &PanelDataset, fits: &MatchedFits) -> Result<TermSet> {
    let dx = d.dx();
    let mut by_pair: BTreeMap<(usize, usize), PairTerms> = BTreeMap::new();
    for s in 0..d.periods() {
        for t in s + 1..d.periods() {
            by_pair.insert((s, t), PairTerms::new((s, t)));
        }
    }
    for cell in &fits.cells {
        let sub = d.select(&cell.rows);
        let local = terms_for_fit(&sub, &cell.fit, &(0..cell.rows.len()).collect::<Vec<_>>());
        let entry = by_pair.get_mut(&cell.pair).ok_or(Error::MissingFit { s: cell.pair.0, t: cell.pair.1 })?;
        for (&li, g) in local.individuals().iter().zip(local.g_rows(dx)) {
            entry.push(cell.rows[li], g);
        }
    }
    TermSet::new(dx, by_pair.into_values().collect())
}

#[inline]
fn hinge(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else {
        0.0
    }
}

fn check_query(b: &[f64], terms: &TermSet) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::EmptyTerms);
    }
    if b.len() != terms.dx() {
        return Err(Error::DimensionMismatch { what: "parameter", expected: terms.dx(), got: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("parameter has non-finite entries"));
    }
    Ok(())
}

/// Per-pair mean hinge losses; `None` for pairs without terms.
fn pair_means(b: &[f64], terms: &TermSet) -> Vec<Option<f64>> {
    terms
        .pairs
        .iter()
        .map(|p| {
            if p.is_empty() {
                None
            } else {
                let total: f64 = p.g_rows(terms.dx).map(|g| hinge(dot(b, g))).sum();
                Some(total / p.len() as f64)
            }
        })
        .collect()
}

/// Index of the smallest pair attaining the maximum mean hinge, and the max.
fn argmax_pair(means: &[Option<f64>]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (idx, m) in means.iter().enumerate() {
        if let Some(v) = m {
            if *v > best.1 {
                best = (idx, *v);
            }
        }
    }
    best
}

/// `max_{s<t} (1/n_st) sum_i [b' g_i]_-`, averaging over the terms
/// available for each pair.
pub fn q_n(b: &[f64], terms: &TermSet) -> Result<f64> {
    check_query(b, terms)?;
    Ok(argmax_pair(&pair_means(b, terms)).1)
}

/// A subgradient of [`q_n`]: on the first pair attaining the max,
/// `(1/n_st) sum_{i: b'g_i < 0} (-g_i)`.
pub fn subgradient(b: &[f64], terms: &TermSet) -> Result<Vec<f64>> {
    check_query(b, terms)?;
    let (idx, _) = argmax_pair(&pair_means(b, terms));
    Ok(pair_subgradient(b, &terms.pairs[idx], terms.dx))
}

/// Objective value and subgradient in one pass over the terms.
pub fn value_and_subgradient(b: &[f64], terms: &TermSet) -> Result<(f64, Vec<f64>)> {
    check_query(b, terms)?;
    let (idx, value) = argmax_pair(&pair_means(b, terms));
    Ok((value, pair_subgradient(b, &terms.pairs[idx], terms.dx)))
}

fn pair_subgradient(b: &[f64], pair: &PairTerms, dx: usize) -> Vec<f64> {
    let mut sg = vec![0.0; dx];
    for g in pair.g_rows(dx) {
        if dot(b, g) < 0.0 {
            for (a, v) in sg.iter_mut().zip(g) {
                *a -= v;
            }
        }
    }
    let m = pair.len() as f64;
    sg.iter_mut().for_each(|v| *v /= m);
    sg
}
