//! Market-share data: moment terms built straight from observed shares,
//! with no first-stage smoothing.
//!
//! Zero shares are used as they are. With very few consumers per market the
//! shares are noisy and the terms inherit that noise.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{pair_term, PairTerms, TermSet};
use crate::optimizer::{estimate_beta, EstimateResult, OptimizerOptions};
use crate::panel::{Issue, ValidationReport};

/// Largest amount by which inside shares may sum above one.
pub const SHARE_SUM_TOL: f64 = 1e-9;
/// Tolerance for an explicit outside-option share in a CSV file.
pub const OUTSIDE_SHARE_TOL: f64 = 1e-6;

/// Covariates `x[c][t][k][j]` and inside shares `s[c][t][k]`, with optional
/// consumer counts `n[c][t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateDataset {
    ids: Vec<String>,
    periods: usize,
    options: usize,
    dx: usize,
    x: Vec<f64>,
    s: Vec<f64>,
    counts: Option<Vec<u64>>,
}

impl AggregateDataset {
    pub fn new(
        ids: Vec<String>,
        periods: usize,
        options: usize,
        dx: usize,
        x: Vec<f64>,
        s: Vec<f64>,
        counts: Option<Vec<u64>>,
    ) -> Result<Self> {
        let c = ids.len();
        if c == 0 || periods == 0 || options == 0 || dx == 0 {
            return Err(Error::invalid("markets, periods, options and dx must all be positive"));
        }
        if x.len() != c * periods * options * dx {
            return Err(Error::DimensionMismatch { what: "covariates", expected: c * periods * options * dx, got: x.len() });
        }
        if s.len() != c * periods * options {
            return Err(Error::DimensionMismatch { what: "shares", expected: c * periods * options, got: s.len() });
        }
        if let Some(n) = &counts {
            if n.len() != c * periods {
                return Err(Error::DimensionMismatch { what: "consumer counts", expected: c * periods, got: n.len() });
            }
        }
        Ok(Self { ids, periods, options, dx, x, s, counts })
    }

    /// Markets are labelled "1".."C".
    pub fn from_arrays(periods: usize, options: usize, dx: usize, x: Vec<f64>, s: Vec<f64>, counts: Option<Vec<u64>>) -> Result<Self> {
        let per = periods * options;
        if per == 0 {
            return Err(Error::invalid("periods and options must be positive"));
        }
        let c = s.len() / per;
        let ids = (1..=c).map(|i| i.to_string()).collect();
        Self::new(ids, periods, options, dx, x, s, counts)
    }

    pub fn markets(&self) -> usize {
        self.ids.len()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn options(&self) -> usize {
        self.options
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Covariates of market `c` in period `t`, option-major.
    pub fn x_ct(&self, c: usize, t: usize) -> &[f64] {
        let w = self.options * self.dx;
        let start = (c * self.periods + t) * w;
        &self.x[start..start + w]
    }

    pub fn shares(&self, c: usize, t: usize) -> &[f64] {
        let start = (c * self.periods + t) * self.options;
        &self.s[start..start + self.options]
    }

    pub fn consumers(&self, c: usize, t: usize) -> Option<u64> {
        self.counts.as_ref().map(|n| n[c * self.periods + t])
    }

    pub fn min_consumers(&self) -> Option<u64> {
        self.counts.as_ref().and_then(|n| n.iter().copied().min())
    }

    /// Appends covariate `x_{j1} * x_{j2}` (0-based) as a new last column.
    pub fn with_interaction(&self, j1: usize, j2: usize) -> Result<Self> {
        if j1 >= self.dx || j2 >= self.dx {
            return Err(Error::invalid(format!("interaction columns must be below dx = {}", self.dx)));
        }
        let dx = self.dx + 1;
        let mut x = Vec::with_capacity(self.x.len() / self.dx * dx);
        for row in self.x.chunks_exact(self.dx) {
            x.extend_from_slice(row);
            x.push(row[j1] * row[j2]);
        }
        Self::new(self.ids.clone(), self.periods, self.options, dx, x, self.s.clone(), self.counts.clone())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        if self.periods < 2 {
            issues.push(Issue::error("dataset", "at least two periods are required"));
        }
        for c in 0..self.markets() {
            for t in 0..self.periods {
                let loc = format!("market {} period {}", self.ids[c], t + 1);
                let s = self.shares(c, t);
                if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    issues.push(Issue::error(&loc, "shares must be finite and nonnegative"));
                }
                let sum: f64 = s.iter().sum();
                if sum > 1.0 + SHARE_SUM_TOL {
                    issues.push(Issue::error(&loc, format!("inside shares sum to {sum}")));
                }
                if self.x_ct(c, t).iter().any(|v| !v.is_finite()) {
                    issues.push(Issue::error(&loc, "non-finite covariate"));
                }
            }
        }
        if let Some(m) = self.min_consumers() {
            issues.push(Issue::warning("dataset", format!("smallest consumer count per market-period is {m}")));
        }
        ValidationReport::from_issues(issues)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(file)
    }

    /// Long format, one row per market, period and inside option.
    pub fn write_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["market".to_string(), "period".into(), "choice".into(), "share".into()];
        header.extend((1..=self.dx).map(|j| format!("x_{j}")));
        if self.counts.is_some() {
            header.push("n".into());
        }
        w.write_record(&header)?;
        for c in 0..self.markets() {
            for t in 0..self.periods {
                let x = self.x_ct(c, t);
                for k in 0..self.options {
                    let mut rec =
                        vec![self.ids[c].clone(), (t + 1).to_string(), (k + 1).to_string(), format!("{:?}", self.shares(c, t)[k])];
                    rec.extend(x[k * self.dx..(k + 1) * self.dx].iter().map(|v| format!("{v:?}")));
                    if let Some(n) = self.consumers(c, t) {
                        rec.push(n.to_string());
                    }
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One term per market and period pair, `sum_k (X_cs^k - X_ct^k)(S_cs^k - S_ct^k)`.
pub fn build_terms_aggregate(d: &AggregateDataset) -> Result<TermSet> {
    if d.periods < 2 {
        return Err(Error::invalid("at least two periods are required"));
    }
    for c in 0..d.markets() {
        for t in 0..d.periods {
            let sum: f64 = d.shares(c, t).iter().sum();
            if sum > 1.0 + SHARE_SUM_TOL || d.shares(c, t).iter().any(|v| *v < 0.0) {
                return Err(Error::invalid(format!("market {} period {}: inside shares sum to {sum}", d.ids[c], t + 1)));
            }
        }
    }
    let mut pairs = Vec::new();
    for s in 0..d.periods {
        for t in s + 1..d.periods {
            let gs: Vec<Vec<f64>> = (0..d.markets())
                .into_par_iter()
                .map(|c| pair_term(d.x_ct(c, s), d.x_ct(c, t), d.shares(c, s), d.shares(c, t), d.dx))
                .collect();
            let mut terms = PairTerms::new((s, t));
            for (c, g) in gs.iter().enumerate() {
                terms.push(c, g);
            }
            pairs.push(terms);
        }
    }
    TermSet::new(d.dx, pairs)
}

pub fn estimate_beta_aggregate(d: &AggregateDataset, opts: &OptimizerOptions) -> Result<EstimateResult> {
    let terms = build_terms_aggregate(d)?;
    estimate_beta(&terms, opts)
}

pub fn read_aggregate_csv(path: impl AsRef<Path>) -> Result<AggregateDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_aggregate(file, path)
}

fn read_aggregate<R: std::io::Read>(input: R, path: &Path) -> Result<AggregateDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (m_col, p_col, k_col, s_col) = match (col("market"), col("period"), col("choice"), col("share")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(Error::parse(path, 1, "header must contain market, period, choice and share columns")),
    };
    let n_col = col("n");
    let mut xcols: Vec<(usize, usize)> = Vec::new();
    for (pos, name) in header.iter().enumerate() {
        if let Some(rest) = name.strip_prefix("x_") {
            match rest.parse::<usize>() {
                Ok(j) if j >= 1 => xcols.push((j, pos)),
                _ => return Err(Error::parse(path, 1, format!("malformed covariate column '{name}'"))),
            }
        }
    }
    xcols.sort_unstable();
    let dx = xcols.len();
    if dx == 0 || xcols.iter().enumerate().any(|(i, &(j, _))| j != i + 1) {
        return Err(Error::parse(path, 1, "covariate columns must be x_1 .. x_dx"));
    }

    struct Cell {
        x: Vec<f64>,
        share: f64,
        n: Option<u64>,
        line: usize,
    }
    // market -> period -> choice -> cell
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<BTreeMap<usize, BTreeMap<usize, Cell>>> = Vec::new();
    let (mut periods, mut options) = (0usize, 0usize);

    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::parse(path, line, "row has too few fields"));
        let market = field(m_col)?.to_string();
        let period: usize = field(p_col)?.parse().map_err(|_| Error::parse(path, line, "period must be a positive integer"))?;
        if period == 0 {
            return Err(Error::parse(path, line, "periods are numbered from 1"));
        }
        let choice: usize = field(k_col)?.parse().map_err(|_| Error::parse(path, line, "choice must be a nonnegative integer"))?;
        let share: f64 = field(s_col)?.parse().map_err(|_| Error::parse(path, line, "cannot parse share"))?;
        if !share.is_finite() || !(0.0..=1.0).contains(&share) {
            return Err(Error::parse(path, line, format!("market {market} period {period}: share {share} outside [0, 1]")));
        }
        let mut x = Vec::with_capacity(dx);
        if choice > 0 {
            for &(_, c) in &xcols {
                let raw = field(c)?;
                x.push(raw.parse::<f64>().map_err(|_| Error::parse(path, line, format!("cannot parse covariate '{raw}'")))?);
            }
        }
        let n = match n_col {
            Some(c) => {
                Some(field(c)?.parse::<u64>().map_err(|_| Error::parse(path, line, "consumer count must be a nonnegative integer"))?)
            }
            None => None,
        };
        let slot = *index.entry(market.clone()).or_insert_with(|| {
            order.push(market.clone());
            cells.push(BTreeMap::new());
            cells.len() - 1
        });
        if cells[slot].entry(period).or_default().insert(choice, Cell { x, share, n, line }).is_some() {
            return Err(Error::parse(path, line, format!("duplicate row for market {market} period {period} choice {choice}")));
        }
        periods = periods.max(period);
        options = options.max(choice);
    }
    if order.is_empty() {
        return Err(Error::parse(path, 1, "no data rows"));
    }
    if options == 0 {
        return Err(Error::parse(path, 1, "no inside-option rows"));
    }

    let mut x = Vec::with_capacity(order.len() * periods * options * dx);
    let mut s = Vec::with_capacity(order.len() * periods * options);
    let mut counts = n_col.map(|_| Vec::with_capacity(order.len() * periods));
    for (slot, market) in order.iter().enumerate() {
        let last_line = cells[slot].values().flat_map(|p| p.values()).map(|c| c.line).max().unwrap_or(1);
        for t in 1..=periods {
            let period = cells[slot]
                .get(&t)
                .ok_or_else(|| Error::parse(path, last_line, format!("ragged markets: market {market} has no rows for period {t}")))?;
            let mut inside = 0.0;
            let mut line = 1;
            for k in 1..=options {
                let cell = period.get(&k).ok_or_else(|| {
                    Error::parse(path, last_line, format!("ragged markets: market {market} period {t} has no row for choice {k}"))
                })?;
                x.extend_from_slice(&cell.x);
                s.push(cell.share);
                inside += cell.share;
                line = line.max(cell.line);
            }
            if inside > 1.0 + SHARE_SUM_TOL {
                return Err(Error::parse(path, line, format!("market {market} period {t}: inside shares sum to {inside}")));
            }
            if let Some(outside) = period.get(&0) {
                if (outside.share - (1.0 - inside)).abs() > OUTSIDE_SHARE_TOL {
                    return Err(Error::parse(
                        path,
                        outside.line,
                        format!("market {market} period {t}: outside share {} does not equal 1 - {inside}", outside.share),
                    ));
                }
            }
            if let Some(counts) = counts.as_mut() {
                let ns: Vec<Option<u64>> = period.values().map(|c| c.n).collect();
                let first = ns[0];
                if ns.iter().any(|v| *v != first) {
                    return Err(Error::parse(path, line, format!("market {market} period {t}: consumer count differs across rows")));
                }
                counts.push(first.unwrap_or(0));
            }
        }
    }
    AggregateDataset::new(order, periods, options, dx, x, s, counts)
}
