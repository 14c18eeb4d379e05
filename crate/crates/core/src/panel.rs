//! Individual-level panel of multinomial choices.
//!
//! Covariates are stored only for the inside options 1..=K; the outside
//! option's covariates are zero by normalization. Periods are indexed from
//! zero in memory and from one in files.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PanelDataset {
    ids: Vec<String>,
    periods: usize,
    options: usize,
    dx: usize,
    /// Flattened `[i][t][k][j]`.
    x: Vec<f64>,
    /// Flattened `[i][t]`; 0 is the outside option.
    y: Vec<usize>,
    /// Flattened `[i][t]` discrete control labels.
    z: Option<Vec<i64>>,
}

impl PanelDataset {
    /// Builds a dataset from flat arrays. Only shapes are checked here; content
    /// problems (labels out of range, non-finite covariates) are reported by
    /// [`PanelDataset::validate`].
    pub fn new(
        ids: Vec<String>,
        periods: usize,
        options: usize,
        dx: usize,
        x: Vec<f64>,
        y: Vec<usize>,
        z: Option<Vec<i64>>,
    ) -> Result<Self> {
        let n = ids.len();
        if options == 0 || dx == 0 || periods == 0 {
            return Err(Error::invalid("periods, options and covariate dimension must be positive"));
        }
        let expect_x = n * periods * options * dx;
        if x.len() != expect_x {
            return Err(Error::DimensionMismatch { what: "covariate array", expected: expect_x, got: x.len() });
        }
        if y.len() != n * periods {
            return Err(Error::DimensionMismatch { what: "choice array", expected: n * periods, got: y.len() });
        }
        if let Some(z) = &z {
            if z.len() != n * periods {
                return Err(Error::DimensionMismatch { what: "control array", expected: n * periods, got: z.len() });
            }
        }
        Ok(Self { ids, periods, options, dx, x, y, z })
    }

    /// Dataset with ids `"1".."n"`.
    pub fn from_arrays(periods: usize, options: usize, dx: usize, x: Vec<f64>, y: Vec<usize>, z: Option<Vec<i64>>) -> Result<Self> {
        let n = y.len() / periods.max(1);
        let ids = (1..=n).map(|i| i.to_string()).collect();
        Self::new(ids, periods, options, dx, x, y, z)
    }

    pub fn n(&self) -> usize {
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

    pub fn has_controls(&self) -> bool {
        self.z.is_some()
    }

    /// Covariates of individual `i` in period `t`, laid out option-major
    /// (`k * dx + j`).
    pub fn x_it(&self, i: usize, t: usize) -> &[f64] {
        let w = self.options * self.dx;
        let start = (i * self.periods + t) * w;
        &self.x[start..start + w]
    }

    pub fn x(&self, i: usize, t: usize, k: usize, j: usize) -> f64 {
        self.x_it(i, t)[k * self.dx + j]
    }

    pub fn choice(&self, i: usize, t: usize) -> usize {
        self.y[i * self.periods + t]
    }

    pub fn control(&self, i: usize, t: usize) -> Option<i64> {
        self.z.as_ref().map(|z| z[i * self.periods + t])
    }

    /// One-hot indicator of the inside options for `(i, t)`; all zeros when
    /// the outside option was chosen.
    pub fn one_hot(&self, i: usize, t: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.options];
        let c = self.choice(i, t);
        if (1..=self.options).contains(&c) {
            v[c - 1] = 1.0;
        }
        v
    }

    /// Sub-panel with the given individuals, in the given order.
    pub fn select(&self, rows: &[usize]) -> PanelDataset {
        let w = self.periods * self.options * self.dx;
        let mut x = Vec::with_capacity(rows.len() * w);
        let mut y = Vec::with_capacity(rows.len() * self.periods);
        let mut z = self.z.as_ref().map(|_| Vec::with_capacity(rows.len() * self.periods));
        let mut ids = Vec::with_capacity(rows.len());
        for &i in rows {
            ids.push(self.ids[i].clone());
            x.extend_from_slice(&self.x[i * w..(i + 1) * w]);
            y.extend_from_slice(&self.y[i * self.periods..(i + 1) * self.periods]);
            if let (Some(dst), Some(src)) = (z.as_mut(), self.z.as_ref()) {
                dst.extend_from_slice(&src[i * self.periods..(i + 1) * self.periods]);
            }
        }
        PanelDataset { ids, periods: self.periods, options: self.options, dx: self.dx, x, y, z }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        if self.periods < 2 {
            issues.push(Issue::error("dataset", format!("need at least two periods, found {}", self.periods)));
        }
        for i in 0..self.n() {
            for t in 0..self.periods {
                let c = self.choice(i, t);
                if c > self.options {
                    issues.push(Issue::error(
                        format!("id {} period {}", self.ids[i], t + 1),
                        format!("choice label {c} outside 0..={}", self.options),
                    ));
                }
                for k in 0..self.options {
                    for j in 0..self.dx {
                        let v = self.x(i, t, k, j);
                        if !v.is_finite() {
                            issues.push(Issue::error(
                                format!("id {} period {} column x_{}_{}", self.ids[i], t + 1, k + 1, j + 1),
                                format!("non-finite covariate {v}"),
                            ));
                        }
                    }
                }
            }
        }
        if self.n() > 0 {
            for k in 0..self.options {
                for j in 0..self.dx {
                    let first = self.x(0, 0, k, j);
                    let constant = (0..self.n()).all(|i| (0..self.periods).all(|t| self.x(i, t, k, j) == first));
                    if constant {
                        issues.push(Issue::warning(
                            format!("column x_{}_{}", k + 1, j + 1),
                            "time-invariant covariate not identified (absorbed by the fixed effect)",
                        ));
                    }
                }
            }
        }
        ValidationReport::from_issues(issues)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        read_panel(file, path)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "period".into(), "choice".into()];
        for k in 0..self.options {
            for j in 0..self.dx {
                header.push(format!("x_{}_{}", k + 1, j + 1));
            }
        }
        if self.z.is_some() {
            header.push("z".into());
        }
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            for t in 0..self.periods {
                record.clear();
                record.push(self.ids[i].clone());
                record.push((t + 1).to_string());
                record.push(self.choice(i, t).to_string());
                record.extend(self.x_it(i, t).iter().map(|v| format!("{v:?}")));
                if let Some(z) = self.control(i, t) {
                    record.push(z.to_string());
                }
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn read_panel<R: std::io::Read>(input: R, path: &Path) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (id_col, period_col, choice_col) = match (col("id"), col("period"), col("choice")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(path, 1, "header must contain id, period and choice columns")),
    };
    let z_col = col("z");

    // x_k_j columns, 1-based in the file
    let mut xcols: Vec<(usize, usize, usize)> = Vec::new();
    for (pos, name) in header.iter().enumerate() {
        if let Some(rest) = name.strip_prefix("x_") {
            let parts: Vec<&str> = rest.split('_').collect();
            let parsed = match parts.as_slice() {
                [k, j] => k.parse::<usize>().ok().zip(j.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some((k, j)) if k >= 1 && j >= 1 => xcols.push((k, j, pos)),
                _ => return Err(Error::parse(path, 1, format!("malformed covariate column '{name}'"))),
            }
        }
    }
    let options = xcols.iter().map(|c| c.0).max().unwrap_or(0);
    let dx = xcols.iter().map(|c| c.1).max().unwrap_or(0);
    if options == 0 || xcols.len() != options * dx {
        return Err(Error::parse(path, 1, "covariate columns must be x_k_j for every option k and covariate j"));
    }
    let mut col_of = vec![usize::MAX; options * dx];
    for &(k, j, pos) in &xcols {
        let slot = (k - 1) * dx + (j - 1);
        if col_of[slot] != usize::MAX {
            return Err(Error::parse(path, 1, format!("duplicate covariate column x_{k}_{j}")));
        }
        col_of[slot] = pos;
    }

    struct Row {
        x: Vec<f64>,
        y: usize,
        z: Option<i64>,
        line: usize,
    }
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<HashMap<usize, Row>> = Vec::new();
    let mut max_period = 0usize;

    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::parse(path, line, "row has too few fields"));
        let id = field(id_col)?.to_string();
        let period: usize = field(period_col)?.parse().map_err(|_| Error::parse(path, line, "period must be a positive integer"))?;
        if period == 0 {
            return Err(Error::parse(path, line, "periods are numbered from 1"));
        }
        let y: usize = field(choice_col)?.parse().map_err(|_| Error::parse(path, line, "choice must be a nonnegative integer"))?;
        let mut x = Vec::with_capacity(options * dx);
        for &c in &col_of {
            let raw = field(c)?;
            let v: f64 = raw.parse().map_err(|_| Error::parse(path, line, format!("cannot parse covariate '{raw}'")))?;
            x.push(v);
        }
        let z = match z_col {
            Some(c) => Some(field(c)?.parse::<i64>().map_err(|_| Error::parse(path, line, "control z must be an integer label"))?),
            None => None,
        };
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            rows.push(HashMap::new());
            rows.len() - 1
        });
        if rows[slot].insert(period, Row { x, y, z, line }).is_some() {
            return Err(Error::parse(path, line, format!("duplicate row for id {id} period {period}")));
        }
        max_period = max_period.max(period);
    }
    if order.is_empty() {
        return Err(Error::parse(path, 1, "no data rows"));
    }

    let periods = max_period;
    let mut x = Vec::with_capacity(order.len() * periods * options * dx);
    let mut y = Vec::with_capacity(order.len() * periods);
    let mut z = z_col.map(|_| Vec::with_capacity(order.len() * periods));
    for (slot, id) in order.iter().enumerate() {
        for t in 1..=periods {
            let row = rows[slot].get(&t).ok_or_else(|| {
                let last = rows[slot].values().map(|r| r.line).max().unwrap_or(1);
                Error::parse(path, last, format!("ragged panel: id {id} has no row for period {t}"))
            })?;
            x.extend_from_slice(&row.x);
            y.push(row.y);
            if let (Some(z), Some(v)) = (z.as_mut(), row.z) {
                z.push(v);
            }
        }
    }
    PanelDataset::new(order, periods, options, dx, x, y, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Issue {
    pub(crate) fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, location: location.into(), message: message.into() }
    }

    pub(crate) fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, location: location.into(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub(crate) fn from_issues(issues: Vec<Issue>) -> Self {
        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        Self { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "validation: {}", if self.ok { "ok" } else { "failed" })?;
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "  {tag}: {}: {}", issue.location, issue.message)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> PanelDataset {
        // n = 2, T = 2, K = 2, dx = 1
        let x = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let y = vec![0, 1, 2, 1];
        PanelDataset::from_arrays(2, 2, 1, x, y, None).unwrap()
    }

    #[test]
    fn accessors_follow_layout() {
        let d = toy();
        assert_eq!(d.n(), 2);
        assert_eq!(d.x_it(1, 0), &[0.5, 0.6]);
        assert_eq!(d.x(0, 1, 1, 0), 0.4);
        assert_eq!(d.one_hot(0, 0), vec![0.0, 0.0]);
        assert_eq!(d.one_hot(1, 0), vec![0.0, 1.0]);
    }

    #[test]
    fn well_formed_dataset_validates() {
        let r = toy().validate();
        assert!(r.ok, "{r}");
        assert!(r.issues.is_empty());
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let x = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let d = PanelDataset::from_arrays(2, 2, 1, x, vec![0, 3, 2, 1], None).unwrap();
        let r = d.validate();
        assert!(!r.ok);
        let e: Vec<_> = r.errors().collect();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].location, "id 1 period 2");
    }

    #[test]
    fn non_finite_and_short_panels_are_reported() {
        let x = vec![f64::NAN, 0.2, 0.3, 0.4];
        let d = PanelDataset::from_arrays(1, 2, 1, x, vec![0, 1], None).unwrap();
        let r = d.validate();
        assert!(!r.ok);
        assert!(r.errors().any(|i| i.message.contains("two periods")));
        assert!(r.errors().any(|i| i.message.contains("non-finite")));
    }

    #[test]
    fn constant_column_warns() {
        let x = vec![1.0, 0.2, 1.0, 0.4, 1.0, 0.6, 1.0, 0.8];
        let d = PanelDataset::from_arrays(2, 2, 1, x, vec![0, 1, 2, 1], None).unwrap();
        let r = d.validate();
        assert!(r.ok);
        let w: Vec<_> = r.warnings().collect();
        assert_eq!(w.len(), 1);
        assert!(w[0].message.contains("time-invariant covariate not identified"));
        assert_eq!(w[0].location, "column x_1_1");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(PanelDataset::from_arrays(2, 2, 1, vec![0.0; 7], vec![0; 4], None).is_err());
    }
}
