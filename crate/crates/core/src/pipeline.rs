//! End-to-end panel estimation: first stage, moment terms, optimizer.

use crate::error::Result;
use crate::knn::{fit_all_pairs, CvReport, KChoice};
use crate::moments::{build_terms, build_terms_matched, fit_matched_cells, TermSet, DEFAULT_MIN_CELL};
use crate::optimizer::{estimate_beta, EstimateResult, OptimizerOptions};
use crate::panel::PanelDataset;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimatorOptions {
    pub k: KChoice,
    pub optimizer: OptimizerOptions,
    /// Smallest control cell fitted when matching on controls.
    pub min_cell: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PanelEstimate {
    pub result: EstimateResult,
    pub terms: TermSet,
    pub cv: Vec<CvReport>,
    pub warnings: Vec<String>,
}

pub fn estimate_panel(d: &PanelDataset, opts: &EstimatorOptions) -> Result<PanelEstimate> {
    let (fits, cv) = fit_all_pairs(d, &opts.k)?;
    let terms = build_terms(d, &fits)?;
    let result = estimate_beta(&terms, &opts.optimizer)?;
    Ok(PanelEstimate { result, terms, cv, warnings: Vec::new() })
}

/// Like [`estimate_panel`] but only uses individuals whose control label is
/// constant across each pair, with first stages fitted per control cell.
pub fn estimate_panel_matched(d: &PanelDataset, opts: &EstimatorOptions) -> Result<PanelEstimate> {
    let fits = fit_matched_cells(d, &opts.k, opts.min_cell.unwrap_or(DEFAULT_MIN_CELL))?;
    let terms = build_terms_matched(d, &fits)?;
    let result = estimate_beta(&terms, &opts.optimizer)?;
    Ok(PanelEstimate { result, terms, cv: Vec::new(), warnings: fits.warnings })
}
