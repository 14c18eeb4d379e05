//! Semi-parametric estimation of panel multinomial choice models with
//! additive fixed effects.
//!
//! Choice probabilities are estimated nonparametrically per pair of periods,
//! differenced against covariates to form moment terms, and the index
//! direction is found by minimizing a convex hinge objective over the unit
//! sphere. The crate also scans identified sets for discrete designs,
//! simulates the Monte Carlo designs, and estimates from market shares.

pub mod aggregate;
pub mod check;
pub mod choice;
pub mod error;
pub mod identset;
pub mod knn;
pub mod kv;
pub mod moments;
pub mod optimizer;
pub mod panel;
pub mod pipeline;
pub mod simulate;
pub mod util;

pub use aggregate::{build_terms_aggregate, estimate_beta_aggregate, read_aggregate_csv, AggregateDataset};
pub use choice::{logit_ccp, social_surplus_gumbel, ChoiceProbs, Cycle};
pub use error::{Error, Result};
pub use identset::{scan_identified_set, DiscreteDgp, GridSpec, IdSetGrid};
pub use knn::{fit_ccp, CcpFit, KChoice};
pub use moments::{build_terms, q_n, TermSet};
pub use optimizer::{estimate_beta, EstimateResult, OptimizerOptions};
pub use panel::{PanelDataset, ValidationReport};
pub use pipeline::{estimate_panel, estimate_panel_matched, EstimatorOptions};
pub use simulate::{run_monte_carlo, simulate_panel, McDgpConfig, McTable};
