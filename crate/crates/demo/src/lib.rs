//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: an identified-set raster for the support-points design,
//! the aggregate objective traced around the unit circle together with the
//! estimate, and logit probabilities next to the numerical gradient of the
//! surplus function.

use cmchoice::aggregate::{build_terms_aggregate, estimate_beta_aggregate};
use cmchoice::choice::{logit_unchecked, numeric_gradient, social_surplus_gumbel, DEFAULT_GRADIENT_STEP};
use cmchoice::identset::{scan_support_sequence, GridSpec};
use cmchoice::simulate::{simulate_aggregate, AggregateDgpConfig};
use cmchoice::{q_n, OptimizerOptions};
use wasm_bindgen::prelude::*;

fn js_err(e: cmchoice::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Membership raster of the `(b_2, b_3)` plane with `b_1 = 1`.
#[wasm_bindgen]
pub struct IdSetView {
    steps: usize,
    member: Vec<u8>,
    area: f64,
    inequalities: usize,
}

#[wasm_bindgen]
impl IdSetView {
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Row-major cells, row 0 at the smallest `b_3`; 1 marks a member.
    #[wasm_bindgen(getter)]
    pub fn member(&self) -> Vec<u8> {
        self.member.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn area(&self) -> f64 {
        self.area
    }

    #[wasm_bindgen(getter)]
    pub fn inequalities(&self) -> usize {
        self.inequalities
    }
}

/// Identified set when every covariate takes `s` support points, pooling
/// samples of all smaller supports as the command-line scan does.
#[wasm_bindgen]
pub fn identified_set(s: usize, budget: usize, seed: u64, min: f64, max: f64, steps: usize) -> Result<IdSetView, JsError> {
    if !(2..=6).contains(&s) {
        return Err(JsError::new("support size must be between 2 and 6"));
    }
    let spec = GridSpec::square(min, max, steps);
    let levels: Vec<usize> = (2..=s).collect();
    let scans = scan_support_sequence(&levels, budget, seed, &spec).map_err(js_err)?;
    let last = scans.last().expect("at least one level");
    Ok(IdSetView {
        steps,
        member: last.grid.member.iter().map(|&m| u8::from(m)).collect(),
        area: last.grid.area,
        inequalities: last.sample.len(),
    })
}

/// Aggregate objective on `points` directions around the circle, with the
/// estimated and true angles (radians).
#[wasm_bindgen]
pub struct ObjectiveView {
    values: Vec<f64>,
    estimate: f64,
    truth: f64,
}

#[wasm_bindgen]
impl ObjectiveView {
    /// `Q_n(cos a, sin a)` for `a = 2 pi i / points`.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> f64 {
        self.truth
    }
}

/// Simulates two-covariate market shares with `beta = (1, slope)` and
/// estimates the direction. `consumers = 0` means exact shares.
#[wasm_bindgen]
pub fn aggregate_objective(markets: usize, consumers: usize, slope: f64, seed: u64, points: usize) -> Result<ObjectiveView, JsError> {
    if points < 8 {
        return Err(JsError::new("need at least 8 directions"));
    }
    let cfg = AggregateDgpConfig {
        beta: vec![1.0, slope],
        consumers: (consumers > 0).then_some(consumers),
        ..AggregateDgpConfig::new(markets, seed)
    };
    let d = simulate_aggregate(&cfg).map_err(js_err)?;
    let terms = build_terms_aggregate(&d).map_err(js_err)?;
    let values = (0..points)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / points as f64;
            q_n(&[a.cos(), a.sin()], &terms)
        })
        .collect::<cmchoice::Result<Vec<f64>>>()
        .map_err(js_err)?;
    let est = estimate_beta_aggregate(&d, &OptimizerOptions { seed, ..Default::default() }).map_err(js_err)?;
    Ok(ObjectiveView { values, estimate: est.beta_hat[1].atan2(est.beta_hat[0]), truth: slope.atan2(1.0) })
}

/// For `u_1` on `points` values in `[lo, hi]` with `u_2` fixed, returns
/// rows `[u_1, p_1, p_2, G, dG/du_1]` flattened.
#[wasm_bindgen]
pub fn logit_curve(u2: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    if points < 2 || lo.is_nan() || hi.is_nan() || hi <= lo || !u2.is_finite() {
        return Err(JsError::new("need points >= 2, lo < hi and a finite u2"));
    }
    let mut out = Vec::with_capacity(points * 5);
    for i in 0..points {
        let u1 = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let u = [u1, u2];
        let p = logit_unchecked(&u);
        let g = social_surplus_gumbel(&u).map_err(js_err)?;
        let grad = numeric_gradient(|v| social_surplus_gumbel(v).unwrap_or(f64::NAN), &u, DEFAULT_GRADIENT_STEP).map_err(js_err)?;
        out.extend([u1, p[0], p[1], g, grad[0]]);
    }
    Ok(out)
}
