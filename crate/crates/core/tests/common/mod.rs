#![allow(dead_code)]

use cmchoice::choice::logit_unchecked;
use cmchoice::PanelDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-period logit panel without fixed effects: `x ~ U[0, 1]`, utilities
/// `beta' x` per option. Returns the dataset and the true CCPs `[i][t][k]`.
pub fn logit_panel(n: usize, options: usize, beta: &[f64], seed: u64) -> (PanelDataset, Vec<f64>) {
    let dx = beta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..n {
        for _ in 0..2 {
            let xt: Vec<f64> = (0..options * dx).map(|_| rng.random()).collect();
            let u: Vec<f64> = (0..options).map(|k| (0..dx).map(|j| beta[j] * xt[k * dx + j]).sum()).collect();
            let p = logit_unchecked(&u);
            let r: f64 = rng.random();
            let mut acc = 0.0;
            let mut choice = 0;
            for (k, pk) in p.iter().enumerate() {
                acc += pk;
                if r < acc {
                    choice = k + 1;
                    break;
                }
            }
            x.extend(xt);
            y.push(choice);
            truth.extend(p);
        }
    }
    (PanelDataset::from_arrays(2, options, dx, x, y, None).unwrap(), truth)
}
