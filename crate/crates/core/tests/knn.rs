mod common;

use cmchoice::knn::{default_k_grid, fit_ccp, loo_cv_select_k};
use cmchoice::PanelDataset;
use common::logit_panel;

/// Leave-one-out loss recomputed with an explicit double loop.
fn brute_force_cv(d: &PanelDataset, k_grid: &[usize]) -> Vec<f64> {
    let n = d.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| [d.x_it(i, 0), d.x_it(i, 1)].concat()).collect();
    let w = rows[0].len();
    let mut cols = Vec::new();
    for c in 0..w {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        let sd = (rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        if sd >= 1e-12 {
            cols.push((c, mean, sd));
        }
    }
    let z: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&(c, m, s)| (r[c] - m) / s).collect()).collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|i| [d.one_hot(i, 0), d.one_hot(i, 1)].concat()).collect();
    k_grid
        .iter()
        .map(|&k| {
            let mut loss = 0.0;
            for i in 0..n {
                let mut others: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j)).collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (c, target) in targets[i].iter().enumerate() {
                    let pred = others[..k].iter().map(|&(_, j)| targets[j][c]).sum::<f64>() / k as f64;
                    loss += (pred - target).powi(2);
                }
            }
            loss
        })
        .collect()
}

#[test]
fn cv_loss_matches_double_loop() {
    let (d, _) = logit_panel(500, 2, &[1.0, -0.5], 11);
    let grid = default_k_grid(d.n());
    let report = loo_cv_select_k(&d, 0, 1, &grid).unwrap();
    let oracle = brute_force_cv(&d, &grid);
    for (a, b) in report.cv_loss.iter().zip(&oracle) {
        assert!(a.is_finite());
        assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
    }
    let best = grid[oracle.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0))).unwrap().0];
    assert_eq!(report.k_star, best);
}

#[test]
fn cv_rejects_k_equal_n() {
    let (d, _) = logit_panel(40, 1, &[1.0], 2);
    assert!(loo_cv_select_k(&d, 0, 1, &[40]).is_err());
    assert!(loo_cv_select_k(&d, 0, 1, &[39]).is_ok());
}

#[test]
fn constant_targets_give_smallest_k() {
    let (d, _) = logit_panel(60, 2, &[1.0], 5);
    let x: Vec<f64> = (0..d.n()).flat_map(|i| [d.x_it(i, 0), d.x_it(i, 1)].concat()).collect();
    let same = PanelDataset::from_arrays(2, 2, 1, x, vec![1; 120], None).unwrap();
    let report = loo_cv_select_k(&same, 0, 1, &[9, 3, 7]).unwrap();
    assert!(report.cv_loss.iter().all(|v| *v == 0.0));
    assert_eq!(report.k_star, 3);
}

#[test]
fn predictions_are_probabilities() {
    let (d, _) = logit_panel(300, 3, &[1.0, 0.5], 9);
    let fit = fit_ccp(&d, 0, 1, 17).unwrap();
    for i in 0..d.n() {
        let (ps, pt) = fit.predict_row(i);
        for p in [&ps, &pt] {
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn predictions_are_permutation_invariant() {
    let (d, _) = logit_panel(200, 2, &[1.0, 0.5], 21);
    let perm: Vec<usize> = (0..d.n()).rev().collect();
    let shuffled = d.select(&perm);
    let a = fit_ccp(&d, 0, 1, 12).unwrap();
    let b = fit_ccp(&shuffled, 0, 1, 12).unwrap();
    for (pos, &i) in perm.iter().enumerate() {
        let (x_s, x_t) = (d.x_it(i, 0), d.x_it(i, 1));
        let (pa_s, pa_t) = a.predict(x_s, x_t, None).unwrap();
        let (pb_s, pb_t) = b.predict(x_s, x_t, None).unwrap();
        assert_eq!(pa_s, pb_s, "row {i} at {pos}");
        assert_eq!(pa_t, pb_t);
    }
}

#[test]
fn error_against_true_ccp_falls_with_n() {
    fn mse(n: usize, seed: u64) -> f64 {
        let (d, truth) = logit_panel(n, 2, &[1.5, -1.0], seed);
        let report = loo_cv_select_k(&d, 0, 1, &default_k_grid(n)).unwrap();
        let fit = fit_ccp(&d, 0, 1, report.k_star).unwrap();
        let mut total = 0.0;
        for i in 0..n {
            let (ps, pt) = fit.predict_row(i);
            let p: Vec<f64> = ps.into_iter().chain(pt).collect();
            total += p.iter().zip(&truth[i * 4..i * 4 + 4]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        total / n as f64
    }
    for seed in 0..3 {
        let (small, large) = (mse(500, seed), mse(2000, 100 + seed));
        assert!(large < small, "seed {seed}: {large} >= {small}");
    }
}
