use cmchoice::simulate::{simulate_panel, simulate_panel_detailed, McDgpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const N: usize = 100_000;

fn ks_uniform(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs())).fold(0.0, f64::max)
}

#[test]
fn covariates_are_uniform() {
    let d = simulate_panel(&McDgpConfig::new(N, 41)).unwrap();
    for t in 0..2 {
        for k in 0..2 {
            for j in 0..3 {
                let col: Vec<f64> = (0..N).map(|i| d.x(i, t, k, j)).collect();
                let ks = ks_uniform(col);
                assert!(ks < 0.01, "column ({t},{k},{j}) KS {ks}");
            }
        }
    }
}

#[test]
fn symmetric_utilities_give_equal_shares() {
    let mut cfg = McDgpConfig::new(N, 42);
    cfg.beta = vec![0.0; 3];
    cfg.fixed_effects = false;
    cfg.heteroskedastic = false;
    cfg.corr = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let d = simulate_panel(&cfg).unwrap();
    let mut counts = [0usize; 3];
    for i in 0..N {
        counts[d.choice(i, 0)] += 1;
    }
    for c in counts {
        let share = c as f64 / N as f64;
        assert!((share - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
    }
}

/// Re-draws effects and shocks for fixed covariates with an unrelated RNG
/// and returns the simulated period-1 choice frequencies.
fn resimulated_ccp(x: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let beta = [1.0, 0.5, 0.0];
    let rho: f64 = 0.5;
    let mut freq = [0.0; 3];
    for _ in 0..draws {
        let a: Vec<f64> = (0..2).map(|k| (rng.random::<f64>() + x[3 * k] + x[3 * k + 1] + x[3 * k + 2]) / 4.0).collect();
        let z: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let u = [z[0], z[1], rho * z[1] + (1.0 - rho * rho).sqrt() * z[2]];
        let mut best = (0, 0.0);
        for k in 0..2 {
            let v = (0..3).map(|j| beta[j] * x[3 * k + j]).sum::<f64>() + a[k] + a[k] * (u[k + 1] - u[0]);
            if v > best.1 {
                best = (k + 1, v);
            }
        }
        freq[best.0] += 1.0;
    }
    freq.map(|f| f / draws as f64)
}

#[test]
fn binned_frequencies_match_resimulation() {
    let d = simulate_panel(&McDgpConfig::new(N, 43)).unwrap();
    let in_bin: Vec<usize> = (0..N).filter(|&i| (0.40..0.45).contains(&d.x(i, 0, 0, 0))).collect();
    assert!(in_bin.len() > 4000);
    let mut empirical = [0.0; 3];
    let mut oracle = [0.0; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(0xdead_beef);
    for &i in &in_bin {
        empirical[d.choice(i, 0)] += 1.0;
        let p = resimulated_ccp(d.x_it(i, 0), 20, &mut rng);
        for k in 0..3 {
            oracle[k] += p[k];
        }
    }
    for k in 0..3 {
        let (e, o) = (empirical[k] / in_bin.len() as f64, oracle[k] / in_bin.len() as f64);
        assert!((e - o).abs() < 0.02, "option {k}: empirical {e}, oracle {o}");
    }
}

#[test]
fn shock_variance_rises_with_the_effect() {
    let (_, lat) = simulate_panel_detailed(&McDgpConfig::new(N, 44)).unwrap();
    let mut pairs: Vec<(f64, f64)> = (0..N).map(|i| (lat.effects[i * 2], lat.shocks[i * 4])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let variances: Vec<f64> = pairs
        .chunks(N / 10)
        .map(|c| {
            let m = c.iter().map(|p| p.1).sum::<f64>() / c.len() as f64;
            c.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>() / (c.len() - 1) as f64
        })
        .collect();
    for w in variances.windows(2) {
        assert!(w[1] > w[0], "{variances:?}");
    }
}
