use cmchoice::identset::{sample_g_set, scan_identified_set, scan_support_sequence, DiscreteDgp, GridSpec};
use cmchoice::simulate::simulate_discrete_choices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pair_ccp_matches_agent_simulation() {
    let dgp = DiscreteDgp::support_points_design(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x1 = dgp.draw_covariates(&mut rng);
    let x2 = dgp.draw_covariates(&mut rng);
    let freq = simulate_discrete_choices(&dgp, &[&x1, &x2], 1_000_000, 99).unwrap();
    for (period, sim) in freq.iter().enumerate() {
        let p = dgp.true_pair_ccp(&x1, &x2, period).unwrap();
        for k in 0..p.len() {
            assert!((p[k] - sim[k]).abs() < 3e-3, "period {period} option {k}: {} vs {}", p[k], sim[k]);
        }
    }
}

#[test]
fn nested_scans_shrink_and_keep_truth() {
    let spec = GridSpec::square(0.5, 1.9, 40);
    let scans = scan_support_sequence(&[2, 3], 3000, 4, &spec).unwrap();
    assert!(scans[1].grid.is_subset_of(&scans[0].grid));
    for s in &scans {
        assert!(s.grid.contains_point(1.0, 1.0));
    }
    assert!(scans[1].grid.area < scans[0].grid.area);
}

#[test]
fn larger_budget_never_grows_the_set() {
    let dgp = DiscreteDgp::support_points_design(3).unwrap();
    let spec = GridSpec::square(0.5, 1.9, 30);
    let small = scan_identified_set(&sample_g_set(&dgp, 500, 6, 2).unwrap(), &spec).unwrap();
    let large = scan_identified_set(&sample_g_set(&dgp, 4000, 6, 2).unwrap(), &spec).unwrap();
    assert!(large.is_subset_of(&small));
}
