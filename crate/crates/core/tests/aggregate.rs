use std::io::Write;

use cmchoice::aggregate::{build_terms_aggregate, estimate_beta_aggregate, read_aggregate_csv};
use cmchoice::moments::{pair_term, PairTerms, TermSet};
use cmchoice::simulate::{simulate_aggregate, AggregateDgpConfig};
use cmchoice::util::angle_degrees;
use cmchoice::OptimizerOptions;

const TRUTH: [f64; 3] = [1.0, 0.5, 0.0];

fn angle(markets: usize, consumers: Option<usize>, seed: u64) -> f64 {
    let mut cfg = AggregateDgpConfig::new(markets, seed);
    cfg.consumers = consumers;
    let d = simulate_aggregate(&cfg).unwrap();
    let r = estimate_beta_aggregate(&d, &OptimizerOptions::default()).unwrap();
    angle_degrees(&r.beta_hat, &TRUTH)
}

#[test]
fn shares_stand_in_for_estimated_ccps() {
    let mut cfg = AggregateDgpConfig::new(50, 3);
    cfg.periods = 3;
    let d = simulate_aggregate(&cfg).unwrap();
    let mut pairs = Vec::new();
    for s in 0..3 {
        for t in s + 1..3 {
            let mut p = PairTerms::new((s, t));
            for c in 0..d.markets() {
                p.push(c, &pair_term(d.x_ct(c, s), d.x_ct(c, t), d.shares(c, s), d.shares(c, t), 3));
            }
            pairs.push(p);
        }
    }
    assert_eq!(build_terms_aggregate(&d).unwrap(), TermSet::new(3, pairs).unwrap());
}

#[test]
fn exact_shares_recover_direction() {
    let a = angle(2000, None, 1);
    assert!(a < 5.0, "angle {a}");
}

#[test]
fn sampled_consumers_degrade_gracefully() {
    let a = angle(2000, Some(200), 1);
    assert!(a < 15.0, "angle {a}");
}

#[test]
fn error_shrinks_with_markets() {
    let median = |markets| {
        let mut v: Vec<f64> = (0..5).map(|s| angle(markets, Some(200), 30 + s)).collect();
        v.sort_by(f64::total_cmp);
        v[2]
    };
    let (small, large) = (median(500), median(4000));
    assert!(large <= small, "C=4000 median {large} > C=500 median {small}");
}

#[test]
fn price_deal_file_with_interaction() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(
        f,
        "market,period,choice,share,x_1,x_2,n
s1,1,0,0.5,,,400
s1,1,1,0.3,0.89,0,400
s1,1,2,0.2,1.10,1,400
s1,2,1,0.35,0.79,1,380
s1,2,2,0.15,1.10,0,380
s2,1,1,0.25,0.95,0,250
s2,1,2,0.25,0.99,0,250
s2,2,1,0.2,0.95,1,260
s2,2,2,0.3,0.89,1,260
"
    )
    .unwrap();
    f.flush().unwrap();
    let d = read_aggregate_csv(f.path()).unwrap().with_interaction(0, 1).unwrap();
    assert_eq!((d.markets(), d.periods(), d.options(), d.dx()), (2, 2, 2, 3));
    assert_eq!(d.x_ct(0, 1), &[0.79, 1.0, 0.79, 1.10, 0.0, 0.0]);
    assert_eq!(d.min_consumers(), Some(250));
    assert!(d.validate().warnings().any(|w| w.message.contains("250")));
    assert_eq!(build_terms_aggregate(&d).unwrap().total_terms(), 2);
}
