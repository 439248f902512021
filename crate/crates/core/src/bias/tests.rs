use super::*;
use crate::evaluator::Evaluator;
use crate::rng::rng_from_seed;
use crate::runner::random_search;
use proptest::prelude::{prop_assert_eq, proptest};
use rand::seq::SliceRandom;
use rand::Rng as _;

fn uniform(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Evaluates one fixed point for the whole budget.
fn fixed_point(p: f64) -> impl Fn(&mut dyn Objective, usize, u64) -> Result<RunOutcome> + Sync {
    move |obj, budget, _| {
        let x = vec![p; obj.dim()];
        let mut ev = Evaluator::new(obj, budget);
        while ev.evaluate(&x).is_some() {}
        Ok(ev.finish(0))
    }
}

#[test]
fn limiting_distribution_matches_critical_values() {
    // Upper 10%, 5% and 1% points of A² for a fully specified distribution.
    assert!((ad_inf(1.933) - 0.90).abs() < 1e-4);
    assert!((ad_inf(2.492) - 0.95).abs() < 1e-4);
    assert!((ad_inf(3.857) - 0.99).abs() < 2e-3);
    assert!(ad_cdf(100, 1e6) == 1.0);
}

#[test]
fn statistic_by_hand() {
    // n = 2, u = (0.25, 0.75): A² = -2 - (ln .25 + ln .25 + 3(ln .75 + ln .75)) / 2.
    let want = -2.0 - (2.0 * 0.25f64.ln() + 6.0 * 0.75f64.ln()) / 2.0;
    assert!((anderson_darling(&[0.75, 0.25]).unwrap().statistic - want).abs() < 1e-12);
    assert!(anderson_darling(&[0.5, 1.5]).is_err());
}

#[test]
fn uniform_fixture_is_not_rejected() {
    let u: Vec<f64> = uniform(2024, 100, 1).into_iter().map(|r| r[0]).collect();
    assert!(anderson_darling(&u).unwrap().p_value > 0.01);
}

#[test]
fn degenerate_samples_are_rejected() {
    assert!(anderson_darling(&[0.5; 100]).unwrap().p_value < 1e-6);
    let split: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
    assert!(anderson_darling(&split).unwrap().p_value < 1e-6);
}

#[test]
fn too_few_runs_rejected() {
    assert!(uniformity_test(&uniform(1, 29, 2)).is_err());
    assert!(collect_f0(2, 10, 100, 0, fixed_point(0.5)).is_err());
}

#[test]
fn false_positive_rate_is_controlled() {
    let none = (0..100).filter(|&s| {
        let p = uniform(1000 + s, 100, 5);
        classify(&p, &uniformity_test(&p).unwrap(), DEFAULT_ALPHA) == Verdict::None
    });
    assert!(none.count() >= 95);
}

#[test]
fn dummy_optimizers_are_classified() {
    let centre = collect_f0(5, 100, 50, 1, fixed_point(0.5)).unwrap();
    assert!(centre.iter().flatten().all(|&v| v == 0.5));
    assert_eq!(BiasReport::from_positions("c", &centre, DEFAULT_ALPHA).unwrap().verdict, Verdict::Centre);

    let edges: Vec<Vec<f64>> = (0..100).map(|i| vec![if i % 2 == 0 { 0.001 } else { 0.999 }; 5]).collect();
    assert_eq!(BiasReport::from_positions("b", &edges, DEFAULT_ALPHA).unwrap().verdict, Verdict::Bounds);

    let mut rng = rng_from_seed(8);
    let grid: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..5).map(|_| rng.random_range(1..=9) as f64 / 10.0 + rng.random_range(-1e-6..1e-6)).collect())
        .collect();
    assert_eq!(BiasReport::from_positions("g", &grid, DEFAULT_ALPHA).unwrap().verdict, Verdict::Discretization);

    let clusters: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..5).map(|_| if rng.random::<bool>() { rng.random_range(0.1..0.2) } else { rng.random_range(0.8..0.9) }).collect())
        .collect();
    assert_eq!(BiasReport::from_positions("k", &clusters, DEFAULT_ALPHA).unwrap().verdict, Verdict::GapsClusters);
}

#[test]
fn random_search_shows_no_bias() {
    let pos = collect_f0(5, 100, 1000, 77, |obj, b, s| Ok(random_search(obj, b, s))).unwrap();
    assert_eq!(pos, collect_f0(5, 100, 1000, 77, |obj, b, s| Ok(random_search(obj, b, s))).unwrap());
    let r = BiasReport::from_positions("rs", &pos, DEFAULT_ALPHA).unwrap();
    assert_eq!(r.verdict, Verdict::None);
    assert_eq!(r.histograms[0].iter().sum::<u32>(), 100);
    let json: serde_json::Value = serde_json::from_str(&r.histogram_json()).unwrap();
    assert_eq!(json["verdict"], "none");
    assert_eq!(r.csv_row()[3], "none");
}

proptest! {
    #![proptest_config(proptest::test_runner::Config::with_cases(16))]
    #[test]
    fn classify_ignores_row_order(seed in 0u64..100) {
        let mut rng = rng_from_seed(seed);
        let mut p: Vec<Vec<f64>> =
            (0..60).map(|_| (0..3).map(|_| rng.random::<f64>().powi(3)).collect()).collect();
        let v = classify(&p, &uniformity_test(&p).unwrap(), DEFAULT_ALPHA);
        p.shuffle(&mut rng);
        prop_assert_eq!(classify(&p, &uniformity_test(&p).unwrap(), DEFAULT_ALPHA), v);
    }
}
