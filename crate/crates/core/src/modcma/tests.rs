use super::*;
use crate::configspace::builtin_space;
use crate::suite::{make_f0, make_problem, PluginObjective, Problem};
use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
use std::sync::{Arc, Mutex};

fn sphere(dim: usize) -> Problem<f64> {
    make_problem(1, dim, 1).unwrap()
}

fn es(cfg: &CmaConfig, dim: usize, seed: u64) -> (CmaEs, Rng) {
    let mut rng = rng_from_seed(seed);
    let e = CmaEs::new(cfg, dim, vec![0.0; dim], 1.0, &mut rng).unwrap();
    (e, rng)
}

#[test]
fn equal_weights() {
    assert_eq!(recombination_weights(WeightKind::Equal, 8, 4), vec![0.25; 4]);
}

#[test]
fn lambda_decay_raw_values() {
    assert_eq!(lambda_decay_raw(4), vec![0.515625, 0.265625, 0.140625, 0.078125]);
    let w = recombination_weights(WeightKind::LambdaDecay, 4, 2);
    let s = 0.515625 + 0.265625;
    assert!((w[0] - 0.515625 / s).abs() < 1e-15 && (w[1] - 0.265625 / s).abs() < 1e-15);
}

#[test]
fn default_weights_decrease() {
    let w = recombination_weights(WeightKind::Default, 8, 4);
    assert!(w.windows(2).all(|p| p[0] > p[1]) && w[3] > 0.0);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    // μ > λ/2 falls back to ln(μ + ½) − ln i, still positive.
    let w = recombination_weights(WeightKind::Default, 5, 5);
    assert!(w.iter().all(|&v| v > 0.0));
}

proptest! {
    #[test]
    fn weights_are_normalized(lambda in 2usize..300, frac in 0.0f64..1.0, kind in 0u8..3) {
        let mu = 1 + ((lambda - 1) as f64 * frac) as usize;
        let kind = [WeightKind::Default, WeightKind::Equal, WeightKind::LambdaDecay][kind as usize];
        let w = recombination_weights(kind, lambda, mu);
        prop_assert_eq!(w.len(), mu);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&v| v > 0.0));
        prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
    }
}

#[test]
fn mirrored_pairs_sum_to_twice_the_mean() {
    for sampler in [SamplerKind::Gaussian, SamplerKind::Halton, SamplerKind::Sobol] {
        let mut cfg = CmaConfig::default_for(5);
        cfg.mirrored = Mirrored::Mirrored;
        cfg.base_sampler = sampler;
        let mut rng = rng_from_seed(3);
        let mut e = CmaEs::new(&cfg, 5, vec![1.0, -2.0, 0.5, 3.0, 0.0], 2.0, &mut rng).unwrap();
        let xs = e.ask(&mut rng);
        for pair in xs.chunks(2) {
            for j in 0..5 {
                assert!((pair[0][j] + pair[1][j] - 2.0 * e.mean()[j]).abs() <= 1e-12 * 2.0 * 4.0);
            }
        }
    }
}

#[test]
fn equal_weights_with_mu_equal_lambda_moves_mean_to_centroid() {
    let mut cfg = CmaConfig::default_for(3);
    cfg.weights = WeightKind::Equal;
    cfg.lambda = 6;
    cfg.mu = 6;
    let (mut e, mut rng) = es(&cfg, 3, 1);
    let xs = e.ask(&mut rng);
    let fs: Vec<f64> = (0..6).map(|i| (i * 7 % 6) as f64).collect();
    e.tell(&xs, &fs);
    for j in 0..3 {
        let c = xs.iter().map(|x| x[j]).sum::<f64>() / 6.0;
        assert!((e.mean()[j] - c).abs() < 1e-12);
    }
}

#[test]
fn covariance_off_keeps_identity() {
    let mut cfg = CmaConfig::default_for(5);
    cfg.covariance = false;
    cfg.active = true;
    let mut p = make_problem::<f64>(10, 5, 1).unwrap();
    let (mut e, mut rng) = es(&cfg, 5, 2);
    for _ in 0..200 {
        let xs = e.ask(&mut rng);
        let fs: Vec<f64> = xs.iter().map(|x| Objective::evaluate(&mut p, x)).collect();
        e.tell(&xs, &fs);
    }
    assert_eq!(e.covariance(), &Matrix::identity(5));
}

/// Independent one-generation oracle for the rank-one + rank-μ + active
/// update, starting from m = 0, σ = 1, C = I and zero paths.
#[test]
fn active_update_matches_oracle() {
    let d = 3usize;
    let lambda = 6usize;
    let mu = 3usize;
    let cfg = CmaConfig { active: true, lambda, mu, ..CmaConfig::default_for(d) };
    let (mut e, _) = es(&cfg, d, 4);
    let xs: Vec<Vec<f64>> = vec![
        vec![0.1, -0.2, 0.05],
        vec![-0.3, 0.1, 0.2],
        vec![0.4, 0.4, -0.1],
        vec![0.0, -0.1, 0.3],
        vec![-0.2, -0.3, -0.4],
        vec![0.25, 0.0, 0.1],
    ];
    let fs = [3.0, 1.0, 6.0, 2.0, 5.0, 4.0];
    e.tell(&xs, &fs);

    let order = [1usize, 3, 0, 5, 4, 2];
    let df = d as f64;
    let raw: Vec<f64> = (1..=lambda).map(|i| (3.5f64).ln() - (i as f64).ln()).collect();
    let pos_sum: f64 = raw[..mu].iter().sum();
    let wp: Vec<f64> = raw[..mu].iter().map(|v| v / pos_sum).collect();
    let mueff = 1.0 / wp.iter().map(|v| v * v).sum::<f64>();
    let c1 = 2.0 / ((df + 1.3) * (df + 1.3) + mueff);
    let cmu = f64::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((df + 2.0) * (df + 2.0) + mueff));
    let cc = (4.0 + mueff / df) / (df + 4.0 + 2.0 * mueff / df);
    let neg_raw = &raw[mu..];
    let neg_abs: f64 = neg_raw.iter().map(|v| -v).sum();
    let mueff_neg = neg_abs * neg_abs / neg_raw.iter().map(|v| v * v).sum::<f64>();
    let alpha = [1.0 + c1 / cmu, 1.0 + 2.0 * mueff_neg / (mueff + 2.0), (1.0 - c1 - cmu) / (df * cmu)]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let wn: Vec<f64> = neg_raw.iter().map(|v| v * alpha / neg_abs).collect();

    let mut yw = [0.0; 3];
    for (k, &i) in order[..mu].iter().enumerate() {
        for j in 0..d {
            yw[j] += wp[k] * xs[i][j];
        }
    }
    let pc: Vec<f64> = yw.iter().map(|v| (cc * (2.0 - cc) * mueff).sqrt() * v).collect();
    let wsum: f64 = 1.0 + wn.iter().sum::<f64>();
    let mut c = [[0.0f64; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            let eye = if a == b { 1.0 } else { 0.0 };
            let mut v = (1.0 - c1 - cmu * wsum) * eye + c1 * pc[a] * pc[b];
            for (k, &i) in order[..mu].iter().enumerate() {
                v += cmu * wp[k] * xs[i][a] * xs[i][b];
            }
            for (k, &i) in order[mu..].iter().enumerate() {
                let sq: f64 = xs[i].iter().map(|t| t * t).sum();
                v += cmu * wn[k] * df / sq * xs[i][a] * xs[i][b];
            }
            c[a][b] = v;
        }
    }
    let got = e.covariance();
    for a in 0..d {
        for b in 0..d {
            assert!((got[(a, b)] - c[a][b]).abs() <= 1e-10, "({a},{b}) {} vs {}", got[(a, b)], c[a][b]);
        }
    }
}

#[test]
fn csa_keeps_sigma_when_path_has_expected_length() {
    let cfg = CmaConfig::default_for(4);
    let (mut e, _) = es(&cfg, 4, 5);
    let target = e.constants().chi_n / (1.0 - e.constants().c_sigma);
    e.set_sigma_path(vec![target, 0.0, 0.0, 0.0]);
    let xs = vec![vec![0.0; 4]; cfg.lambda];
    let fs: Vec<f64> = (0..cfg.lambda).map(|i| i as f64).collect();
    e.tell(&xs, &fs);
    assert!((norm(e.evolution_paths().0) - e.constants().chi_n).abs() < 1e-12);
    assert!((e.sigma() - 1.0).abs() < 1e-12);
}

#[test]
fn csa_contracts_on_sphere() {
    let cfg = CmaConfig::default_for(5);
    for seed in 0..10 {
        let mut p = sphere(5);
        let mut rng = rng_from_seed(seed);
        let mean: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut e = CmaEs::new(&cfg, 5, mean, 2.0, &mut rng).unwrap();
        let mut evals = 0;
        while evals < 2000 {
            let xs = e.ask(&mut rng);
            let fs: Vec<f64> = xs.iter().map(|x| Objective::evaluate(&mut p, x)).collect();
            evals += xs.len();
            e.tell(&xs, &fs);
        }
        assert!(e.sigma() < 2.0, "seed {seed}: {}", e.sigma());
    }
}

#[test]
fn psr_success_of_dominating_population() {
    // Merged ranks: previous 5..8 (sum 26), current 1..4 (sum 10).
    assert_eq!(psr_success(&[5.0, 6.0, 7.0, 8.0], &[1.0, 2.0, 3.0, 4.0]), 1.0);
    assert_eq!(psr_success(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]), -1.0);
    assert_eq!(psr_success(&[1.0, 4.0], &[2.0, 3.0]), 0.0);

    let cfg = CmaConfig { step_size: StepSize::Psr, lambda: 4, mu: 2, ..CmaConfig::default_for(3) };
    let (mut e, mut rng) = es(&cfg, 3, 6);
    let xs = e.ask(&mut rng);
    e.tell(&xs, &[5.0, 6.0, 7.0, 8.0]);
    let before = e.sigma();
    let xs = e.ask(&mut rng);
    e.tell(&xs, &[1.0, 2.0, 3.0, 4.0]);
    assert!(e.sigma() > before);
}

#[test]
fn ipop_doubles_population() {
    let mut rng = rng_from_seed(0);
    let mut p = RestartPolicy::new(Restart::Ipop, 8, 4);
    assert_eq!(p.next(100, &mut rng).lambda, 16);
    let plan = p.next(100, &mut rng);
    assert_eq!((plan.lambda, plan.mu), (32, 16));
}

#[test]
fn no_restart_keeps_population() {
    let mut rng = rng_from_seed(0);
    let mut p = RestartPolicy::new(Restart::None, 8, 4);
    for _ in 0..5 {
        assert_eq!(p.next(50, &mut rng).lambda, 8);
    }
}

#[test]
fn bipop_runs_the_regime_with_less_consumed_budget() {
    let mut rng = rng_from_seed(8);
    let mut p = RestartPolicy::new(Restart::Bipop, 10, 5);
    // Scripted run lengths: the initial run, then five restarts.
    let used = [400usize, 900, 150, 200, 1700, 300];
    let mut smalls = 0;
    for &u in &used {
        let (small_before, large_before) = (p.budget_small, p.budget_large);
        let regime = p.current;
        let plan = p.next(u, &mut rng);
        let (small_now, large_now) = match regime {
            Some(true) => (small_before, large_before + u),
            Some(false) => (small_before + u, large_before),
            None => (small_before, large_before),
        };
        assert_eq!((p.budget_small, p.budget_large), (small_now, large_now));
        if plan.large {
            assert!(p.budget_small >= p.budget_large, "large chosen while small regime is behind");
            assert_eq!(plan.lambda, 10 << p.large_restarts);
        } else {
            smalls += 1;
            assert!(p.budget_small < p.budget_large);
            assert!(plan.lambda >= 2 && plan.lambda <= 10 << p.large_restarts);
            assert!(plan.sigma_factor <= 1.0 && plan.sigma_factor >= 1e-2);
        }
    }
    assert!(smalls >= 2);
}

fn recording(dim: usize) -> (PluginObjective, Arc<Mutex<Vec<f64>>>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let sink = log.clone();
    let obj = PluginObjective {
        name: "recorded sphere".into(),
        dim,
        bounds: (-5.0, 5.0),
        fopt: Some(0.0),
        f: Arc::new(move |x: &[f64]| {
            let v = x.iter().map(|t| t * t).sum();
            sink.lock().unwrap().push(v);
            v
        }),
    };
    (obj, log)
}

#[test]
fn budget_of_one_generation_gives_running_minimum() {
    let cfg = CmaConfig::default_for(5);
    let (mut obj, log) = recording(5);
    let out = run(&cfg, &mut obj, cfg.lambda, 9).unwrap();
    let vals = log.lock().unwrap().clone();
    assert_eq!(vals.len(), cfg.lambda);
    let mut best = f64::INFINITY;
    for (v, t) in vals.iter().zip(&out.trajectory) {
        best = best.min(*v);
        assert_eq!(*t, best);
    }
}

#[test]
fn default_cma_solves_sphere() {
    let cfg = CmaConfig::default_for(5);
    let mut hits = 0;
    for seed in 0..5 {
        let mut p = sphere(5);
        let out = run(&cfg, &mut p, 10_000, seed).unwrap();
        if out.final_value() <= 1e-8 {
            hits += 1;
        }
    }
    assert!(hits >= 4, "{hits}/5");
}

#[test]
fn runs_are_deterministic_budget_exact_and_monotone() {
    let space = builtin_space("modcma").unwrap();
    for (i, conf) in space.sample_random(40, 77).unwrap().iter().enumerate() {
        let cfg = CmaConfig::from_configuration(conf).unwrap();
        let fid = [1u32, 8, 15, 21][i % 4];
        let mut p = make_problem::<f64>(fid, 5, 1).unwrap();
        let a = run(&cfg, &mut p, 1500, i as u64).unwrap();
        let b = run(&cfg, &mut p, 1500, i as u64).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectory.len(), 1500);
        assert_eq!(a.evaluations, 1500);
        assert!(a.trajectory.windows(2).all(|w| w[1] <= w[0]));
        if cfg.local_restart == Restart::None {
            assert_eq!(a.restarts, 0);
        }
    }
}

#[test]
fn covariance_stays_symmetric_positive_definite() {
    let cfg = CmaConfig { active: true, ..CmaConfig::default_for(6) };
    let mut p = make_problem::<f64>(10, 6, 2).unwrap();
    let (mut e, mut rng) = es(&cfg, 6, 10);
    for _ in 0..300 {
        let xs = e.ask(&mut rng);
        let fs: Vec<f64> = xs.iter().map(|x| Objective::evaluate(&mut p, x)).collect();
        e.tell(&xs, &fs);
        let c = e.covariance();
        assert!(c.sub(&c.transpose()).max_abs() <= 1e-12);
        assert!(jacobi_eigen(c).values[0] > 0.0);
    }
}

#[test]
fn elitist_parents_never_get_worse_on_f0() {
    let cfg = CmaConfig { elitist: true, ..CmaConfig::default_for(4) };
    let mut f0 = make_f0(4, 3);
    let mut rng = rng_from_seed(11);
    let mut e = CmaEs::new(&cfg, 4, vec![0.5; 4], 0.2, &mut rng).unwrap();
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let xs = e.ask(&mut rng);
        let fs: Vec<f64> = xs.iter().map(|x| f0.evaluate(x)).collect();
        e.tell(&xs, &fs);
        let best = e.best_parent().unwrap();
        assert!(best <= last);
        last = best;
    }
}

#[test]
fn pairwise_selection_prefers_pair_winners() {
    let cfg = CmaConfig { mirrored: Mirrored::Pairwise, weights: WeightKind::Equal, lambda: 4, mu: 2, ..CmaConfig::default_for(2) };
    let (mut e, _) = es(&cfg, 2, 12);
    // Pair (0,1) holds the two best values; pairwise keeps only one of them.
    let xs = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    e.tell(&xs, &[1.0, 2.0, 3.0, 4.0]);
    assert!((e.mean()[0] - 0.5).abs() < 1e-12 && (e.mean()[1] - 0.5).abs() < 1e-12);
}

#[test]
fn configuration_round_trip_and_rejections() {
    let space = builtin_space("modcma").unwrap();
    let cfg = CmaConfig::from_configuration(&space.default_configuration()).unwrap();
    assert!(cfg.covariance && !cfg.active);
    assert_eq!((cfg.lambda, cfg.mu), (8, 4));
    assert_eq!(default_lambda(5), 8);
    assert_eq!(default_lambda(30), 14);
    let bad = CmaConfig { mu: 9, lambda: 8, ..cfg };
    assert!(bad.validate().is_err());
}
