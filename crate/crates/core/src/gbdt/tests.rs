use super::*;
use crate::rng::rng_from_seed;
use proptest::prelude::{prop_assert, proptest};
use rand::Rng as _;

fn recursive_predict(nodes: &[Node<f64>], i: usize, x: &[f64]) -> f64 {
    match &nodes[i] {
        Node::Leaf { value, .. } => *value,
        Node::Split { feature, threshold, left, right, .. } => {
            if x[*feature] < *threshold {
                recursive_predict(nodes, *left, x)
            } else {
                recursive_predict(nodes, *right, x)
            }
        }
    }
}

fn random_data(seed: u64, n: usize, m: usize, levels: u32) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0..levels) as f64).collect()).collect();
    let y = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v.sin()).sum::<f64>() + rng.random::<f64>())
        .collect();
    (x, y)
}

fn stump(n_left: u64, n_right: u64, v_left: f64, v_right: f64) -> TreeEnsemble<f64> {
    let mut e = TreeEnsemble::constant(1, 0.25, 1.0);
    e.trees.push(RegressionTree {
        nodes: vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: n_left + n_right },
            Node::Leaf { value: v_left, cover: n_left },
            Node::Leaf { value: v_right, cover: n_right },
        ],
    });
    e
}

#[test]
fn constant_target_has_no_trees() {
    let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
    let e = fit(&x, &[0.5; 3], &FitParams::default()).unwrap();
    assert!(e.trees.is_empty());
    for p in [[0.0, 0.0], [9.0, -3.0]] {
        assert_eq!(e.predict(&p).unwrap(), 0.5);
    }
    assert!(fit(&x[..1], &[0.5], &FitParams::default()).is_err());
}

#[test]
fn xor_like_table_is_fitted_exactly() {
    let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = [0.1, 0.9, 0.8, 0.2];
    let params = FitParams { max_depth: 2, n_trees: 1, learning_rate: 1.0, min_leaf: 1 };
    let e = fit(&x, &y, &params).unwrap();
    assert_eq!(e.trees.len(), 1);
    let pred: Vec<f64> = x.iter().map(|r| e.predict(r).unwrap()).collect();
    for (p, t) in pred.iter().zip(&y) {
        assert!((p - t).abs() < 1e-12);
    }
    assert!((r_squared(&y, &pred) - 1.0).abs() < 1e-12);
}

#[test]
fn deep_ensemble_overfits() {
    let (x, y) = random_data(3, 500, 8, 4);
    let e = fit(&x, &y, &FitParams::default()).unwrap();
    let pred: Vec<f64> = x.iter().map(|r| e.predict(r).unwrap()).collect();
    assert!(r_squared(&y, &pred) >= 0.95);
    assert!(e.trees.iter().all(|t| t.depth() <= 10 && t.check(8).is_ok()));
}

#[test]
fn fit_is_deterministic() {
    let (x, y) = random_data(4, 120, 5, 3);
    let p = FitParams { n_trees: 20, ..FitParams::default() };
    assert_eq!(fit(&x, &y, &p).unwrap(), fit(&x, &y, &p).unwrap());
}

#[test]
fn split_ties_prefer_lowest_feature() {
    // Both columns separate the targets identically.
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let e = fit(&x, &[0.0, 1.0], &FitParams { n_trees: 1, ..FitParams::default() }).unwrap();
    assert!(matches!(e.trees[0].nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
}

#[test]
fn predict_matches_recursive_oracle() {
    let (x, y) = random_data(5, 200, 6, 5);
    let e = fit(&x, &y, &FitParams { n_trees: 30, ..FitParams::default() }).unwrap();
    let mut rng = rng_from_seed(9);
    for _ in 0..1000 {
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..6.0)).collect();
        let want = e.base_score + e.learning_rate * e.trees.iter().map(|t| recursive_predict(&t.nodes, 0, &p)).sum::<f64>();
        assert_eq!(e.predict(&p).unwrap(), want);
    }
}

#[test]
fn predict_rejects_bad_input() {
    let e = stump(1, 1, 0.0, 1.0);
    assert!(e.predict(&[f64::NAN]).is_err());
    assert!(e.predict(&[0.0, 1.0]).is_err());
    assert_eq!(TreeEnsemble::<f64>::constant(1, 0.7, 0.3).predict(&[1.0]).unwrap(), 0.7);
}

#[test]
fn stump_prediction_and_shap() {
    let (nl, nr, vl, vr) = (3u64, 7u64, 2.0, -1.0);
    let e = stump(nl, nr, vl, vr);
    assert_eq!(e.predict(&[0.0]).unwrap(), 0.25 + vl);
    let n = (nl + nr) as f64;
    let left = tree_shap(&e, &[0.0]).unwrap();
    let want = (nr as f64 / n) * (vl - vr);
    assert!((left.phi[0] - want).abs() < 1e-12);
    assert!((brute_shap(&e, &[0.0]).unwrap().phi[0] - left.phi[0]).abs() < 1e-9);
    let right = tree_shap(&e, &[1.0]).unwrap();
    assert!((right.phi[0] - (nl as f64 / n) * (vr - vl)).abs() < 1e-12);
    // One player receives the whole difference.
    assert!((right.phi[0] - (e.predict(&[1.0]).unwrap() - right.base)).abs() < 1e-12);
}

#[test]
fn single_leaf_has_zero_attributions() {
    let mut e = TreeEnsemble::constant(3, 0.0, 1.0);
    e.trees.push(RegressionTree::leaf(0.4, 10));
    let s = tree_shap(&e, &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(s.phi, vec![0.0; 3]);
    assert_eq!(s.base, 0.4);
}

#[test]
fn duplicate_features_share_credit() {
    let half = |f: usize, g: usize| RegressionTree {
        nodes: vec![
            Node::Split { feature: f, threshold: 0.5, left: 1, right: 2, cover: 10 },
            Node::Leaf { value: 1.0, cover: 4 },
            Node::Split { feature: g, threshold: 0.5, left: 3, right: 4, cover: 6 },
            Node::Leaf { value: 2.0, cover: 1 },
            Node::Leaf { value: 5.0, cover: 5 },
        ],
    };
    let mut e = TreeEnsemble::<f64>::constant(3, 0.0, 0.5);
    e.trees.push(half(0, 1));
    e.trees.push(half(1, 0));
    for x in [[1.0, 1.0, 7.0], [0.0, 0.0, 7.0]] {
        let s = tree_shap(&e, &x).unwrap();
        assert!((s.phi[0] - s.phi[1]).abs() < 1e-9);
        assert_eq!(s.phi[2], 0.0);
        let b = brute_shap(&e, &x).unwrap();
        assert!((b.phi[0] - s.phi[0]).abs() < 1e-9);
    }
}

#[test]
fn tree_shap_matches_brute_force() {
    let mut rng = rng_from_seed(11);
    for case in 0..200u64 {
        let m = rng.random_range(1..=6);
        let (x, y) = random_data(100 + case, 40, m, 4);
        let p = FitParams { max_depth: rng.random_range(1..=3), n_trees: rng.random_range(1..=4), learning_rate: 0.5, min_leaf: 1 };
        let e = fit(&x, &y, &p).unwrap();
        let q: Vec<f64> = (0..m).map(|_| rng.random_range(0..4) as f64).collect();
        let (a, b) = (tree_shap(&e, &q).unwrap(), brute_shap(&e, &q).unwrap());
        assert!((a.base - b.base).abs() < 1e-9);
        for (u, v) in a.phi.iter().zip(&b.phi) {
            assert!((u - v).abs() < 1e-9, "case {case}: {u} vs {v}");
        }
    }
}

#[test]
fn shap_is_additive_over_trees() {
    let (x, y) = random_data(21, 100, 4, 4);
    let e = fit(&x, &y, &FitParams { n_trees: 12, ..FitParams::default() }).unwrap();
    let q = [1.0, 3.0, 0.0, 2.0];
    let whole = tree_shap(&e, &q).unwrap();
    let mut sum = [0.0f64; 4];
    for t in &e.trees {
        let mut single = TreeEnsemble::constant(4, 0.0, 1.0);
        single.trees.push(t.clone());
        let s = tree_shap(&single, &q).unwrap();
        for j in 0..4 {
            sum[j] += e.learning_rate * s.phi[j];
        }
    }
    for j in 0..4 {
        assert!((whole.phi[j] - sum[j]).abs() < 1e-9);
    }
}

#[test]
fn brute_force_rejects_wide_models() {
    let e = TreeEnsemble::<f64>::constant(BRUTE_MAX_FEATURES + 1, 0.0, 1.0);
    assert!(brute_shap(&e, &[0.0; BRUTE_MAX_FEATURES + 1]).is_err());
}

proptest! {
    #![proptest_config(proptest::test_runner::Config::with_cases(24))]
    #[test]
    fn local_accuracy(seed in 0u64..1000, depth in 1usize..8) {
        let (x, y) = random_data(seed, 80, 7, 5);
        let e = fit(&x, &y, &FitParams { max_depth: depth, n_trees: 15, ..FitParams::default() }).unwrap();
        for r in x.iter().take(20) {
            let s = tree_shap(&e, r).unwrap();
            prop_assert!((s.total() - e.predict(r).unwrap()).abs() < 1e-9);
            for f in 0..7 {
                if !e.used_features().contains(&f) {
                    prop_assert!(s.phi[f] == 0.0);
                }
            }
        }
    }
}

#[test]
fn json_round_trip_and_validation() {
    let (x, y) = random_data(8, 60, 3, 4);
    let e = fit(&x, &y, &FitParams { n_trees: 5, ..FitParams::default() }).unwrap();
    let text = e.to_json();
    assert_eq!(TreeEnsemble::<f64>::from_json(&text).unwrap(), e);
    assert!(TreeEnsemble::<f32>::from_json(&text).is_err());

    let mut bad = stump(0, 2, 1.0, 2.0);
    bad.trees[0].nodes[0] = Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 2 };
    assert!(TreeEnsemble::<f64>::from_json(&bad.to_json()).is_err());
    let mut sum_mismatch = stump(1, 2, 1.0, 2.0);
    sum_mismatch.trees[0].nodes[0] = Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 4 };
    assert!(sum_mismatch.check().is_err());
}

#[test]
fn f32_models_track_f64() {
    let (x, y) = random_data(12, 100, 4, 4);
    let x32: Vec<Vec<f32>> = x.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    let y32: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    let p = FitParams { n_trees: 10, ..FitParams::default() };
    let (a, b) = (fit(&x, &y, &p).unwrap(), fit(&x32, &y32, &p).unwrap());
    for (r, r32) in x.iter().zip(&x32) {
        let (p, q) = (a.predict(r).unwrap(), b.predict(r32).unwrap() as f64);
        assert!((p - q).abs() < 1e-2, "{p} {q}");
        let s = tree_shap(&b, r32).unwrap();
        assert!((s.total() - b.predict(r32).unwrap()).abs() < 1e-4);
    }
}

#[test]
fn swarm_rows_and_stable_ranking() {
    use crate::runner::FeatureFrame;
    let (x, y) = random_data(13, 50, 4, 4);
    let mut xs = x.clone();
    for r in &mut xs {
        r[3] = 1.0;
    }
    let e = fit(&xs, &y, &FitParams { n_trees: 10, ..FitParams::default() }).unwrap();
    let frame = FeatureFrame {
        columns: vec!["a".into(), "b".into(), "c".into(), "const".into()],
        x: xs.clone(),
        y: y.clone(),
        rows: (0..50).collect(),
    };
    let s = swarm_data(&frame, &e, 1, 5).unwrap();
    assert_eq!(s.rows.len(), 50 * 4);
    assert!(s.rows.iter().filter(|r| r.feature == "const").all(|r| r.shap == 0.0));
    assert_eq!(s.ranking.last().unwrap().feature, "const");

    let mut perm: Vec<usize> = (0..50).collect();
    perm.reverse();
    perm.swap(3, 17);
    let shuffled = FeatureFrame {
        columns: frame.columns.clone(),
        x: perm.iter().map(|&i| xs[i].clone()).collect(),
        y: perm.iter().map(|&i| y[i]).collect(),
        rows: perm.clone(),
    };
    assert_eq!(swarm_data(&shuffled, &e, 1, 5).unwrap().ranking, s.ranking);

    let mut out = Vec::new();
    s.write_csv(&mut out, true).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("fid,dim,record_idx,feature,encoded_value,shap\n"));
    assert_eq!(text.lines().count(), 201);
}
