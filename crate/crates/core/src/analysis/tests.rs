use super::*;
use crate::rng::rng_from_seed;
use crate::runner::{RunRecord, RunStatus};
use proptest::prelude::{prop_assert, proptest};
use rand::Rng as _;

fn rec(id: &str, values: &[&str], fid: u32, iid: u32, seed: u32, aocc: f64) -> RunRecord {
    RunRecord {
        config_id: id.into(),
        family: "toy".into(),
        values: values.iter().map(|s| s.to_string()).collect(),
        fid,
        dim: 5,
        iid,
        seed,
        aocc,
        final_gap: 0.0,
        restarts: 0,
        status: RunStatus::Ok,
        wall_ms: 0,
    }
}

fn dataset(names: &[&str], records: Vec<RunRecord>) -> Dataset {
    let mut d = Dataset::new("toy", names.iter().map(|s| s.to_string()).collect());
    d.records = records;
    d.sort();
    d
}

/// Configs `(id, per-fid run lists)` with a single dummy parameter.
fn scored(table: &[(&str, &[&[f64]])]) -> Dataset {
    let mut records = Vec::new();
    for (id, per_fid) in table {
        for (f, runs) in per_fid.iter().enumerate() {
            for (s, &a) in runs.iter().enumerate() {
                records.push(rec(id, &[id], f as u32 + 1, 1, s as u32, a));
            }
        }
    }
    dataset(&["p"], records)
}

#[test]
fn single_best_picks_highest_mean() {
    let d = scored(&[("a", &[&[0.9, 0.9]]), ("b", &[&[0.5, 0.7]])]);
    let b = single_best(&d, 1, 5).unwrap();
    assert_eq!(b.config_id, "a");
    assert_eq!(b.stat.mean, 0.9);
    assert!(single_best(&d, 2, 5).is_err());
}

#[test]
fn ties_go_to_lowest_id() {
    let d = scored(&[("c", &[&[0.4]]), ("a", &[&[0.4]]), ("b", &[&[0.4]])]);
    assert_eq!(single_best(&d, 1, 5).unwrap().config_id, "a");
    assert_eq!(avg_best(&d, 5).unwrap().config_id, "a");
}

#[test]
fn single_best_matches_exhaustive_scan() {
    let mut rng = rng_from_seed(3);
    let mut records = Vec::new();
    for c in 0..30 {
        for s in 0..4 {
            records.push(rec(&format!("{c:02}"), &["x"], 1, 1, s, (rng.random_range(0..20) as f64) / 20.0));
        }
    }
    let d = dataset(&["p"], records);
    let (mut best_id, mut best) = (String::new(), f64::NEG_INFINITY);
    for c in 0..30 {
        let id = format!("{c:02}");
        let v: Vec<f64> = d.records.iter().filter(|r| r.config_id == id).map(|r| r.aocc).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        if m > best {
            best = m;
            best_id = id;
        }
    }
    let got = single_best(&d, 1, 5).unwrap();
    assert_eq!(got.config_id, best_id);
    assert_eq!(got.stat.mean, best);
}

#[test]
fn avg_best_averages_over_functions() {
    let d = scored(&[("a", &[&[1.0], &[0.0]]), ("b", &[&[0.6], &[0.6]])]);
    let ab = avg_best(&d, 5).unwrap();
    assert_eq!(ab.config_id, "b");
    assert!((ab.score - 0.6).abs() < 1e-15);
    let swapped = scored(&[("a", &[&[0.0], &[1.0]]), ("b", &[&[0.6], &[0.6]])]);
    assert_eq!(avg_best(&swapped, 5).unwrap().config_id, "b");
    let single = scored(&[("a", &[&[0.2, 0.4]]), ("b", &[&[0.3, 0.3]])]);
    assert_eq!(avg_best(&single, 5).unwrap().config_id, single_best(&single, 1, 5).unwrap().config_id);
}

#[test]
fn gains_by_hand() {
    let d = scored(&[("a", &[&[0.9, 0.9], &[0.1, 0.1]]), ("b", &[&[0.5, 0.5], &[0.6, 0.6]])]);
    let g = gains(&d, 5).unwrap();
    assert!((g.avg_performance - 0.525).abs() < 1e-12);
    // avg-best is b: (0.5 - 0.7 + 0.6 - 0.35) / 2
    assert!((g.gain_avg_best - 0.025).abs() < 1e-12);
    // single-best: a on f1, b on f2: (0.2 + 0.25) / 2
    assert!((g.gain_single_best - 0.225).abs() < 1e-12);

    let flat = scored(&[("a", &[&[0.3, 0.3], &[0.3]]), ("b", &[&[0.3], &[0.3, 0.3]])]);
    let g = gains(&flat, 5).unwrap();
    assert_eq!((g.gain_avg_best, g.gain_single_best), (0.0, 0.0));
}

#[test]
fn mann_whitney_exact_cases() {
    assert_eq!(mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 0.1);
    assert_eq!(u_statistic(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 0.0);
    assert_eq!(mann_whitney(&[0.5, 0.7, 0.2], &[0.5, 0.7, 0.2]).unwrap(), 1.0);
    assert_eq!(mann_whitney(&[0.5; 4], &[0.5; 4]).unwrap(), 1.0);
    assert_eq!(mann_whitney_normal(&[0.5; 12], &[0.5; 12]).unwrap(), 1.0);
    assert!(mann_whitney(&[], &[1.0]).is_err());
    // Two values per side without ties: 6 splits, the observed one and its mirror are extreme.
    assert!((mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap() - 2.0 / 6.0).abs() < 1e-15);
}

#[test]
fn exact_and_normal_paths_agree_at_nine() {
    let mut rng = rng_from_seed(17);
    for _ in 0..40 {
        let shift = rng.random_range(0.0..1.5);
        let a: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..9).map(|_| rng.random::<f64>() + shift).collect();
        let (e, n) = (mann_whitney_exact(&a, &b).unwrap(), mann_whitney_normal(&a, &b).unwrap());
        assert!((e - n).abs() <= 0.02, "exact {e} normal {n}");
    }
}

proptest! {
    #[test]
    fn mann_whitney_symmetric(a in proptest::collection::vec(0u8..5, 1..7), b in proptest::collection::vec(0u8..5, 1..7)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let (p, q) = (mann_whitney(&a, &b).unwrap(), mann_whitney(&b, &a).unwrap());
        prop_assert!((p - q).abs() < 1e-12);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!((mann_whitney(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_invariants(seed in 0u64..500) {
        let mut rng = rng_from_seed(seed);
        let mut records = Vec::new();
        for c in 0..6 {
            for f in 1..=3 {
                for s in 0..3 {
                    records.push(rec(&format!("c{c}"), &["x"], f, 1, s, rng.random()));
                }
            }
        }
        let d = dataset(&["p"], records);
        for row in ranking_table(&d, 5).unwrap() {
            prop_assert!(row.single_best.stat.mean >= row.avg_best.stat.mean);
            prop_assert!(row.single_best.stat.mean >= row.all.mean - 1e-15);
        }
    }
}

#[test]
fn module_effect_examples() {
    let binary = dataset(
        &["flag"],
        vec![rec("t", &["true"], 1, 1, 0, 0.8), rec("f", &["false"], 1, 1, 0, 0.6)],
    );
    let e = module_effects(&binary, "t", 1, 5).unwrap();
    assert!((e[0].delta.unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(e[0].option, "true");

    let three = dataset(
        &["m"],
        vec![rec("x", &["x"], 1, 1, 0, 0.9), rec("y", &["y"], 1, 1, 0, 0.5), rec("z", &["z"], 1, 1, 0, 0.7)],
    );
    assert!((module_effects(&three, "x", 1, 5).unwrap()[0].delta.unwrap() - 0.3).abs() < 1e-12);

    let sparse = dataset(
        &["m", "n"],
        vec![rec("p", &["a", "c"], 1, 1, 0, 0.9), rec("q", &["b", "d"], 1, 1, 0, 0.1)],
    );
    let e = module_effects(&sparse, "p", 1, 5).unwrap();
    assert!(e.iter().all(|d| d.delta.is_none() && d.display_delta() == NOT_ESTIMABLE));
    assert!(module_effects(&sparse, "nope", 1, 5).is_err());
}

#[test]
fn planted_additive_effects_are_recovered() {
    let opts: [&[&str]; 3] = [&["off", "on"], &["a", "b", "c"], &["1", "2", "3", "4"]];
    let planted: [&[f64]; 3] = [&[0.0, 0.125], &[0.0, -0.0625, 0.25], &[0.0, 0.03125, 0.0625, -0.09375]];
    let mut records = Vec::new();
    for i in 0..2 {
        for j in 0..3 {
            for k in 0..4 {
                let id = format!("{i}{j}{k}");
                let a = 0.25 + planted[0][i] + planted[1][j] + planted[2][k];
                for s in 0..2 {
                    records.push(rec(&id, &[opts[0][i], opts[1][j], opts[2][k]], 1, 1, s, a));
                }
            }
        }
    }
    let d = dataset(&["m0", "m1", "m2"], records);
    for i in 0..2 {
        for j in 0..3 {
            for k in 0..4 {
                let idx = [i, j, k];
                let e = module_effects(&d, &format!("{i}{j}{k}"), 1, 5).unwrap();
                for (m, eff) in e.iter().enumerate() {
                    let chosen = planted[m][idx[m]];
                    let others: Vec<f64> =
                        planted[m].iter().enumerate().filter(|(o, _)| *o != idx[m]).map(|(_, v)| *v).collect();
                    let want = chosen - others.iter().sum::<f64>() / others.len() as f64;
                    assert!((eff.delta.unwrap() - want).abs() <= 1e-12);
                }
            }
        }
    }
    for j in 0..3 {
        for k in 0..4 {
            let on = module_effects(&d, &format!("1{j}{k}"), 1, 5).unwrap()[0].delta.unwrap();
            let off = module_effects(&d, &format!("0{j}{k}"), 1, 5).unwrap()[0].delta.unwrap();
            assert!((on + off).abs() <= 1e-12);
        }
    }
}

fn framework(shift: f64) -> Dataset {
    let mut rng = rng_from_seed(5);
    let mut records = Vec::new();
    for c in 0..4 {
        for f in 1..=2 {
            for s in 0..6 {
                records.push(rec(&format!("c{c}"), &["x"], f, 1, s, 0.6 + 0.3 * rng.random::<f64>() + shift));
            }
        }
    }
    dataset(&["p"], records)
}

#[test]
fn framework_comparison() {
    let a = framework(0.0);
    let same = compare_frameworks(&a, &a, 5).unwrap();
    assert_eq!(same.len(), 2);
    assert!(same.iter().all(|r| r.winner == [Winner::Neither; 3]));
    let worse = framework(-0.5);
    let rows = compare_frameworks(&worse, &a, 5).unwrap();
    assert!(rows.iter().all(|r| r.winner == [Winner::B; 3]));
    let csv = comparison_csv(&rows);
    assert!(csv.starts_with("fid,dim,single_best_a_mean"));
    assert!(comparison_markdown(&rows, "modde", "modcma").contains("**"));
}

#[test]
fn report_is_deterministic() {
    let d = framework(0.0);
    let r = Report::build(&d, 3).unwrap();
    assert_eq!(r, Report::build(&d, 3).unwrap());
    let names: Vec<&str> = r.files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["ranking.csv", "summary.csv", "effects.csv", "hall_of_fame.csv"]);
    assert!(r.markdown.contains("## d = 5"));
    assert_eq!(r.files[3].1.lines().count(), 4);
    let dir = tempfile::tempdir().unwrap();
    r.write(dir.path()).unwrap();
    assert!(dir.path().join("report.md").exists());
}
