use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xplain(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xplain")).args(args).current_dir(dir).output().expect("spawn xplain")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = xplain(dir, args);
    assert!(
        out.status.success(),
        "xplain {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn plan(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const SMALL_CMA: &str = r#"
space = "builtin:modcma"
design = "random"
samples = 4
seed = 7
fids = [1, 2]
dims = [3]
iids = [1, 2]
reps = 2
budget = 300
"#;

#[test]
fn version_names_the_feature_order() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(dir.path(), &["--version"]);
    assert!(v.contains(xplain::VERSION));
    assert!(v.contains(&xplain::runner::feature_order_hash()));
}

#[test]
fn space_count_prints_grid_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    for fam in ["modcma", "modde"] {
        let out = ok(dir.path(), &["space", "--file", &format!("builtin:{fam}"), "--count"]);
        let expected = xplain::configspace::builtin_space(fam).unwrap().grid_size();
        assert_eq!(out.trim(), expected.to_string());
    }
    plan(
        dir.path(),
        "toy.toml",
        r#"
family = "modde"
[[param]]
name = "a"
kind = "categorical"
domain = ["x", "y"]
default = "x"
[[param]]
name = "b"
kind = "integer"
domain = [1, 2, 3]
default = 1
condition = "a == y"
"#,
    );
    assert_eq!(ok(dir.path(), &["space", "--file", "toy.toml", "--count"]).trim(), "4");
    let listing = ok(dir.path(), &["space", "--file", "toy.toml", "--enumerate"]);
    assert_eq!(listing.lines().count(), 5);
    assert!(listing.starts_with("config_id,a,b\n"));
}

#[test]
fn space_sampling_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["space", "--file", "builtin:modcma", "--sample", "5", "--seed", "11"];
    let a = ok(dir.path(), &args);
    assert_eq!(a, ok(dir.path(), &args));
    assert_eq!(a.lines().count(), 6);
    assert_ne!(a, ok(dir.path(), &["space", "--file", "builtin:modcma", "--sample", "5", "--seed", "12"]));
}

#[test]
fn run_is_deterministic_across_repeats_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    plan(dir.path(), "plan.toml", SMALL_CMA);
    ok(dir.path(), &["run", "--plan", "plan.toml", "--out", "a.csv", "--jobs", "1"]);
    ok(dir.path(), &["run", "--plan", "plan.toml", "--out", "b.csv", "--jobs", "1"]);
    ok(dir.path(), &["run", "--plan", "plan.toml", "--out", "c.csv", "--jobs", "8"]);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(a, fs::read(dir.path().join("c.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 4 * 2 * 2 * 2);
    assert!(!dir.path().join("a.csv.partial").exists());
}

#[test]
fn run_writes_trajectories_on_request() {
    let dir = tempfile::tempdir().unwrap();
    plan(dir.path(), "plan.toml", SMALL_CMA);
    ok(dir.path(), &["run", "--plan", "plan.toml", "--out", "r.csv", "--trajectories", "traj"]);
    let files: Vec<_> = fs::read_dir(dir.path().join("traj")).unwrap().collect();
    assert_eq!(files.len(), 32);
    let one = fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[0], "eval_index,best_so_far");
    assert_eq!(lines.len(), 301);
    let vals: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn smoke_pipeline_produces_every_declared_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    plan(
        d,
        "plan.toml",
        r#"
space = "builtin:modcma"
design = "random"
samples = 20
seed = 3
fids = [1, 2]
dims = [5]
iids = [1]
reps = 2
budget = 1000
"#,
    );
    ok(d, &["run", "--plan", "plan.toml", "--out", "runs.csv", "--jobs", "4"]);
    let runs_before = fs::read(d.join("runs.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&runs_before).lines().count(), 1 + 20 * 2 * 2);

    let out = ok(d, &["explain", "--runs", "runs.csv", "--out-dir", "explain", "--svg", "--jobs", "2"]);
    assert_eq!(out.lines().count(), 2);
    for f in [
        "model_f1_d5.json",
        "model_f2_d5.json",
        "swarm.csv",
        "importance.csv",
        "models.csv",
        "swarm_f1_d5.svg",
        "swarm_f2_d5.svg",
    ] {
        assert!(d.join("explain").join(f).is_file(), "missing explain/{f}");
    }
    let model = xplain::TreeEnsemble::load(d.join("explain/model_f1_d5.json")).unwrap();
    assert_eq!(model.n_features, xplain::configspace::builtin_space("modcma").unwrap().params().len() + 2);
    let swarm = fs::read_to_string(d.join("explain/swarm.csv")).unwrap();
    assert_eq!(swarm.lines().next().unwrap(), xplain::gbdt::SWARM_HEADER.join(","));
    assert_eq!(swarm.lines().count(), 1 + 80 * model.n_features);

    ok(d, &["rank", "--runs", "runs.csv", "--out-dir", "rank", "--top", "5"]);
    for f in ["report.md", "ranking.csv", "summary.csv", "effects.csv", "hall_of_fame.csv"] {
        assert!(d.join("rank").join(f).is_file(), "missing rank/{f}");
    }
    let hof = fs::read_to_string(d.join("rank/hall_of_fame.csv")).unwrap();
    assert_eq!(hof.lines().count(), 6);

    let best_id = hof.lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();
    let out = ok(
        d,
        &["bias", "--space", "builtin:modcma", "--config-id", &best_id, "--runs", "30", "--budget", "300", "--out-dir", "bias"],
    );
    assert!(out.starts_with(&best_id));
    assert!(d.join("bias/bias.csv").is_file());
    assert!(d.join(format!("bias/bias_{best_id}.json")).is_file());

    assert_eq!(fs::read(d.join("runs.csv")).unwrap(), runs_before, "inputs must not change");
}

#[test]
fn aac_and_report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    plan(
        d,
        "plan.toml",
        r#"
space = "builtin:modde"
design = "random"
samples = 6
seed = 5
fids = [1, 15]
dims = [2]
iids = [1, 2]
reps = 1
budget = 200
"#,
    );
    ok(d, &["run", "--plan", "plan.toml", "--out", "runs.csv"]);
    let out = ok(d, &["aac", "--runs", "runs.csv", "--features", "f.csv", "--mode", "lofo", "--doe", "64", "--out-dir", "aac"]);
    assert!(out.contains("| lofo | DT |"));
    assert!(d.join("f.csv").is_file());
    for f in ["aac_loss_lofo.csv", "aac_summary_lofo.csv", "wizard.txt", "wizard.json"] {
        assert!(d.join("aac").join(f).is_file(), "missing aac/{f}");
    }
    let features = fs::read(d.join("f.csv")).unwrap();
    ok(d, &["aac", "--runs", "runs.csv", "--features", "f.csv", "--mode", "loio"]);
    assert_eq!(fs::read(d.join("f.csv")).unwrap(), features);

    ok(d, &["report", "--runs", "runs.csv", "--out-dir", "rep", "--features", "f.csv", "--compare", "runs.csv"]);
    let index = fs::read_to_string(d.join("rep/index.md")).unwrap();
    for section in ["## Ranking", "## Explanations", "## Comparison", "## Algorithm configuration"] {
        assert!(index.contains(section), "index lacks {section}");
    }
    for f in ["rank/report.md", "explain/models.csv", "compare/comparison.csv", "aac/aac_loss_lofo.csv"] {
        assert!(d.join("rep").join(f).is_file(), "missing rep/{f}");
    }
}

#[test]
fn compare_prints_markdown() {
    let dir = tempfile::tempdir().unwrap();
    plan(dir.path(), "plan.toml", SMALL_CMA);
    ok(dir.path(), &["run", "--plan", "plan.toml", "--out", "a.csv"]);
    let md = ok(dir.path(), &["compare", "--a", "a.csv", "--b", "a.csv", "--out-dir", "cmp"]);
    assert!(md.starts_with("| fid |"));
    assert_eq!(md.lines().count(), 4);
    assert!(dir.path().join("cmp/comparison.csv").is_file());
}

#[test]
fn validation_errors_exit_one_with_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [&[&str]; 6] = [
        &["space", "--file", "builtin:modcma", "--count", "--bogus"],
        &["frobnicate"],
        &["run", "--plan", "missing.toml", "--out", "x.csv"],
        &["space", "--file", "builtin:modcma"],
        &["aac", "--runs", "missing.csv", "--features", "f.csv", "--mode", "kfold"],
        &["bias", "--space", "builtin:modcma", "--config-id", "default", "--runs", "5"],
    ];
    for args in cases {
        let out = xplain(d, args);
        assert_eq!(code(&out), 1, "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
    assert!(!d.join("x.csv").exists());
}

#[test]
fn malformed_csv_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    plan(d, "plan.toml", SMALL_CMA);
    ok(d, &["run", "--plan", "plan.toml", "--out", "runs.csv"]);
    let text = fs::read_to_string(d.join("runs.csv")).unwrap();
    let bad = text.replacen(",ok,", ",okay,", 1);
    fs::write(d.join("bad.csv"), bad).unwrap();
    let out = xplain(d, &["rank", "--runs", "bad.csv", "--out-dir", "r"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("status"), "{err}");
    assert!(!d.join("r").exists());
}

#[test]
fn unknown_config_id_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = xplain(dir.path(), &["bias", "--space", "builtin:modde", "--config-id", "0000000000000000", "--runs", "30"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("config-id"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    for verb in ["space", "run", "explain", "rank", "compare", "bias", "aac", "report"] {
        assert!(out.contains(verb));
    }
}
