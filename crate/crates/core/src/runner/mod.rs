//! Experiment execution: AOCC scoring, plan files, the parallel job runner
//! and the feature frame used by the explanation models.
//!
//! Every job derives its seed from `(config-id, fid, dim, iid, rep)` with
//! [`mix_seed`], so the sorted record file is identical for any number of
//! worker threads.

mod records;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use records::{write_atomic, Dataset, RunRecord, RunStatus};

use crate::configspace::{builtin_space, Configuration, ConfigurationSpace, BUILTIN_FAMILIES};
use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, RunOutcome};
use crate::modcma::{self, CmaConfig};
use crate::modde::{self, DeConfig};
use crate::num::Real;
use crate::rng::{mix_seed, rng_from_seed};
use crate::suite::{Objective, Suite};

pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_REPS: u32 = 5;
pub const DEFAULT_IIDS: [u32; 5] = [1, 2, 3, 4, 5];

/// Best-so-far values of one run (gaps when `fopt` is known).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub values: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(values: Vec<T>) -> Self {
        Trajectory { values }
    }

    pub fn aocc(&self, lb: T, ub: T) -> Result<T> {
        aocc(&self.values, lb, ub)
    }
}

/// Normalized area over the log-scaled convergence curve:
/// `1/B Σ (1 − (clamp(log10 y_i) − log10 lb) / (log10 ub − log10 lb))`.
/// Values `≤ 0` count as `lb`.
pub fn aocc<T: Real>(traj: &[T], lb: T, ub: T) -> Result<T> {
    if lb.is_nan() || ub.is_nan() || lb <= T::zero() || ub <= lb {
        return Err(Error::InvalidArgument(format!("AOCC bounds need 0 < lb < ub, got lb={lb} ub={ub}")));
    }
    if traj.is_empty() {
        return Err(Error::InvalidArgument("AOCC of an empty trajectory".into()));
    }
    let (llb, lub) = (lb.log10(), ub.log10());
    let span = lub - llb;
    let total: T = traj
        .iter()
        .map(|&y| {
            let ly = if y <= lb { llb } else if y >= ub || y.is_nan() { lub } else { y.log10() };
            T::one() - (ly - llb) / span
        })
        .sum();
    Ok((total / T::lit(traj.len() as f64)).max(T::zero()).min(T::one()))
}

/// AOCC bounds: `(1e-8, 1e2)` below 30 dimensions, `(1e-8, 1e8)` from 30 on.
pub fn default_bounds(dim: usize) -> (f64, f64) {
    if dim >= 30 {
        (1e-8, 1e8)
    } else {
        (1e-8, 1e2)
    }
}

/// An optimizer bound to a concrete configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Cma(CmaConfig),
    De(DeConfig),
    RandomSearch,
}

impl Algorithm {
    pub fn from_configuration(config: &Configuration) -> Result<Self> {
        match config.family.as_str() {
            "modcma" => Ok(Algorithm::Cma(CmaConfig::from_configuration(config)?)),
            "modde" => Ok(Algorithm::De(DeConfig::from_configuration(config)?)),
            "random" => Ok(Algorithm::RandomSearch),
            other => Err(Error::InvalidConfiguration(format!(
                "no optimizer for family `{other}` (known: {})",
                BUILTIN_FAMILIES.join(", ")
            ))),
        }
    }

    pub fn run(&self, objective: &mut dyn Objective, budget: usize, seed: u64) -> Result<RunOutcome> {
        match self {
            Algorithm::Cma(c) => modcma::run(c, objective, budget, seed),
            Algorithm::De(c) => modde::run(c, objective, budget, seed),
            Algorithm::RandomSearch => Ok(random_search(objective, budget, seed)),
        }
    }
}

/// Uniform sampling in the box.
pub fn random_search(objective: &mut dyn Objective, budget: usize, seed: u64) -> RunOutcome {
    let mut rng = rng_from_seed(seed);
    let dim = objective.dim();
    let mut ev = Evaluator::new(objective, budget);
    let (lb, ub) = ev.bounds();
    while !ev.exhausted() {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(lb..=ub)).collect();
        ev.evaluate(&x);
    }
    ev.finish(0)
}

/// Design used to pick configurations from the space.
#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    Grid,
    Random(usize),
}

/// Full experiment matrix.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub space: ConfigurationSpace,
    pub configs: Vec<Configuration>,
    pub fids: Vec<u32>,
    pub dims: Vec<usize>,
    pub iids: Vec<u32>,
    pub reps: u32,
    pub budget: usize,
    /// Per-dimension AOCC bound overrides.
    pub bounds: BTreeMap<usize, (f64, f64)>,
    /// Record wall-clock time per run (breaks byte-identical outputs).
    pub timing: bool,
    /// Directory receiving one `eval_index,best_so_far` CSV per run.
    pub trajectory_dir: Option<PathBuf>,
}

/// One cell of the experiment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub config: usize,
    pub fid: u32,
    pub dim: usize,
    pub iid: u32,
    pub rep: u32,
}

/// Seed of one job: `mix(config-id, fid, dim, iid, rep)`.
pub fn job_seed(config_id: &str, fid: u32, dim: usize, iid: u32, rep: u32) -> u64 {
    let id = u64::from_str_radix(config_id, 16).unwrap_or_else(|_| {
        let d = Sha256::digest(config_id.as_bytes());
        u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
    });
    mix_seed(&[id, fid as u64, dim as u64, iid as u64, rep as u64])
}

impl ExperimentPlan {
    pub fn new(space: ConfigurationSpace, design: &Design, seed: u64) -> Result<Self> {
        let configs = match design {
            Design::Grid => space.enumerate_grid(),
            Design::Random(n) => space.sample_random(*n, seed)?,
        };
        Ok(ExperimentPlan {
            space,
            configs,
            fids: vec![1],
            dims: vec![5],
            iids: DEFAULT_IIDS.to_vec(),
            reps: DEFAULT_REPS,
            budget: DEFAULT_BUDGET,
            bounds: BTreeMap::new(),
            timing: false,
            trajectory_dir: None,
        })
    }

    pub fn bounds_for(&self, dim: usize) -> (f64, f64) {
        self.bounds.get(&dim).copied().unwrap_or_else(|| default_bounds(dim))
    }

    pub fn job_count(&self) -> usize {
        self.configs.len() * self.fids.len() * self.dims.len() * self.iids.len() * self.reps as usize
    }

    pub fn jobs(&self) -> Vec<Job> {
        let mut out = Vec::with_capacity(self.job_count());
        for config in 0..self.configs.len() {
            for &fid in &self.fids {
                for &dim in &self.dims {
                    for &iid in &self.iids {
                        for rep in 0..self.reps {
                            out.push(Job { config, fid, dim, iid, rep });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.configs.is_empty() {
            return bad("plan has no configurations".into());
        }
        if self.fids.is_empty() || self.dims.is_empty() || self.iids.is_empty() || self.reps == 0 {
            return bad("plan needs at least one fid, dim, iid and repetition".into());
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
            return bad(format!("dimension {d} is below 2"));
        }
        for (d, (lb, ub)) in &self.bounds {
            if !(*lb > 0.0 && ub > lb) {
                return bad(format!("bounds for d={d} need 0 < lb < ub"));
            }
        }
        for c in &self.configs {
            Algorithm::from_configuration(c)?;
        }
        Ok(())
    }

    /// Parses a plan document. Relative space paths resolve against `base`.
    ///
    /// ```toml
    /// space = "builtin:modcma"     # or a path to a space file
    /// design = "random"            # or "grid"
    /// samples = 100                # random designs only
    /// seed = 42                    # design seed
    /// fids = [1, 2]
    /// dims = [5]
    /// iids = [1, 2, 3, 4, 5]       # optional, default 1..5
    /// reps = 5                     # optional
    /// budget = 10000               # optional
    /// timing = false               # optional
    /// [bounds]                     # optional per-dimension AOCC bounds
    /// 5 = [1e-8, 1e2]
    /// ```
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let ctx = "plan file";
        let t: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::parse(ctx, e.to_string()))?;
        let known = ["space", "design", "samples", "seed", "fids", "dims", "iids", "reps", "budget", "timing", "bounds"];
        if let Some(k) = t.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::parse(ctx, format!("unknown field `{k}`")));
        }
        let space_ref = t
            .get("space")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::parse(ctx, "missing string field `space`"))?;
        let space = match space_ref.strip_prefix("builtin:") {
            Some(_) => ConfigurationSpace::load(space_ref)?,
            None => {
                let p = PathBuf::from(space_ref);
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                };
                ConfigurationSpace::from_file(p)?
            }
        };
        let int = |name: &str| -> Result<Option<i64>> {
            match t.get(name) {
                None => Ok(None),
                Some(v) => v
                    .as_integer()
                    .filter(|&i| i >= 0)
                    .map(Some)
                    .ok_or_else(|| Error::parse(ctx, format!("`{name}` must be a non-negative integer"))),
            }
        };
        let list = |name: &str| -> Result<Option<Vec<u64>>> {
            match t.get(name) {
                None => Ok(None),
                Some(v) => {
                    let arr = v.as_array().ok_or_else(|| Error::parse(ctx, format!("`{name}` must be a list")))?;
                    arr.iter()
                        .map(|x| {
                            x.as_integer()
                                .filter(|&i| i >= 0)
                                .map(|i| i as u64)
                                .ok_or_else(|| Error::parse(ctx, format!("`{name}` entries must be non-negative integers")))
                        })
                        .collect::<Result<Vec<_>>>()
                        .map(Some)
                }
            }
        };
        let seed = int("seed")?.unwrap_or(0) as u64;
        let design = match t.get("design").map(|v| v.as_str()) {
            None | Some(Some("grid")) => Design::Grid,
            Some(Some("random")) => {
                let n = int("samples")?.ok_or_else(|| Error::parse(ctx, "random design needs `samples`"))?;
                Design::Random(n as usize)
            }
            _ => return Err(Error::parse(ctx, "`design` must be \"grid\" or \"random\"")),
        };
        let mut plan = ExperimentPlan::new(space, &design, seed)?;
        plan.fids = list("fids")?.ok_or_else(|| Error::parse(ctx, "missing `fids`"))?.into_iter().map(|v| v as u32).collect();
        plan.dims = list("dims")?.ok_or_else(|| Error::parse(ctx, "missing `dims`"))?.into_iter().map(|v| v as usize).collect();
        if let Some(iids) = list("iids")? {
            plan.iids = iids.into_iter().map(|v| v as u32).collect();
        }
        if let Some(r) = int("reps")? {
            plan.reps = r as u32;
        }
        if let Some(b) = int("budget")? {
            plan.budget = b as usize;
        }
        if let Some(v) = t.get("timing") {
            plan.timing = v.as_bool().ok_or_else(|| Error::parse(ctx, "`timing` must be a boolean"))?;
        }
        if let Some(b) = t.get("bounds") {
            let tab = b.as_table().ok_or_else(|| Error::parse(ctx, "`bounds` must be a table"))?;
            for (k, v) in tab {
                let dim: usize = k.parse().map_err(|_| Error::parse(ctx, format!("bounds key `{k}` is not a dimension")))?;
                let pair = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some((num_of(&a[0])?, num_of(&a[1])?)))
                    .ok_or_else(|| Error::parse(ctx, format!("bounds for `{k}` must be [lb, ub]")))?;
                plan.bounds.insert(dim, pair);
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent())
    }
}

fn num_of(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn run_job(plan: &ExperimentPlan, suite: &Suite, job: &Job) -> Result<(RunOutcome, u64)> {
    let config = &plan.configs[job.config];
    let algo = Algorithm::from_configuration(config)?;
    let mut objective = suite.make(job.fid, job.dim, job.iid)?;
    let seed = job_seed(&config.id(), job.fid, job.dim, job.iid, job.rep);
    let start = Instant::now();
    let out = algo.run(objective.as_mut(), plan.budget, seed)?;
    let ms = if plan.timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok((out, ms))
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every job of the plan on `jobs` worker threads. Records stream to
/// `<out>.partial` as they finish; the sorted dataset is then written to
/// `out` atomically and the partial file removed. Failing or panicking jobs
/// become `failed` rows.
pub fn execute(plan: &ExperimentPlan, suite: &Suite, jobs: usize, out: Option<&Path>) -> Result<Dataset> {
    plan.validate()?;
    for &fid in &plan.fids {
        suite.check(fid)?;
    }
    let names: Vec<String> = plan.space.params().iter().map(|p| p.name.clone()).collect();
    let mut dataset = Dataset::new(plan.space.family(), names);
    let partial_path = out.map(|p| {
        let mut s = p.as_os_str().to_owned();
        s.push(".partial");
        PathBuf::from(s)
    });
    let sink = match &partial_path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            writeln!(w, "{}", dataset.header().join(","))?;
            Some(Mutex::new(w))
        }
        None => None,
    };
    let ids: Vec<String> = plan.configs.iter().map(Configuration::id).collect();
    let values: Vec<Vec<String>> =
        plan.configs.iter().map(|c| c.values.iter().map(|(_, v)| v.to_string()).collect()).collect();

    if let Some(dir) = &plan.trajectory_dir {
        fs::create_dir_all(dir)?;
    }
    let all_jobs = plan.jobs();
    let records: Vec<RunRecord> = with_workers(jobs, || {
        all_jobs
            .par_iter()
            .map(|job| {
                let result = catch_unwind(AssertUnwindSafe(|| run_job(plan, suite, job)));
                let (lb, ub) = plan.bounds_for(job.dim);
                let mut rec = RunRecord {
                    config_id: ids[job.config].clone(),
                    family: plan.space.family().to_string(),
                    values: values[job.config].clone(),
                    fid: job.fid,
                    dim: job.dim,
                    iid: job.iid,
                    seed: job.rep,
                    aocc: 0.0,
                    final_gap: f64::NAN,
                    restarts: 0,
                    status: RunStatus::Failed,
                    wall_ms: 0,
                };
                match result {
                    Ok(Ok((outcome, ms))) => {
                        if let Some(dir) = &plan.trajectory_dir {
                            if let Err(e) = write_trajectory(dir, &rec.config_id, job, &outcome.trajectory) {
                                log::warn!("cannot write trajectory of {job:?}: {e}");
                            }
                        }
                        rec.aocc = aocc(&outcome.trajectory, lb, ub).expect("validated bounds");
                        rec.final_gap = outcome.final_value();
                        rec.restarts = outcome.restarts;
                        rec.status = RunStatus::Ok;
                        rec.wall_ms = ms;
                    }
                    Ok(Err(e)) => log::warn!("job {job:?} failed: {e}"),
                    Err(p) => log::warn!("job {job:?} panicked: {}", panic_message(p.as_ref())),
                }
                if let Some(sink) = &sink {
                    let row = Dataset::record_row(&rec).join(",");
                    let mut w = sink.lock().expect("record sink");
                    if let Err(e) = writeln!(w, "{row}").and_then(|_| w.flush()) {
                        log::warn!("cannot stream record: {e}");
                    }
                }
                rec
            })
            .collect()
    })?;
    dataset.records = records;
    dataset.sort();
    if let (Some(out), Some(partial)) = (out, partial_path) {
        drop(sink);
        dataset.save(out)?;
        fs::remove_file(partial)?;
    }
    let failed = dataset.failed_count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", dataset.records.len());
    }
    Ok(dataset)
}

/// File name of a run's trajectory inside the trajectory directory.
pub fn trajectory_file_name(config_id: &str, job: &Job) -> String {
    format!("{config_id}_f{}_d{}_i{}_r{}.csv", job.fid, job.dim, job.iid, job.rep)
}

fn write_trajectory(dir: &Path, config_id: &str, job: &Job, trajectory: &[f64]) -> Result<()> {
    let mut body = String::from("eval_index,best_so_far\n");
    for (i, v) in trajectory.iter().enumerate() {
        body.push_str(&format!("{},{v}\n", i + 1));
    }
    write_atomic(&dir.join(trajectory_file_name(config_id, job)), body.as_bytes())
}

/// Runs `f` on a pool of `jobs` worker threads (at least one).
pub fn with_workers<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Model inputs: encoded parameters followed by `iid` and `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub columns: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Index into `Dataset::records` of every row.
    pub rows: Vec<usize>,
}

/// Builds the feature frame for the successful records of `dataset`,
/// optionally restricted to one `(fid, dim)`.
pub fn feature_frame(dataset: &Dataset, space: &ConfigurationSpace, filter: Option<(u32, usize)>) -> Result<FeatureFrame> {
    if dataset.family != space.family() || dataset.records.iter().any(|r| r.family != dataset.family) {
        return Err(Error::InvalidArgument(format!(
            "dataset family `{}` does not match space family `{}` or is mixed",
            dataset.family,
            space.family()
        )));
    }
    let mut columns: Vec<String> = space.params().iter().map(|p| p.name.clone()).collect();
    if dataset.param_names != columns {
        return Err(Error::InvalidArgument("dataset parameter columns do not match the space".into()));
    }
    columns.push("iid".into());
    columns.push("seed".into());
    let mut cache: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let (mut x, mut y, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, r) in dataset.records.iter().enumerate() {
        if !r.is_ok() || filter.is_some_and(|(f, d)| r.fid != f || r.dim != d) {
            continue;
        }
        let enc = match cache.get(r.config_id.as_str()) {
            Some(e) => e.clone(),
            None => {
                let e = space.encode(&dataset.configuration(r, space)?)?;
                cache.insert(&r.config_id, e.clone());
                e
            }
        };
        let mut row = enc;
        row.push(r.iid as f64);
        row.push(r.seed as f64);
        x.push(row);
        y.push(r.aocc);
        rows.push(i);
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("no successful records to build features from".into()));
    }
    Ok(FeatureFrame { columns, x, y, rows })
}

/// Fingerprint of the encoder column order of the builtin spaces.
pub fn feature_order_hash() -> String {
    let mut h = Sha256::new();
    for fam in BUILTIN_FAMILIES {
        let space = builtin_space(fam).expect("builtin space");
        h.update(fam.as_bytes());
        h.update(b":");
        for p in space.params() {
            h.update(p.name.as_bytes());
            h.update(b",");
        }
        h.update(b"iid,seed;");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}
