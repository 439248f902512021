use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use xplain::analysis::{comparison_csv, comparison_markdown, compare_frameworks, Report};
use xplain::bias::{collect_f0_for, BiasReport, MIN_RUNS};
use xplain::configspace::{Configuration, ConfigurationSpace};
use xplain::ela::{evaluate_aac, fit_wizard, AacResult, AacSettings, CvMode, FeatureTable, ForestParams, Model};
use xplain::gbdt::{explain_dataset, FitParams, ModelReport, SWARM_HEADER};
use xplain::runner::{execute, with_workers, write_atomic, Algorithm, Dataset, ExperimentPlan};
use xplain::suite::Suite;
use xplain::{Error, Result};

use crate::{AacArgs, BiasArgs, Command, CompareArgs, ExplainArgs, RankArgs, ReportArgs, RunArgs, SpaceArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Space(a) => space(a),
        Command::Run(a) => run(a),
        Command::Explain(a) => explain(a),
        Command::Rank(a) => rank(a),
        Command::Compare(a) => compare(a),
        Command::Bias(a) => bias(a),
        Command::Aac(a) => aac(a),
        Command::Report(a) => report(a),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("missing input file `{}`", path.display())))
    }
}

fn load_runs(path: &Path) -> Result<Dataset> {
    require_file(path)?;
    Dataset::load(path)
}

fn load_space(spec: &str) -> Result<ConfigurationSpace> {
    if !spec.starts_with("builtin:") && !xplain::configspace::BUILTIN_FAMILIES.contains(&spec) {
        require_file(Path::new(spec))?;
    }
    ConfigurationSpace::load(spec)
}

/// Space named on the command line, else the built-in space of the run file's family.
fn space_for(dataset: &Dataset, spec: Option<&str>) -> Result<ConfigurationSpace> {
    match spec {
        Some(s) => load_space(s),
        None => xplain::configspace::builtin_space(&dataset.family).ok_or_else(|| {
            invalid(format!("run file family `{}` is not built in; pass --space", dataset.family))
        }),
    }
}

fn jobs_or_default(jobs: Option<usize>) -> Result<usize> {
    match jobs {
        Some(0) => Err(invalid("--jobs must be at least 1")),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    write_atomic(&dir.join(name), body.as_bytes())
}

fn configs_csv(space: &ConfigurationSpace, configs: &[Configuration]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("config_id").chain(space.params().iter().map(|p| p.name.as_str())).collect();
    w.write_record(&header)?;
    for c in configs {
        let row: Vec<String> = std::iter::once(c.id()).chain(c.values.iter().map(|(_, v)| v.to_string())).collect();
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn space(a: SpaceArgs) -> Result<()> {
    let space = load_space(&a.file)?;
    let text = if a.count {
        format!("{}\n", space.grid_size())
    } else if let Some(n) = a.sample {
        if n == 0 {
            return Err(invalid("--sample needs a positive count"));
        }
        configs_csv(&space, &space.sample_random(n, a.seed)?)?
    } else {
        configs_csv(&space, &space.enumerate_grid())?
    };
    match a.out {
        Some(p) => write_atomic(&p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(a: RunArgs) -> Result<()> {
    require_file(&a.plan)?;
    let mut plan = ExperimentPlan::from_file(&a.plan)?;
    plan.validate()?;
    let jobs = jobs_or_default(a.jobs)?;
    plan.trajectory_dir = a.trajectories;
    log::info!("{} runs on {jobs} workers", plan.job_count());
    let dataset = execute(&plan, &Suite::bbob(), jobs, Some(&a.out))?;
    println!(
        "{} runs ({} failed) written to {}",
        dataset.records.len(),
        dataset.failed_count(),
        a.out.display()
    );
    Ok(())
}

fn fit_params(trees: usize, depth: usize, eta: f64) -> Result<FitParams> {
    if trees == 0 || depth == 0 || !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("--trees and --depth must be positive and --eta in (0, 1]"));
    }
    Ok(FitParams { n_trees: trees, max_depth: depth, learning_rate: eta, ..FitParams::default() })
}

/// Writes models, attributions and importances; returns a Markdown summary.
fn write_explanations(reports: &[ModelReport], dir: &Path, svg: bool) -> Result<String> {
    fs::create_dir_all(dir)?;
    let mut swarm = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut swarm);
        w.write_record(SWARM_HEADER)?;
        w.flush()?;
    }
    let mut importance = String::from("fid,dim,rank,feature,mean_abs_shap\n");
    let mut models = String::from("fid,dim,records,trees,r2\n");
    let mut md = String::from("| fid | dim | R² | top features |\n|---|---|---|---|\n");
    for r in reports {
        let stem = format!("f{}_d{}", r.fid, r.dim);
        write(dir, &format!("model_{stem}.json"), &r.ensemble.to_json())?;
        r.swarm.write_csv(&mut swarm, false)?;
        for (i, f) in r.swarm.ranking.iter().enumerate() {
            let _ = writeln!(importance, "{},{},{},{},{}", r.fid, r.dim, i + 1, f.feature, f.mean_abs_shap);
        }
        let n = r.swarm.rows.len() / r.swarm.ranking.len().max(1);
        let _ = writeln!(models, "{},{},{n},{},{}", r.fid, r.dim, r.ensemble.trees.len(), r.r2);
        let top: Vec<&str> = r.swarm.ranking.iter().take(3).map(|f| f.feature.as_str()).collect();
        let _ = writeln!(md, "| f{} | {} | {:.3} | {} |", r.fid, r.dim, r.r2, top.join(", "));
        if svg {
            write(dir, &format!("swarm_{stem}.svg"), &crate::svg::swarm_plot(&r.swarm))?;
        }
    }
    write_atomic(&dir.join("swarm.csv"), &swarm)?;
    write(dir, "importance.csv", &importance)?;
    write(dir, "models.csv", &models)?;
    Ok(md)
}

fn explain(a: ExplainArgs) -> Result<()> {
    let dataset = load_runs(&a.runs)?;
    let space = space_for(&dataset, a.space.as_deref())?;
    let params = fit_params(a.trees, a.depth, a.eta)?;
    let jobs = jobs_or_default(a.jobs)?;
    let reports = with_workers(jobs, || explain_dataset(&dataset, &space, &params))??;
    write_explanations(&reports, &a.out_dir, a.svg)?;
    for r in &reports {
        println!("f{} d={}: R² {:.4}", r.fid, r.dim, r.r2);
    }
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let dataset = load_runs(&a.runs)?;
    if a.top == 0 {
        return Err(invalid("--top must be positive"));
    }
    let report = Report::build(&dataset, a.top)?;
    report.write(&a.out_dir)?;
    println!("ranking report written to {}", a.out_dir.display());
    Ok(())
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Comparison Markdown and CSV over the requested or shared dimensions.
fn comparison(a: &Dataset, b: &Dataset, dim: Option<usize>, labels: (&str, &str)) -> Result<(String, String)> {
    let dims: Vec<usize> = match dim {
        Some(d) => vec![d],
        None => a.dims().into_iter().filter(|d| b.dims().contains(d)).collect(),
    };
    if dims.is_empty() {
        return Err(invalid("the run files share no dimension"));
    }
    let mut rows = Vec::new();
    for d in dims {
        rows.extend(compare_frameworks(a, b, d)?);
    }
    Ok((comparison_markdown(&rows, labels.0, labels.1), comparison_csv(&rows)))
}

fn compare(a: CompareArgs) -> Result<()> {
    let da = load_runs(&a.a)?;
    let db = load_runs(&a.b)?;
    let (la, lb) = (label(&a.a), label(&a.b));
    let (md, csv) = comparison(&da, &db, a.dim, (&la, &lb))?;
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        write(dir, "comparison.md", &md)?;
        write(dir, "comparison.csv", &csv)?;
    }
    print!("{md}");
    Ok(())
}

fn find_config(space: &ConfigurationSpace, id: &str) -> Result<Configuration> {
    if id == "default" {
        return Ok(space.default_configuration());
    }
    space
        .enumerate_grid()
        .into_iter()
        .find(|c| c.id() == id)
        .ok_or_else(|| invalid(format!("config-id `{id}` is not in the {} space", space.family())))
}

struct BiasRequest {
    dim: usize,
    runs: usize,
    budget: usize,
    seed: u64,
    alpha: f64,
    jobs: usize,
}

impl BiasRequest {
    fn check(&self) -> Result<()> {
        if self.runs < MIN_RUNS {
            return Err(invalid(format!("--runs must be at least {MIN_RUNS}")));
        }
        if self.dim < 2 || self.budget == 0 {
            return Err(invalid("--dim must be at least 2 and --budget positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("--alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    fn run(&self, config: &Configuration) -> Result<BiasReport> {
        let algo = Algorithm::from_configuration(config)?;
        let positions = with_workers(self.jobs, || collect_f0_for(&algo, self.dim, self.runs, self.budget, self.seed))??;
        BiasReport::from_positions(&config.id(), &positions, self.alpha)
    }
}

fn bias_csv(reports: &[BiasReport]) -> String {
    let mut s = BiasReport::CSV_HEADER.join(",");
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row().join(","));
        s.push('\n');
    }
    s
}

fn write_bias(dir: &Path, reports: &[BiasReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(dir, "bias.csv", &bias_csv(reports))?;
    for r in reports {
        write(dir, &format!("bias_{}.json", r.config_id), &r.histogram_json())?;
    }
    Ok(())
}

fn bias(a: BiasArgs) -> Result<()> {
    let space = load_space(&a.space)?;
    let req = BiasRequest {
        dim: a.dim,
        runs: a.runs,
        budget: a.budget,
        seed: a.seed,
        alpha: a.alpha,
        jobs: jobs_or_default(a.jobs)?,
    };
    req.check()?;
    let config = find_config(&space, &a.config_id)?;
    let report = req.run(&config)?;
    if let Some(dir) = &a.out_dir {
        write_bias(dir, std::slice::from_ref(&report))?;
    }
    println!(
        "{}: {} (min p {:.3e}, {} of {} coordinates rejected)",
        report.config_id,
        report.verdict.as_str(),
        report.min_p(),
        report.rejected_dims(),
        report.dim
    );
    Ok(())
}

fn aac_settings(depth: usize, trees: usize, seed: u64) -> Result<AacSettings> {
    if depth == 0 || trees == 0 {
        return Err(invalid("--depth and --trees must be positive"));
    }
    Ok(AacSettings { max_depth: depth, forest: ForestParams { n_trees: trees, ..ForestParams::default() }, seed })
}

/// Loads the feature table, computing it for the run file's instances when
/// the file does not exist yet.
fn features_for(dataset: &Dataset, path: &Path, doe: usize, seed: u64) -> Result<FeatureTable> {
    if path.is_file() {
        return FeatureTable::load(path);
    }
    if doe < 2 {
        return Err(invalid("--doe must be at least 2"));
    }
    let mut keys: Vec<(u32, usize, u32)> = dataset.ok_records().map(|r| (r.fid, r.dim, r.iid)).collect();
    keys.sort_unstable();
    keys.dedup();
    log::info!("computing landscape features for {} instances", keys.len());
    let table = FeatureTable::compute(&Suite::bbob(), &keys, doe, seed)?;
    table.save(path)?;
    Ok(table)
}

fn write_aac(dir: &Path, result: &AacResult, mode: CvMode) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(dir, &format!("aac_loss_{}.csv", mode.as_str()), &result.loss_csv())?;
    write(dir, &format!("aac_summary_{}.csv", mode.as_str()), &result.summary_csv())
}

fn aac_markdown(result: &AacResult) -> String {
    let mut md = String::from("| mode | model | mean loss | units | fallbacks |\n|---|---|---|---|---|\n");
    for s in &result.summary {
        let _ = writeln!(md, "| {} | {} | {:.4} | {} | {} |", s.mode.as_str(), s.model, s.mean_loss, s.units, s.fallbacks);
    }
    md
}

fn aac(a: AacArgs) -> Result<()> {
    let mode = CvMode::parse(&a.mode).ok_or_else(|| invalid(format!("--mode must be lofo or loio, got `{}`", a.mode)))?;
    let dataset = load_runs(&a.runs)?;
    let space = space_for(&dataset, a.space.as_deref())?;
    let settings = aac_settings(a.depth, a.trees, a.seed)?;
    let features = features_for(&dataset, &a.features, a.doe, a.seed)?;
    let result = evaluate_aac(&dataset, &space, &features, mode, &Model::ALL, &settings)?;
    if let Some(dir) = &a.out_dir {
        write_aac(dir, &result, mode)?;
        let tree = fit_wizard(&dataset, &space, &features, a.depth)?;
        write(dir, "wizard.txt", &tree.to_text())?;
        write(dir, "wizard.json", &tree.to_json())?;
    }
    print!("{}", aac_markdown(&result));
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let dataset = load_runs(&a.runs)?;
    let space = space_for(&dataset, a.space.as_deref())?;
    let other = a.compare.as_deref().map(load_runs).transpose()?;
    if let Some(f) = &a.features {
        require_file(f)?;
    }
    let jobs = jobs_or_default(a.jobs)?;
    let bias_req = a.bias_runs.map(|runs| BiasRequest {
        dim: 0,
        runs,
        budget: xplain::bias::DEFAULT_BUDGET,
        seed: a.seed,
        alpha: xplain::bias::DEFAULT_ALPHA,
        jobs,
    });
    if let Some(r) = &bias_req {
        BiasRequest { dim: 2, ..*r }.check()?;
    }
    if a.top == 0 {
        return Err(invalid("--top must be positive"));
    }

    let out = &a.out_dir;
    fs::create_dir_all(out)?;
    let mut index = format!("# Benchmark report\n\nRun file: `{}` ({} family, {} runs).\n\n", a.runs.display(), dataset.family, dataset.records.len());

    let ranking = Report::build(&dataset, a.top)?;
    ranking.write(&out.join("rank"))?;
    index.push_str("## Ranking\n\nSee [rank/report.md](rank/report.md).\n\n");

    let reports = with_workers(jobs, || explain_dataset(&dataset, &space, &FitParams::default()))??;
    let md = write_explanations(&reports, &out.join("explain"), a.svg)?;
    let _ = write!(index, "## Explanations\n\n{md}\nModels and SHAP values are in `explain/`.\n\n");

    if let Some(b) = &other {
        let lb = label(a.compare.as_deref().expect("compare path"));
        let (md, csv) = comparison(&dataset, b, None, (&label(&a.runs), &lb))?;
        let dir = out.join("compare");
        fs::create_dir_all(&dir)?;
        write(&dir, "comparison.md", &md)?;
        write(&dir, "comparison.csv", &csv)?;
        let _ = write!(index, "## Comparison\n\n{md}\n");
    }

    if let Some(f) = &a.features {
        let features = FeatureTable::load(f)?;
        let dir = out.join("aac");
        index.push_str("## Algorithm configuration\n\n");
        for mode in [CvMode::Lofo, CvMode::Loio] {
            match evaluate_aac(&dataset, &space, &features, mode, &Model::ALL, &AacSettings { seed: a.seed, ..AacSettings::default() }) {
                Ok(result) => {
                    write_aac(&dir, &result, mode)?;
                    index.push_str(&aac_markdown(&result));
                    index.push('\n');
                }
                Err(e) if e.is_validation() => {
                    let _ = writeln!(index, "{} skipped: {e}\n", mode.as_str());
                }
                Err(e) => return Err(e),
            }
        }
    }

    if let Some(req) = bias_req {
        let mut results = Vec::new();
        for dim in dataset.dims() {
            let best = xplain::analysis::avg_best(&dataset, dim)?;
            let config = dataset
                .records
                .iter()
                .find(|r| r.config_id == best.config_id)
                .map(|r| dataset.configuration(r, &space))
                .expect("avg-best config has runs")?;
            results.push(BiasRequest { dim, ..req }.run(&config)?);
        }
        write_bias(&out.join("bias"), &results)?;
        index.push_str("## Structural bias of the avg-best configurations\n\n| dim | config | verdict | min p |\n|---|---|---|---|\n");
        for r in &results {
            let _ = writeln!(index, "| {} | `{}` | {} | {:.3e} |", r.dim, r.config_id, r.verdict.as_str(), r.min_p());
        }
        index.push('\n');
    }

    write(out, "index.md", &index)?;
    println!("report written to {}", out.display());
    Ok(())
}
