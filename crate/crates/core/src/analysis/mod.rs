//! Rankings, gains, significance and module effects over run records.
//!
//! Per-function means pool every instance and repetition equally. Ties in
//! any argmax go to the lexicographically lowest config-id. Significance
//! compares per-run AOCC samples.

mod report;
mod stats;

use std::collections::BTreeMap;

pub use report::{comparison_csv, comparison_markdown, effects_csv, hall_of_fame_csv, ranking_csv, summary_csv, Report};
pub use stats::{improves, mann_whitney, mann_whitney_exact, mann_whitney_normal, u_statistic, ALPHA, EXACT_MAX_N};

use crate::error::{Error, Result};
use crate::num::{mean, sample_std};
use crate::runner::Dataset;

/// AOCC samples per config-id for one `(fid, dim)`.
pub type Runs = BTreeMap<String, Vec<f64>>;

/// Successful runs on `(fid, dim)` grouped by configuration.
pub fn runs(dataset: &Dataset, fid: u32, dim: usize) -> Runs {
    let mut out = Runs::new();
    for r in dataset.ok_records().filter(|r| r.fid == fid && r.dim == dim) {
        out.entry(r.config_id.clone()).or_default().push(r.aocc);
    }
    out
}

/// Fids with successful runs in dimension `dim`.
pub fn fids_in(dataset: &Dataset, dim: usize) -> Vec<u32> {
    let mut f: Vec<u32> = dataset.ok_records().filter(|r| r.dim == dim).map(|r| r.fid).collect();
    f.sort_unstable();
    f.dedup();
    f
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Stat { mean: mean(xs), std: sample_std(xs) }
    }
}

/// Argmax entry of a ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub config_id: String,
    pub stat: Stat,
}

/// Highest mean; ties keep the first (lowest) id because the map is ordered.
fn argmax<'a>(it: impl Iterator<Item = (&'a String, f64)>) -> Option<(&'a String, f64)> {
    it.fold(None, |best, (id, m)| match best {
        Some((_, bm)) if m <= bm => best,
        _ => Some((id, m)),
    })
}

fn no_runs(what: &str) -> Error {
    Error::InvalidArgument(format!("no successful runs for {what}"))
}

/// Configuration with the highest mean AOCC on `(fid, dim)`.
pub fn single_best(dataset: &Dataset, fid: u32, dim: usize) -> Result<Best> {
    let r = runs(dataset, fid, dim);
    let (id, _) = argmax(r.iter().map(|(k, v)| (k, mean(v)))).ok_or_else(|| no_runs(&format!("f{fid} d={dim}")))?;
    Ok(Best { config_id: id.clone(), stat: Stat::of(&r[id]) })
}

/// Configuration with the highest mean over fids of its per-fid mean.
#[derive(Clone, Debug, PartialEq)]
pub struct AvgBest {
    pub config_id: String,
    /// Mean over fids of per-fid means.
    pub score: f64,
    pub per_fid: BTreeMap<u32, Stat>,
}

/// Per-config means averaged over fids; configs missing a fid are skipped.
pub fn across_fid_means(dataset: &Dataset, dim: usize) -> BTreeMap<String, f64> {
    let fids = fids_in(dataset, dim);
    let per: Vec<Runs> = fids.iter().map(|&f| runs(dataset, f, dim)).collect();
    let mut out = BTreeMap::new();
    if let Some(first) = per.first() {
        for id in first.keys() {
            let means: Option<Vec<f64>> = per.iter().map(|r| r.get(id).map(|v| mean(v))).collect();
            if let Some(m) = means {
                out.insert(id.clone(), mean(&m));
            }
        }
    }
    out
}

pub fn avg_best(dataset: &Dataset, dim: usize) -> Result<AvgBest> {
    let scores = across_fid_means(dataset, dim);
    let (id, score) =
        argmax(scores.iter().map(|(k, v)| (k, *v))).ok_or_else(|| no_runs(&format!("any configuration on every fid at d={dim}")))?;
    let per_fid = fids_in(dataset, dim).into_iter().map(|f| (f, Stat::of(&runs(dataset, f, dim)[id]))).collect();
    Ok(AvgBest { config_id: id.clone(), score, per_fid })
}

/// Summary gains for one dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gains {
    pub avg_performance: f64,
    pub gain_avg_best: f64,
    pub gain_single_best: f64,
}

pub fn gains(dataset: &Dataset, dim: usize) -> Result<Gains> {
    let all: Vec<f64> = dataset.ok_records().filter(|r| r.dim == dim).map(|r| r.aocc).collect();
    if all.is_empty() {
        return Err(no_runs(&format!("d={dim}")));
    }
    let ab = avg_best(dataset, dim)?;
    let fids = fids_in(dataset, dim);
    let (mut g_ab, mut g_sb) = (Vec::new(), Vec::new());
    for &f in &fids {
        let pooled: Vec<f64> = runs(dataset, f, dim).into_values().flatten().collect();
        let all_mean = mean(&pooled);
        g_ab.push(ab.per_fid[&f].mean - all_mean);
        g_sb.push(single_best(dataset, f, dim)?.stat.mean - all_mean);
    }
    Ok(Gains { avg_performance: mean(&all), gain_avg_best: mean(&g_ab), gain_single_best: mean(&g_sb) })
}

/// One row of the ranking table.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingRow {
    pub fid: u32,
    pub dim: usize,
    pub single_best: Best,
    pub avg_best: Best,
    pub all: Stat,
    /// Single-best improves significantly on avg-best.
    pub single_beats_avg: bool,
    /// Avg-best improves significantly on the pool of all configurations.
    pub avg_beats_all: bool,
}

pub fn ranking_table(dataset: &Dataset, dim: usize) -> Result<Vec<RankingRow>> {
    let ab = avg_best(dataset, dim)?;
    fids_in(dataset, dim)
        .into_iter()
        .map(|fid| {
            let r = runs(dataset, fid, dim);
            let sb = single_best(dataset, fid, dim)?;
            let pooled: Vec<f64> = r.values().flatten().copied().collect();
            let (sb_runs, ab_runs) = (&r[&sb.config_id], &r[&ab.config_id]);
            Ok(RankingRow {
                fid,
                dim,
                single_beats_avg: improves(sb_runs, ab_runs)?,
                avg_beats_all: improves(ab_runs, &pooled)?,
                avg_best: Best { config_id: ab.config_id.clone(), stat: ab.per_fid[&fid] },
                single_best: sb,
                all: Stat::of(&pooled),
            })
        })
        .collect()
}

/// Effect of one parameter choice, or `None` when no matched alternative
/// exists in the data.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectDelta {
    pub config_id: String,
    pub module: String,
    pub option: String,
    pub delta: Option<f64>,
}

pub const NOT_ESTIMABLE: &str = "not-estimable";

impl EffectDelta {
    pub fn display_delta(&self) -> String {
        self.delta.map_or_else(|| NOT_ESTIMABLE.to_string(), |d| format!("{d:+.4}"))
    }
}

/// Parameter values per config-id, as written in the records.
pub fn config_values(dataset: &Dataset) -> BTreeMap<String, Vec<String>> {
    dataset.records.iter().map(|r| (r.config_id.clone(), r.values.clone())).collect()
}

/// For every parameter: score of `config_id` minus the mean score of the
/// configurations that differ from it in that parameter only.
pub fn effects_from_scores(
    names: &[String],
    values: &BTreeMap<String, Vec<String>>,
    scores: &BTreeMap<String, f64>,
    config_id: &str,
) -> Result<Vec<EffectDelta>> {
    let own = values.get(config_id).ok_or_else(|| Error::InvalidArgument(format!("unknown config-id `{config_id}`")))?;
    let score = *scores.get(config_id).ok_or_else(|| no_runs(&format!("config `{config_id}`")))?;
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let alts: Vec<f64> = scores
                .iter()
                .filter(|(id, _)| {
                    let v = &values[*id];
                    v[j] != own[j] && v.iter().zip(own).enumerate().all(|(k, (a, b))| k == j || a == b)
                })
                .map(|(_, s)| *s)
                .collect();
            EffectDelta {
                config_id: config_id.to_string(),
                module: name.clone(),
                option: own[j].clone(),
                delta: (!alts.is_empty()).then(|| score - mean(&alts)),
            }
        })
        .collect())
}

/// Module effects of `config_id` on `(fid, dim)`.
pub fn module_effects(dataset: &Dataset, config_id: &str, fid: u32, dim: usize) -> Result<Vec<EffectDelta>> {
    let scores: BTreeMap<String, f64> = runs(dataset, fid, dim).into_iter().map(|(k, v)| (k, mean(&v))).collect();
    effects_from_scores(&dataset.param_names, &config_values(dataset), &scores, config_id)
}

/// Top configurations of one dimension by across-fid mean, with their
/// module effects on the same scale.
#[derive(Clone, Debug, PartialEq)]
pub struct HallOfFameEntry {
    pub rank: usize,
    pub config_id: String,
    pub score: f64,
    pub values: Vec<String>,
    pub effects: Vec<EffectDelta>,
}

pub fn hall_of_fame(dataset: &Dataset, dim: usize, k: usize) -> Result<Vec<HallOfFameEntry>> {
    let scores = across_fid_means(dataset, dim);
    let values = config_values(dataset);
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (id, score))| {
            Ok(HallOfFameEntry {
                rank: i + 1,
                config_id: id.clone(),
                score,
                values: values[id].clone(),
                effects: effects_from_scores(&dataset.param_names, &values, &scores, id)?,
            })
        })
        .collect()
}

/// Which side of a comparison, if any, is significantly better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Neither,
}

impl Winner {
    pub fn of(a: &[f64], b: &[f64]) -> Result<Self> {
        Ok(if improves(a, b)? {
            Winner::A
        } else if improves(b, a)? {
            Winner::B
        } else {
            Winner::Neither
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Winner::A => "a",
            Winner::B => "b",
            Winner::Neither => "-",
        }
    }
}

/// Side-by-side statistics of two frameworks on one function.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub fid: u32,
    pub dim: usize,
    /// Single-best, avg-best and all-configurations statistics.
    pub a: [Stat; 3],
    pub b: [Stat; 3],
    pub winner: [Winner; 3],
}

pub const COMPARISON_COLUMNS: [&str; 3] = ["single_best", "avg_best", "all"];

fn framework_samples(dataset: &Dataset, fid: u32, dim: usize, ab_id: &str) -> Result<[Vec<f64>; 3]> {
    let r = runs(dataset, fid, dim);
    let sb = single_best(dataset, fid, dim)?;
    let ab = r.get(ab_id).cloned().ok_or_else(|| no_runs(&format!("avg-best `{ab_id}` on f{fid}")))?;
    Ok([r[&sb.config_id].clone(), ab, r.values().flatten().copied().collect()])
}

/// Per shared fid, compares the single-best, avg-best and pooled runs.
pub fn compare_frameworks(a: &Dataset, b: &Dataset, dim: usize) -> Result<Vec<ComparisonRow>> {
    let fb = fids_in(b, dim);
    let shared: Vec<u32> = fids_in(a, dim).into_iter().filter(|f| fb.contains(f)).collect();
    if shared.is_empty() {
        return Err(Error::InvalidArgument(format!("the datasets share no function at d={dim}")));
    }
    let (aba, abb) = (avg_best(a, dim)?, avg_best(b, dim)?);
    shared
        .into_iter()
        .map(|fid| {
            let sa = framework_samples(a, fid, dim, &aba.config_id)?;
            let sb = framework_samples(b, fid, dim, &abb.config_id)?;
            let mut winner = [Winner::Neither; 3];
            for k in 0..3 {
                winner[k] = Winner::of(&sa[k], &sb[k])?;
            }
            Ok(ComparisonRow {
                fid,
                dim,
                a: [Stat::of(&sa[0]), Stat::of(&sa[1]), Stat::of(&sa[2])],
                b: [Stat::of(&sb[0]), Stat::of(&sb[1]), Stat::of(&sb[2])],
                winner,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
