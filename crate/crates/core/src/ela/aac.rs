//! Automated algorithm configuration from landscape features, scored by
//! leave-one-function-out or leave-one-instance-out cross-validation.
//!
//! The label of an instance `(fid, dim, iid)` is its single-best
//! configuration. The loss of a prediction is the single-best mean AOCC
//! minus the mean AOCC recorded for the predicted configuration on the
//! held-out instance.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;

use super::features::FeatureTable;
use super::tree::{fit_forest, fit_tree, ForestParams, MultiOutputTree, DEFAULT_MAX_DEPTH};
use super::FEATURE_NAMES;
use crate::configspace::{Configuration, ConfigurationSpace};
use crate::error::{Error, Result};
use crate::rng::{mix_seed, rng_from_seed};
use crate::runner::Dataset;

pub type InstanceKey = (u32, usize, u32);

/// Mean AOCC per configuration on every instance.
#[derive(Clone, Debug)]
pub struct InstanceTable {
    pub means: BTreeMap<InstanceKey, BTreeMap<String, f64>>,
    pub configs: BTreeMap<String, Configuration>,
}

impl InstanceTable {
    pub fn new(dataset: &Dataset, space: &ConfigurationSpace) -> Result<Self> {
        if dataset.family != space.family() {
            return Err(Error::InvalidArgument(format!(
                "dataset family `{}` does not match space `{}`",
                dataset.family,
                space.family()
            )));
        }
        let mut sums: BTreeMap<InstanceKey, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
        let mut configs = BTreeMap::new();
        for r in dataset.ok_records() {
            let e = sums.entry((r.fid, r.dim, r.iid)).or_default().entry(r.config_id.clone()).or_insert((0.0, 0));
            e.0 += r.aocc;
            e.1 += 1;
            if !configs.contains_key(&r.config_id) {
                configs.insert(r.config_id.clone(), dataset.configuration(r, space)?);
            }
        }
        if sums.is_empty() {
            return Err(Error::InvalidArgument("dataset has no successful runs".into()));
        }
        let means = sums
            .into_iter()
            .map(|(k, m)| (k, m.into_iter().map(|(id, (s, n))| (id, s / n as f64)).collect()))
            .collect();
        Ok(InstanceTable { means, configs })
    }

    /// Best config-id and its mean; ties go to the lowest id.
    pub fn single_best(&self, key: InstanceKey) -> Option<(&str, f64)> {
        self.means.get(&key)?.iter().fold(None, |best, (id, &m)| match best {
            Some((_, bm)) if m <= bm => best,
            _ => Some((id.as_str(), m)),
        })
    }

    /// Recorded AOCC of `config` on `key`, or of the closest recorded
    /// configuration (flagged as a fallback) when it was never run there.
    pub fn lookup(&self, key: InstanceKey, config: &Configuration) -> Result<Lookup> {
        let means = self.means.get(&key).ok_or_else(|| Error::InvalidArgument(format!("no runs for instance {key:?}")))?;
        let id = config.id();
        if let Some(&aocc) = means.get(&id) {
            return Ok(Lookup { config_id: id, aocc, fallback: false });
        }
        let distance = |cid: &str| {
            self.configs[cid].values.iter().zip(&config.values).filter(|(a, b)| a.1 != b.1).count()
        };
        let (cid, &aocc) = means
            .iter()
            .min_by(|a, b| distance(a.0).cmp(&distance(b.0)).then_with(|| a.0.cmp(b.0)))
            .expect("instances hold at least one configuration");
        Ok(Lookup { config_id: cid.clone(), aocc, fallback: true })
    }
}

/// Result of [`InstanceTable::lookup`].
#[derive(Clone, Debug, PartialEq)]
pub struct Lookup {
    pub config_id: String,
    pub aocc: f64,
    pub fallback: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CvMode {
    Lofo,
    Loio,
}

impl CvMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lofo" => Some(CvMode::Lofo),
            "loio" => Some(CvMode::Loio),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CvMode::Lofo => "lofo",
            CvMode::Loio => "loio",
        }
    }
}

/// Predictors compared in the loss table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Model {
    /// Single multi-output decision tree.
    Tree,
    /// Bagged forest of multi-output trees.
    Forest,
    /// Avg-best configuration of the training instances.
    AvgBest,
    /// A uniformly drawn configuration recorded on the test instance.
    Random,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Tree, Model::Forest, Model::AvgBest, Model::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Tree => "DT",
            Model::Forest => "RF",
            Model::AvgBest => "AB",
            Model::Random => "RAND",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AacSettings {
    pub max_depth: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for AacSettings {
    fn default() -> Self {
        AacSettings { max_depth: DEFAULT_MAX_DEPTH, forest: ForestParams::default(), seed: 0 }
    }
}

/// Loss of one model on one held-out instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRow {
    pub mode: CvMode,
    /// Held-out fid (LOFO) or iid (LOIO).
    pub fold: u32,
    pub fid: u32,
    pub dim: usize,
    pub iid: u32,
    pub model: Model,
    pub config_id: String,
    pub predicted_aocc: f64,
    pub single_best_aocc: f64,
    pub loss: f64,
    pub fallback: bool,
}

/// Mean loss per model.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSummary {
    pub mode: CvMode,
    pub model: Model,
    pub mean_loss: f64,
    pub units: usize,
    pub fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AacResult {
    pub rows: Vec<LossRow>,
    pub summary: Vec<LossSummary>,
}

pub const LOSS_HEADER: [&str; 11] =
    ["mode", "fold", "fid", "dim", "iid", "model", "config_id", "predicted_aocc", "single_best_aocc", "loss", "fallback"];

impl AacResult {
    fn summarize(rows: &[LossRow]) -> Vec<LossSummary> {
        let mut acc: BTreeMap<(CvMode, Model), (f64, usize, usize)> = BTreeMap::new();
        for r in rows {
            let e = acc.entry((r.mode, r.model)).or_default();
            e.0 += r.loss;
            e.1 += 1;
            e.2 += r.fallback as usize;
        }
        acc.into_iter()
            .map(|((mode, model), (s, n, fb))| LossSummary { mode, model, mean_loss: s / n as f64, units: n, fallbacks: fb })
            .collect()
    }

    pub fn loss_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(LOSS_HEADER).expect("writing to memory");
        for r in &self.rows {
            w.write_record([
                r.mode.as_str().to_string(),
                r.fold.to_string(),
                r.fid.to_string(),
                r.dim.to_string(),
                r.iid.to_string(),
                r.model.to_string(),
                r.config_id.clone(),
                r.predicted_aocc.to_string(),
                r.single_best_aocc.to_string(),
                r.loss.to_string(),
                r.fallback.to_string(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("mode,model,mean_loss,units,fallbacks\n");
        for r in &self.summary {
            s.push_str(&format!("{},{},{},{},{}\n", r.mode.as_str(), r.model, r.mean_loss, r.units, r.fallbacks));
        }
        s
    }

    pub fn mean_loss(&self, mode: CvMode, model: Model) -> Option<f64> {
        self.summary.iter().find(|s| s.mode == mode && s.model == model).map(|s| s.mean_loss)
    }
}

/// Avg-best over `keys`: highest mean of per-instance means among configs
/// recorded on every key.
fn avg_best_over<'a>(table: &'a InstanceTable, keys: &[InstanceKey]) -> Option<&'a str> {
    let first = table.means.get(keys.first()?)?;
    let mut best: Option<(&str, f64)> = None;
    for id in first.keys() {
        let vals: Option<Vec<f64>> = keys.iter().map(|k| table.means[k].get(id).copied()).collect();
        if let Some(v) = vals {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((id, m));
            }
        }
    }
    best.map(|(id, _)| id)
}

/// Cross-validated losses of every model in `models`.
pub fn evaluate_aac(
    dataset: &Dataset,
    space: &ConfigurationSpace,
    features: &FeatureTable,
    mode: CvMode,
    models: &[Model],
    settings: &AacSettings,
) -> Result<AacResult> {
    let table = InstanceTable::new(dataset, space)?;
    let keys: Vec<InstanceKey> = table.means.keys().copied().collect();
    for &(fid, dim, iid) in &keys {
        if features.get(fid, dim, iid).is_none() {
            return Err(Error::InvalidArgument(format!("no features for f{fid} d={dim} iid={iid}")));
        }
    }
    let fold_of = |k: &InstanceKey| match mode {
        CvMode::Lofo => k.0,
        CvMode::Loio => k.2,
    };
    let mut folds: Vec<u32> = keys.iter().map(fold_of).collect();
    folds.sort_unstable();
    folds.dedup();
    if folds.len() < 2 {
        return Err(Error::InvalidArgument(format!("{} needs at least two folds", mode.as_str())));
    }
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let feat = |k: &InstanceKey| features.get(k.0, k.1, k.2).expect("checked above").values.clone();
    let mut rows = Vec::new();
    for fold in folds {
        let (test, train): (Vec<InstanceKey>, Vec<InstanceKey>) = keys.iter().partition(|k| fold_of(k) == fold);
        if train.len() < 2 {
            log::warn!("{} fold {fold} has fewer than two training instances; skipped", mode.as_str());
            continue;
        }
        let x: Vec<Vec<f64>> = train.iter().map(feat).collect();
        let labels: Vec<Configuration> = train
            .iter()
            .map(|k| table.configs[table.single_best(*k).expect("instance has runs").0].clone())
            .collect();
        let tree = if models.contains(&Model::Tree) { Some(fit_tree(space, &names, &x, &labels, settings.max_depth)?) } else { None };
        let forest = if models.contains(&Model::Forest) {
            Some(fit_forest(space, &names, &x, &labels, &settings.forest, mix_seed(&[settings.seed, fold as u64]))?)
        } else {
            None
        };
        let ab = avg_best_over(&table, &train).map(|id| table.configs[id].clone());
        for key in &test {
            let (_, best) = table.single_best(*key).expect("instance has runs");
            let fx = feat(key);
            for &model in models {
                let predicted = match model {
                    Model::Tree => tree.as_ref().expect("fitted").predict(&fx).clone(),
                    Model::Forest => forest.as_ref().expect("fitted").predict(&fx)?,
                    Model::AvgBest => match &ab {
                        Some(c) => c.clone(),
                        None => {
                            log::warn!("no configuration was run on every training instance of fold {fold}");
                            continue;
                        }
                    },
                    Model::Random => {
                        let ids: Vec<&String> = table.means[key].keys().collect();
                        let mut rng = rng_from_seed(mix_seed(&[settings.seed, fold as u64, key.0 as u64, key.1 as u64, key.2 as u64]));
                        table.configs[ids[rng.random_range(0..ids.len())]].clone()
                    }
                };
                let hit = table.lookup(*key, &predicted)?;
                rows.push(LossRow {
                    mode,
                    fold,
                    fid: key.0,
                    dim: key.1,
                    iid: key.2,
                    model,
                    config_id: hit.config_id,
                    predicted_aocc: hit.aocc,
                    single_best_aocc: best,
                    loss: best - hit.aocc,
                    fallback: hit.fallback,
                });
            }
        }
    }
    let summary = AacResult::summarize(&rows);
    Ok(AacResult { rows, summary })
}

/// Tree fitted on every instance of `dataset`, mapping features to the
/// single-best configuration.
pub fn fit_wizard(dataset: &Dataset, space: &ConfigurationSpace, features: &FeatureTable, max_depth: usize) -> Result<MultiOutputTree> {
    let table = InstanceTable::new(dataset, space)?;
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for key in table.means.keys() {
        let f = features
            .get(key.0, key.1, key.2)
            .ok_or_else(|| Error::InvalidArgument(format!("no features for f{} d={} iid={}", key.0, key.1, key.2)))?;
        x.push(f.values.clone());
        labels.push(table.configs[table.single_best(*key).expect("instance has runs").0].clone());
    }
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    fit_tree(space, &names, &x, &labels, max_depth)
}
