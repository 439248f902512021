//! Multi-output decision trees that map landscape features to a full
//! configuration, and bagged forests of them.
//!
//! Each configuration parameter is one output. Numeric outputs without
//! inactive values use variance impurity, everything else Gini impurity.
//! Both are normalized to [0, 1] by their maximum over the training labels
//! and averaged over outputs. Samples go left when `x[f] < threshold`.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::Serialize;

use crate::configspace::{Configuration, ConfigurationSpace, Value};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const DEFAULT_MAX_DEPTH: usize = 7;

#[derive(Clone, Debug, PartialEq)]
enum Output {
    /// Class per row; `k` classes in the training labels.
    Class { classes: Vec<Value>, y: Vec<usize> },
    /// Value per row and the squared half-range used for normalization.
    Numeric { y: Vec<f64>, scale: f64, domain: Vec<f64> },
}

/// Training targets derived from labels.
#[derive(Clone, Debug)]
struct Targets {
    outputs: Vec<Output>,
}

impl Targets {
    fn new(space: &ConfigurationSpace, labels: &[Configuration]) -> Result<Self> {
        let mut outputs = Vec::new();
        for p in space.params() {
            let vals: Vec<Value> = labels
                .iter()
                .map(|c| {
                    c.get(&p.name).cloned().ok_or_else(|| Error::InvalidConfiguration(format!("label lacks `{}`", p.name)))
                })
                .collect::<Result<_>>()?;
            let numeric: Option<Vec<f64>> = vals.iter().map(Value::as_f64).collect();
            match numeric {
                Some(y) if p.kind.is_numeric() => {
                    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                    let half = (hi - lo) / 2.0;
                    let domain = p.domain.iter().filter_map(Value::as_f64).collect();
                    outputs.push(Output::Numeric { y, scale: half * half, domain });
                }
                _ => {
                    let mut classes: Vec<Value> = Vec::new();
                    let y = vals
                        .iter()
                        .map(|v| match classes.iter().position(|c| c == v) {
                            Some(i) => i,
                            None => {
                                classes.push(v.clone());
                                classes.len() - 1
                            }
                        })
                        .collect();
                    outputs.push(Output::Class { classes, y });
                }
            }
        }
        Ok(Targets { outputs })
    }

    /// Mean normalized impurity of the rows `idx`.
    fn impurity(&self, idx: &[usize]) -> f64 {
        if self.outputs.is_empty() || idx.is_empty() {
            return 0.0;
        }
        let n = idx.len() as f64;
        let total: f64 = self
            .outputs
            .iter()
            .map(|o| match o {
                Output::Class { classes, y } => {
                    let k = classes.len();
                    if k < 2 {
                        return 0.0;
                    }
                    let mut counts = vec![0usize; k];
                    for &i in idx {
                        counts[y[i]] += 1;
                    }
                    let gini = 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>();
                    gini / (1.0 - 1.0 / k as f64)
                }
                Output::Numeric { y, scale, .. } => {
                    if *scale <= 0.0 {
                        return 0.0;
                    }
                    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
                    let var = idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>() / n;
                    (var / scale).min(1.0)
                }
            })
            .sum();
        total / self.outputs.len() as f64
    }

    /// Per-output majority (ties to the first-seen class) or mean snapped
    /// to the nearest domain value (ties to the lower value).
    fn vote(&self, idx: &[usize], space: &ConfigurationSpace) -> Vec<Value> {
        self.outputs
            .iter()
            .zip(space.params())
            .map(|(o, p)| match o {
                Output::Class { classes, y } => {
                    let mut counts = vec![0usize; classes.len()];
                    for &i in idx {
                        counts[y[i]] += 1;
                    }
                    let best = (0..counts.len()).rev().max_by_key(|&c| counts[c]).expect("at least one class");
                    classes[best].clone()
                }
                Output::Numeric { y, domain, .. } => {
                    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
                    let pos = nearest(domain, m);
                    p.domain.iter().filter(|v| v.as_f64().is_some()).nth(pos).cloned().expect("numeric domain")
                }
            })
            .collect()
    }
}

fn nearest(domain: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, d) in domain.iter().enumerate() {
        if (d - v).abs() < (domain[best] - v).abs() {
            best = i;
        }
    }
    best
}

fn assemble(space: &ConfigurationSpace, values: Vec<Value>) -> Configuration {
    Configuration {
        family: space.family().to_string(),
        values: space.params().iter().map(|p| p.name.clone()).zip(values).collect(),
    }
}

fn mismatches(a: &Configuration, b: &Configuration) -> usize {
    a.values.iter().zip(&b.values).filter(|(x, y)| x.1 != y.1).count()
}

/// The per-output vote when it is a valid configuration, otherwise the
/// closest candidate (fewest differing outputs, then lowest config-id).
fn repair(space: &ConfigurationSpace, voted: Configuration, candidates: &[&Configuration]) -> Configuration {
    if space.validate(&voted).is_empty() {
        return voted;
    }
    candidates
        .iter()
        .min_by(|a, b| mismatches(a, &voted).cmp(&mismatches(b, &voted)).then_with(|| a.id().cmp(&b.id())))
        .map(|c| (*c).clone())
        .expect("a leaf always holds training rows")
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize, samples: usize },
    Leaf { config: Configuration, samples: usize },
}

/// Decision tree whose leaves hold full configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiOutputTree {
    pub feature_names: Vec<String>,
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

/// Feature subsampling per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    Sqrt,
}

struct Grower<'a, R> {
    x: &'a [Vec<f64>],
    targets: &'a Targets,
    labels: &'a [Configuration],
    space: &'a ConfigurationSpace,
    max_depth: usize,
    max_features: MaxFeatures,
    rng: Option<&'a mut R>,
    nodes: Vec<TreeNode>,
}

impl<R: rand::Rng> Grower<'_, R> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let voted = assemble(self.space, self.targets.vote(idx, self.space));
        let candidates: Vec<&Configuration> = idx.iter().map(|&i| &self.labels[i]).collect();
        TreeNode::Leaf { config: repair(self.space, voted, &candidates), samples: idx.len() }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let leaf = self.leaf(&idx);
        self.nodes.push(leaf);
        let parent = self.targets.impurity(&idx);
        if depth >= self.max_depth || idx.len() < 2 || parent <= 0.0 {
            return id;
        }
        let m = self.x[0].len();
        let features: Vec<usize> = match (self.max_features, self.rng.as_mut()) {
            (MaxFeatures::Sqrt, Some(rng)) => {
                let k = ((m as f64).sqrt().round() as usize).clamp(1, m);
                let mut f = sample(&mut **rng, m, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        };
        let Some((feature, threshold)) = best_split(self.x, self.targets, &idx, &features, parent) else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] < threshold);
        let samples = idx.len();
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right, samples };
        id
    }
}

fn weighted(t: &Targets, left: &[usize], right: &[usize]) -> f64 {
    let n = (left.len() + right.len()) as f64;
    (left.len() as f64 * t.impurity(left) + right.len() as f64 * t.impurity(right)) / n
}

/// Size-weighted mean child impurity of splitting all rows at
/// `x[feature] < threshold`.
pub fn split_impurity(
    space: &ConfigurationSpace,
    x: &[Vec<f64>],
    labels: &[Configuration],
    feature: usize,
    threshold: f64,
) -> Result<f64> {
    let t = Targets::new(space, labels)?;
    let (l, r): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| x[i][feature] < threshold);
    Ok(weighted(&t, &l, &r))
}

fn best_split(x: &[Vec<f64>], t: &Targets, idx: &[usize], features: &[usize], parent: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &f in features {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = midpoint(w[0], w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] < thr);
            let imp = weighted(t, &l, &r);
            if imp < parent - 1e-12 && best.is_none_or(|(_, _, b)| imp < b - 1e-15) {
                best = Some((f, thr, imp));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

fn check_rows(x: &[Vec<f64>], labels: &[Configuration], names: &[String]) -> Result<()> {
    if x.len() != labels.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 aligned rows, got {} and {}", x.len(), labels.len())));
    }
    if x.iter().any(|r| r.len() != names.len() || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("feature rows must be finite and match the feature names".into()));
    }
    Ok(())
}

/// Fits one tree on all rows.
pub fn fit_tree(
    space: &ConfigurationSpace,
    feature_names: &[String],
    x: &[Vec<f64>],
    labels: &[Configuration],
    max_depth: usize,
) -> Result<MultiOutputTree> {
    check_rows(x, labels, feature_names)?;
    let targets = Targets::new(space, labels)?;
    let mut g: Grower<'_, crate::rng::Rng> = Grower {
        x,
        targets: &targets,
        labels,
        space,
        max_depth,
        max_features: MaxFeatures::All,
        rng: None,
        nodes: Vec::new(),
    };
    g.grow((0..x.len()).collect(), 0);
    Ok(MultiOutputTree { feature_names: feature_names.to_vec(), nodes: g.nodes, max_depth })
}

impl MultiOutputTree {
    pub fn predict(&self, x: &[f64]) -> &Configuration {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { config, .. } => return config,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Configuration> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { config, .. } => Some(config),
            _ => None,
        })
    }

    /// Indented if/else rules.
    pub fn to_text(&self) -> String {
        fn go(t: &MultiOutputTree, i: usize, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match &t.nodes[i] {
                TreeNode::Leaf { config, samples } => {
                    let vals: Vec<String> = config.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let _ = writeln!(out, "{pad}-> {} (n={samples})", vals.join(", "));
                }
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    let _ = writeln!(out, "{pad}if {} < {threshold}:", t.feature_names[*feature]);
                    go(t, *left, depth + 1, out);
                    let _ = writeln!(out, "{pad}else:");
                    go(t, *right, depth + 1, out);
                }
            }
        }
        let mut s = String::new();
        go(self, 0, 0, &mut s);
        s
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "lowercase")]
        enum J<'a> {
            Split { feature: &'a str, threshold: f64, left: usize, right: usize, samples: usize },
            Leaf { config: std::collections::BTreeMap<&'a str, String>, samples: usize },
        }
        let nodes: Vec<J<'_>> = self
            .nodes
            .iter()
            .map(|n| match n {
                TreeNode::Split { feature, threshold, left, right, samples } => J::Split {
                    feature: &self.feature_names[*feature],
                    threshold: *threshold,
                    left: *left,
                    right: *right,
                    samples: *samples,
                },
                TreeNode::Leaf { config, samples } => J::Leaf {
                    config: config.values.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect(),
                    samples: *samples,
                },
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "max_depth": self.max_depth, "nodes": nodes }))
            .expect("tree serializes")
    }
}

/// Bagging settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 50, max_depth: DEFAULT_MAX_DEPTH, bootstrap: true, max_features: MaxFeatures::Sqrt }
    }
}

/// Bagged multi-output trees.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<MultiOutputTree>,
    /// Training rows drawn by each tree's bootstrap.
    pub in_bag: Vec<Vec<bool>>,
    space: ConfigurationSpace,
}

pub fn fit_forest(
    space: &ConfigurationSpace,
    feature_names: &[String],
    x: &[Vec<f64>],
    labels: &[Configuration],
    params: &ForestParams,
    seed: u64,
) -> Result<Forest> {
    check_rows(x, labels, feature_names)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let n = x.len();
    let mut rng = rng_from_seed(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut in_bag = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let rows: Vec<usize> = if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
        let mut bag = vec![false; n];
        for &r in &rows {
            bag[r] = true;
        }
        let bx: Vec<Vec<f64>> = rows.iter().map(|&r| x[r].clone()).collect();
        let by: Vec<Configuration> = rows.iter().map(|&r| labels[r].clone()).collect();
        let targets = Targets::new(space, &by)?;
        let mut g = Grower {
            x: &bx,
            targets: &targets,
            labels: &by,
            space,
            max_depth: params.max_depth,
            max_features: params.max_features,
            rng: Some(&mut rng),
            nodes: Vec::new(),
        };
        g.grow((0..n).collect(), 0);
        trees.push(MultiOutputTree { feature_names: feature_names.to_vec(), nodes: g.nodes, max_depth: params.max_depth });
        in_bag.push(bag);
    }
    Ok(Forest { trees, in_bag, space: space.clone() })
}

impl Forest {
    /// Per-output vote over the trees' predictions, repaired to a valid
    /// configuration when needed.
    pub fn predict(&self, x: &[f64]) -> Result<Configuration> {
        let preds: Vec<Configuration> = self.trees.iter().map(|t| t.predict(x).clone()).collect();
        let targets = Targets::new(&self.space, &preds)?;
        let all: Vec<usize> = (0..preds.len()).collect();
        let voted = assemble(&self.space, targets.vote(&all, &self.space));
        let refs: Vec<&Configuration> = preds.iter().collect();
        Ok(repair(&self.space, voted, &refs))
    }

    /// Rows left out of at least one bootstrap sample.
    pub fn oob_rows(&self) -> usize {
        let n = self.in_bag.first().map_or(0, Vec::len);
        (0..n).filter(|&i| self.in_bag.iter().any(|b| !b[i])).count()
    }
}
