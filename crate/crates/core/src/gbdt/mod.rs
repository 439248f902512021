//! Gradient-boosted regression trees with exact greedy splits, fitted to
//! overfit on purpose, and the SHAP attributions computed from them.
//!
//! Samples go left when `x[feature] < threshold`. Thresholds are midpoints
//! between consecutive distinct values. Split gain ties go to the lowest
//! feature index, then the lowest threshold.

mod shap;

use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use shap::{
    brute_shap, swarm_data, tree_shap, FeatureImportance, ShapExplanation, Swarm, SwarmRow, BRUTE_MAX_FEATURES, SWARM_HEADER,
};

use crate::configspace::ConfigurationSpace;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::runner::{feature_frame, Dataset};

/// Hyperparameters of [`fit`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub max_depth: usize,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { max_depth: 10, n_trees: 300, learning_rate: 0.3, min_leaf: 1 }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::InvalidArgument("min_leaf must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Tree node; `cover` is the number of training samples that reached it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub enum Node<T> {
    Split { feature: usize, threshold: T, left: usize, right: usize, cover: u64 },
    Leaf { value: T, cover: u64 },
}

impl<T: Copy> Node<T> {
    pub fn cover(&self) -> u64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// Binary regression tree stored as a node array rooted at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> RegressionTree<T> {
    pub fn leaf(value: T, cover: u64) -> Self {
        RegressionTree { nodes: vec![Node::Leaf { value, cover }] }
    }

    /// Leaf value reached by `x`.
    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go<T: Copy>(nodes: &[Node<T>], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> T {
        fn go<T: Real>(nodes: &[Node<T>], i: usize) -> T {
            match nodes[i] {
                Node::Leaf { value, .. } => value,
                Node::Split { left, right, cover, .. } => {
                    let c = |j: usize| T::lit(nodes[j].cover() as f64);
                    (c(left) * go(nodes, left) + c(right) * go(nodes, right)) / T::lit(cover as f64)
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Split { feature, .. } if *feature == f))
    }

    /// Structural checks: children after parents, covers positive and
    /// additive, thresholds finite, features in range.
    pub fn check(&self, n_features: usize) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.cover() == 0 {
                return Err(format!("node {i} has zero cover"));
            }
            if let Node::Split { feature, threshold, left, right, cover } = *n {
                if feature >= n_features {
                    return Err(format!("node {i} splits on feature {feature} of {n_features}"));
                }
                if !threshold.is_finite() {
                    return Err(format!("node {i} has a non-finite threshold"));
                }
                if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() || left == right {
                    return Err(format!("node {i} has invalid children"));
                }
                parents[left] += 1;
                parents[right] += 1;
                if self.nodes[left].cover() + self.nodes[right].cover() != cover {
                    return Err(format!("node {i} cover differs from its children's sum"));
                }
            } else if let Node::Leaf { value, .. } = *n {
                if !value.is_finite() {
                    return Err(format!("leaf {i} has a non-finite value"));
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err("nodes do not form a tree".into());
        }
        Ok(())
    }
}

/// `prediction(x) = base_score + η·Σ_t tree_t(x)` under squared-error loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct TreeEnsemble<T> {
    pub scalar: String,
    pub n_features: usize,
    pub base_score: T,
    pub learning_rate: T,
    pub trees: Vec<RegressionTree<T>>,
}

impl<T: Real + Serialize + DeserializeOwned> TreeEnsemble<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    /// Parses and validates a serialized model.
    pub fn from_json(text: &str) -> Result<Self> {
        let e: TreeEnsemble<T> = serde_json::from_str(text)?;
        if e.scalar != T::NAME {
            return Err(Error::Model(format!("model scalar is {}, expected {}", e.scalar, T::NAME)));
        }
        e.check()?;
        Ok(e)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::runner::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl<T: Real> TreeEnsemble<T> {
    pub fn constant(n_features: usize, base_score: T, learning_rate: T) -> Self {
        TreeEnsemble { scalar: T::NAME.into(), n_features, base_score, learning_rate, trees: Vec::new() }
    }

    pub fn check(&self) -> Result<()> {
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() {
            return Err(Error::Model("non-finite base score or learning rate".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            tree.check(self.n_features).map_err(|m| Error::Model(format!("tree {t}: {m}")))?;
        }
        Ok(())
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::InvalidArgument(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("feature {j} is not finite")));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[T]) -> Result<T> {
        self.check_input(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[T]) -> T {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<T>()
    }

    /// Mean prediction over the training distribution encoded in the covers.
    pub fn expected_value(&self) -> T {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.expected_value()).sum::<T>()
    }

    /// Features with at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        (0..self.n_features).filter(|&f| self.trees.iter().any(|t| t.uses_feature(f))).collect()
    }
}

/// Coefficient of determination; 1 when `y` is constant and matched exactly.
pub fn r_squared<T: Real>(y: &[T], pred: &[T]) -> T {
    let m = crate::num::mean(y);
    let ss_tot: T = y.iter().map(|&v| (v - m) * (v - m)).sum();
    let ss_res: T = y.iter().zip(pred).map(|(&a, &b)| (a - b) * (a - b)).sum();
    if ss_tot == T::zero() {
        return if ss_res == T::zero() { T::one() } else { T::zero() };
    }
    T::one() - ss_res / ss_tot
}

/// Fits a boosted ensemble to `(x, y)`.
pub fn fit<T: Real>(x: &[Vec<T>], y: &[T], params: &FitParams) -> Result<TreeEnsemble<T>> {
    params.validate()?;
    if x.len() != y.len() || y.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 aligned rows, got {} and {}", x.len(), y.len())));
    }
    let m = x[0].len();
    if x.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("ragged feature matrix".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in training data".into()));
    }
    let base = crate::num::mean(y);
    let eta = T::lit(params.learning_rate);
    let mut ens = TreeEnsemble::constant(m, base, eta);
    let mut residual: Vec<T> = y.iter().map(|&v| v - base).collect();
    // Sample order per feature, reused by every node.
    let order: Vec<Vec<usize>> = (0..m)
        .map(|f| {
            let mut idx: Vec<usize> = (0..y.len()).collect();
            idx.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite").then(a.cmp(&b)));
            idx
        })
        .collect();
    for _ in 0..params.n_trees {
        if residual.iter().all(|r| *r == T::zero()) {
            break;
        }
        let mut builder = Builder { x, residual: &residual, params, nodes: Vec::new(), member: vec![false; y.len()] };
        let all: Vec<Vec<usize>> = order.clone();
        builder.grow(all, 0);
        let tree = RegressionTree { nodes: builder.nodes };
        for (i, r) in residual.iter_mut().enumerate() {
            *r = *r - eta * tree.predict(&x[i]);
        }
        ens.trees.push(tree);
    }
    Ok(ens)
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    residual: &'a [T],
    params: &'a FitParams,
    nodes: Vec<Node<T>>,
    member: Vec<bool>,
}

struct Split<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

impl<T: Real> Builder<'_, T> {
    /// Grows the subtree for the samples in `sorted` (one ascending order
    /// per feature) and returns its node index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let idx = &sorted[0];
        let n = idx.len();
        let sum: T = idx.iter().map(|&i| self.residual[i]).sum();
        let id = self.nodes.len();
        let value = sum / T::lit(n as f64);
        self.nodes.push(Node::Leaf { value, cover: n as u64 });
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&sorted, sum) else { return id };
        for &i in idx {
            self.member[i] = self.x[i][split.feature] < split.threshold;
        }
        let (mut left, mut right) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for ord in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = ord.iter().partition(|&&i| self.member[i]);
            left.push(l);
            right.push(r);
        }
        drop(sorted);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: r, cover: n as u64 };
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>], sum: T) -> Option<Split<T>> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_leaf;
        let parent = sum * sum / T::lit(n as f64);
        // Gains below this are rounding noise on an already pure node.
        let eps = T::epsilon() * T::lit(64.0) * (parent.abs() + T::one());
        let mut best: Option<Split<T>> = None;
        for (f, ord) in sorted.iter().enumerate() {
            let mut left_sum = T::zero();
            for k in 0..n - 1 {
                left_sum = left_sum + self.residual[ord[k]];
                let (a, b) = (self.x[ord[k]][f], self.x[ord[k + 1]][f]);
                let nl = k + 1;
                if a == b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / T::lit(nl as f64)
                    + right_sum * right_sum / T::lit((n - nl) as f64)
                    - parent;
                if gain > eps && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: f, threshold: midpoint(a, b), gain });
                }
            }
        }
        best
    }
}

/// Midpoint that stays strictly above `a` and at or below `b`.
fn midpoint<T: Real>(a: T, b: T) -> T {
    let m = a + (b - a) / T::lit(2.0);
    if m > a && m <= b {
        m
    } else {
        b
    }
}

/// Fitted model and attributions for one `(fid, dim)`.
#[derive(Clone, Debug)]
pub struct ModelReport {
    pub fid: u32,
    pub dim: usize,
    pub ensemble: TreeEnsemble<f64>,
    pub r2: f64,
    pub swarm: Swarm,
}

/// Fits one ensemble per `(fid, dim)` of the successful records and
/// explains every record. Models are fitted in parallel on the current pool.
pub fn explain_dataset(dataset: &Dataset, space: &ConfigurationSpace, params: &FitParams) -> Result<Vec<ModelReport>> {
    let mut keys: Vec<(u32, usize)> = dataset.ok_records().map(|r| (r.fid, r.dim)).collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.is_empty() {
        return Err(Error::InvalidArgument("no successful runs to explain".into()));
    }
    keys.par_iter()
        .map(|&(fid, dim)| {
            let frame = feature_frame(dataset, space, Some((fid, dim)))?;
            let ensemble = fit(&frame.x, &frame.y, params)?;
            let pred: Vec<f64> = frame.x.iter().map(|x| ensemble.predict_unchecked(x)).collect();
            let r2 = r_squared(&frame.y, &pred);
            log::info!("f{fid} d={dim}: {} trees, training R² {r2:.4}", ensemble.trees.len());
            let swarm = swarm_data(&frame, &ensemble, fid, dim)?;
            Ok(ModelReport { fid, dim, ensemble, r2, swarm })
        })
        .collect()
}

#[cfg(test)]
mod tests;
