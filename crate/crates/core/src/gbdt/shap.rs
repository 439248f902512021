//! Path-dependent TreeSHAP and a brute-force Shapley oracle that conditions
//! on coalitions the same way: unknown features follow both children
//! weighted by their training covers.

use std::io::Write;

use super::{Node, RegressionTree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::runner::FeatureFrame;

/// Largest feature count accepted by [`brute_shap`].
pub const BRUTE_MAX_FEATURES: usize = 15;

/// `base + Σ phi = prediction`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapExplanation<T> {
    pub base: T,
    pub phi: Vec<T>,
}

impl<T: Real> ShapExplanation<T> {
    pub fn total(&self) -> T {
        self.base + self.phi.iter().copied().sum::<T>()
    }
}

#[derive(Clone, Copy, Debug)]
struct PathElem<T> {
    feature: Option<usize>,
    zero: T,
    one: T,
    weight: T,
}

fn extend<T: Real>(path: &mut Vec<PathElem<T>>, zero: T, one: T, feature: Option<usize>) {
    let d = path.len();
    path.push(PathElem { feature, zero, one, weight: if d == 0 { T::one() } else { T::zero() } });
    let denom = T::lit((d + 1) as f64);
    for i in (0..d).rev() {
        path[i + 1].weight = path[i + 1].weight + one * path[i].weight * T::lit((i + 1) as f64) / denom;
        path[i].weight = zero * path[i].weight * T::lit((d - i) as f64) / denom;
    }
}

fn unwind<T: Real>(path: &mut Vec<PathElem<T>>, k: usize) {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[k];
    let denom = T::lit((d + 1) as f64);
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != T::zero() {
            let tmp = path[i].weight;
            path[i].weight = next * denom / (T::lit((i + 1) as f64) * one);
            next = tmp - path[i].weight * zero * T::lit((d - i) as f64) / denom;
        } else {
            path[i].weight = path[i].weight * denom / (zero * T::lit((d - i) as f64));
        }
    }
    for i in k..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum<T: Real>(path: &[PathElem<T>], k: usize) -> T {
    let d = path.len() - 1;
    let PathElem { zero, one, .. } = path[k];
    let denom = T::lit((d + 1) as f64);
    let mut next = path[d].weight;
    let mut total = T::zero();
    for i in (0..d).rev() {
        if one != T::zero() {
            let tmp = next * denom / (T::lit((i + 1) as f64) * one);
            total = total + tmp;
            next = path[i].weight - tmp * zero * T::lit((d - i) as f64) / denom;
        } else {
            total = total + path[i].weight * denom / (zero * T::lit((d - i) as f64));
        }
    }
    total
}

struct ShapCtx<'a, T> {
    nodes: &'a [Node<T>],
    x: &'a [T],
    scale: T,
    phi: &'a mut [T],
}

impl<T: Real> ShapCtx<'_, T> {
    fn recurse(&mut self, node: usize, mut path: Vec<PathElem<T>>, zero: T, one: T, feature: Option<usize>) {
        extend(&mut path, zero, one, feature);
        match self.nodes[node] {
            Node::Leaf { value, .. } => {
                for k in 1..path.len() {
                    let w = unwound_sum(&path, k);
                    let e = path[k];
                    let f = e.feature.expect("only the root element lacks a feature");
                    self.phi[f] = self.phi[f] + self.scale * w * (e.one - e.zero) * value;
                }
            }
            Node::Split { feature: f, threshold, left, right, cover } => {
                let (hot, cold) = if self.x[f] < threshold { (left, right) } else { (right, left) };
                let (mut iz, mut io) = (T::one(), T::one());
                if let Some(k) = path.iter().skip(1).position(|e| e.feature == Some(f)).map(|k| k + 1) {
                    iz = path[k].zero;
                    io = path[k].one;
                    unwind(&mut path, k);
                }
                let c = T::lit(cover as f64);
                let frac = |j: usize| T::lit(self.nodes[j].cover() as f64) / c;
                self.recurse(hot, path.clone(), iz * frac(hot), io, Some(f));
                self.recurse(cold, path, iz * frac(cold), T::zero(), Some(f));
            }
        }
    }
}

fn tree_phi<T: Real>(tree: &RegressionTree<T>, x: &[T], scale: T, phi: &mut [T]) {
    let mut ctx = ShapCtx { nodes: &tree.nodes, x, scale, phi };
    ctx.recurse(0, Vec::new(), T::one(), T::one(), None);
}

/// Exact path-dependent SHAP values of one sample.
pub fn tree_shap<T: Real>(ens: &TreeEnsemble<T>, x: &[T]) -> Result<ShapExplanation<T>> {
    ens.check_input(x)?;
    let mut phi = vec![T::zero(); ens.n_features];
    for t in &ens.trees {
        tree_phi(t, x, ens.learning_rate, &mut phi);
    }
    Ok(ShapExplanation { base: ens.expected_value(), phi })
}

/// Tree expectation given that only the features in `known` are observed.
fn conditional<T: Real>(nodes: &[Node<T>], i: usize, x: &[T], known: u32) -> T {
    match nodes[i] {
        Node::Leaf { value, .. } => value,
        Node::Split { feature, threshold, left, right, cover } => {
            if known & (1 << feature) != 0 {
                conditional(nodes, if x[feature] < threshold { left } else { right }, x, known)
            } else {
                let c = |j: usize| T::lit(nodes[j].cover() as f64);
                (c(left) * conditional(nodes, left, x, known) + c(right) * conditional(nodes, right, x, known))
                    / T::lit(cover as f64)
            }
        }
    }
}

/// Shapley values by enumerating all coalitions.
pub fn brute_shap<T: Real>(ens: &TreeEnsemble<T>, x: &[T]) -> Result<ShapExplanation<T>> {
    ens.check_input(x)?;
    let m = ens.n_features;
    if m > BRUTE_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "brute-force Shapley values support at most {BRUTE_MAX_FEATURES} features, got {m}"
        )));
    }
    let value = |s: u32| -> T {
        ens.base_score + ens.learning_rate * ens.trees.iter().map(|t| conditional(&t.nodes, 0, x, s)).sum::<T>()
    };
    let values: Vec<T> = (0..1u32 << m).map(value).collect();
    // weight[k] = k!(m-k-1)!/m!
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    let weight: Vec<T> = (0..m).map(|k| T::lit(fact(k) * fact(m - k - 1) / fact(m))).collect();
    let mut phi = vec![T::zero(); m];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..1u32 << m {
            if s & bit == 0 {
                *p = *p + weight[s.count_ones() as usize] * (values[(s | bit) as usize] - values[s as usize]);
            }
        }
    }
    Ok(ShapExplanation { base: values[0], phi })
}

/// One swarm-plot point.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmRow {
    pub record_idx: usize,
    pub feature: String,
    pub encoded_value: f64,
    pub shap: f64,
}

/// Mean absolute SHAP value of one feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
}

/// Per-record attributions and the feature ranking derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Swarm {
    pub fid: u32,
    pub dim: usize,
    pub rows: Vec<SwarmRow>,
    /// Descending by mean |φ|; ties keep column order.
    pub ranking: Vec<FeatureImportance>,
}

pub const SWARM_HEADER: [&str; 6] = ["fid", "dim", "record_idx", "feature", "encoded_value", "shap"];

impl Swarm {
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        if header {
            w.write_record(SWARM_HEADER)?;
        }
        for r in &self.rows {
            w.write_record([
                self.fid.to_string(),
                self.dim.to_string(),
                r.record_idx.to_string(),
                r.feature.clone(),
                r.encoded_value.to_string(),
                r.shap.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SHAP values of every row of `frame`, one output row per (record, feature).
pub fn swarm_data(frame: &FeatureFrame, ens: &TreeEnsemble<f64>, fid: u32, dim: usize) -> Result<Swarm> {
    if frame.columns.len() != ens.n_features {
        return Err(Error::InvalidArgument(format!(
            "model expects {} features, frame has {}",
            ens.n_features,
            frame.columns.len()
        )));
    }
    let m = frame.columns.len();
    let mut rows = Vec::with_capacity(frame.x.len() * m);
    let mut abs: Vec<Vec<f64>> = vec![Vec::with_capacity(frame.x.len()); m];
    for (x, &rec) in frame.x.iter().zip(&frame.rows) {
        let e = tree_shap(ens, x)?;
        for (j, name) in frame.columns.iter().enumerate() {
            abs[j].push(e.phi[j].abs());
            rows.push(SwarmRow { record_idx: rec, feature: name.clone(), encoded_value: x[j], shap: e.phi[j] });
        }
    }
    let n = frame.x.len().max(1) as f64;
    let mut ranking: Vec<FeatureImportance> = frame
        .columns
        .iter()
        .zip(&mut abs)
        .map(|(f, a)| {
            // Summing in sorted order makes the ranking independent of record order.
            a.sort_by(f64::total_cmp);
            FeatureImportance { feature: f.clone(), mean_abs_shap: a.iter().sum::<f64>() / n }
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap));
    Ok(Swarm { fid, dim, rows, ranking })
}
