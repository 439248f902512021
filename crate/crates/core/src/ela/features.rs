//! Landscape features from a Latin-hypercube design of experiments.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::num::quantile_sorted;
use crate::rng::{mix_seed, rng_from_seed};
use crate::runner::write_atomic;
use crate::suite::{Objective, Suite};

pub const DEFAULT_SAMPLES: usize = 1024;

/// Bumped whenever a feature is added, removed or redefined.
pub const FEATURE_VERSION: u32 = 1;

/// Feature order; fixed for a given [`FEATURE_VERSION`].
pub const FEATURE_NAMES: [&str; 13] = [
    "y_skewness",
    "y_kurtosis",
    "y_q10_q90",
    "y_q25_q75",
    "lm_r2",
    "lm_coef_min",
    "lm_coef_max",
    "lm_coef_ratio",
    "quad_adj_r2",
    "quad_cond",
    "disp_ratio_05",
    "disp_ratio_25",
    "nbc_nn_nb_ratio",
];

/// Values in [`FEATURE_NAMES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ElaFeatures {
    pub values: Vec<f64>,
}

impl ElaFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

/// `n` points in `[lb, ub]^dim`, one per stratum in every coordinate.
pub fn latin_hypercube(n: usize, dim: usize, (lb, ub): (f64, f64), seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut x = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (row, s) in x.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            row[j] = lb + (ub - lb) * u;
        }
    }
    x
}

/// Samples `n` points of `problem` and computes the features.
pub fn doe_features(problem: &mut dyn Objective, n: usize, seed: u64) -> Result<ElaFeatures> {
    let dim = problem.dim();
    if n < dim + 2 {
        return Err(Error::InvalidArgument(format!("a design for d={dim} needs at least {} samples", dim + 2)));
    }
    let x = latin_hypercube(n, dim, problem.bounds(), seed);
    let y: Vec<f64> = x.iter().map(|p| problem.evaluate(p)).collect();
    features_from_sample(&x, &y)
}

/// Central moments `(m2, m3, m4)` with the population denominator.
fn central_moments(y: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in y {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Population skewness `m3 / m2^1.5`; 0 for constant samples.
pub fn skewness(y: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(y);
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Excess kurtosis `m4 / m2² − 3`; 0 for constant samples.
pub fn kurtosis(y: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(y);
    if m2 <= 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

fn r2_of(y: &[f64], fitted: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if ss_tot <= 0.0 {
        return 0.0;
    }
    let ss_res: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    (1.0 - ss_res / ss_tot).max(0.0)
}

/// Fits `y` on the design rows; returns coefficients and R².
fn regress(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let beta = least_squares(rows, y)?;
    let fitted: Vec<f64> = rows.iter().map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
    Some((beta, r2_of(y, &fitted)))
}

/// `max / min`, bounded when `min` vanishes and 0 when both do.
fn spread_ratio(max: f64, min: f64) -> f64 {
    if max <= 0.0 {
        0.0
    } else {
        max / min.max(1e-12 * max)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn mean_pairwise(points: &[&[f64]]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += dist(points[i], points[j]);
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// Feature vector of an evaluated sample.
pub fn features_from_sample(x: &[Vec<f64>], y: &[f64]) -> Result<ElaFeatures> {
    let n = y.len();
    let dim = x.first().map_or(0, Vec::len);
    if x.len() != n || n < dim + 2 || dim == 0 {
        return Err(Error::InvalidArgument("feature sample needs at least d + 2 aligned rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("objective values must be finite".into()));
    }

    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let scaled = |q: f64| if hi > lo { (quantile_sorted(&sorted, q) - lo) / (hi - lo) } else { 0.0 };
    let qratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };

    let lin_rows: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let (lm_r2, coef_min, coef_max) = match regress(&lin_rows, y) {
        Some((beta, r2)) => {
            let abs: Vec<f64> = beta[1..].iter().map(|b| b.abs()).collect();
            (r2, abs.iter().copied().fold(f64::INFINITY, f64::min), abs.iter().copied().fold(0.0, f64::max))
        }
        None => (0.0, 0.0, 0.0),
    };

    let quad_rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).chain(r.iter().map(|v| v * v)).collect())
        .collect();
    let p = 2 * dim;
    let (quad_adj, quad_cond) = match regress(&quad_rows, y) {
        Some((beta, r2)) if n > p + 1 => {
            let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64;
            let abs: Vec<f64> = beta[1 + dim..].iter().map(|b| b.abs()).collect();
            let (mn, mx) = (abs.iter().copied().fold(f64::INFINITY, f64::min), abs.iter().copied().fold(0.0, f64::max));
            (if r2 > 0.0 { adj } else { 0.0 }, spread_ratio(mx, mn))
        }
        _ => (0.0, 0.0),
    };

    // Distance features on unique points, best first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut unique: Vec<usize> = Vec::with_capacity(n);
    {
        let mut seen: Vec<&[f64]> = Vec::with_capacity(n);
        for &i in &order {
            if !seen.contains(&x[i].as_slice()) {
                seen.push(&x[i]);
                unique.push(i);
            }
        }
    }
    let pts: Vec<&[f64]> = unique.iter().map(|&i| x[i].as_slice()).collect();
    let all_mean = mean_pairwise(&pts);
    let disp = |frac: f64| {
        let k = ((pts.len() as f64 * frac).ceil() as usize).max(2).min(pts.len());
        if all_mean > 0.0 {
            mean_pairwise(&pts[..k]) / all_mean
        } else {
            0.0
        }
    };

    // Nearest neighbour vs nearest better neighbour, excluding the best point.
    let m = pts.len();
    let (mut nn_sum, mut nb_sum, mut count) = (0.0, 0.0, 0usize);
    for a in 1..m {
        let mut nn = f64::INFINITY;
        let mut nb = f64::INFINITY;
        for b in 0..m {
            if a == b {
                continue;
            }
            let d = dist(pts[a], pts[b]);
            nn = nn.min(d);
            if b < a && y[unique[b]] < y[unique[a]] {
                nb = nb.min(d);
            }
        }
        if nb.is_finite() {
            nn_sum += nn;
            nb_sum += nb;
            count += 1;
        }
    }
    let nbc = if count > 0 && nb_sum > 0.0 { nn_sum / nb_sum } else { 0.0 };

    let values = vec![
        skewness(y),
        kurtosis(y),
        qratio(scaled(0.10), scaled(0.90)),
        qratio(scaled(0.25), scaled(0.75)),
        lm_r2,
        if coef_min.is_finite() { coef_min } else { 0.0 },
        coef_max,
        spread_ratio(coef_max, coef_min),
        quad_adj,
        quad_cond,
        disp(0.05),
        disp(0.25),
        nbc,
    ];
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(ElaFeatures { values })
}

/// Features of one problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub fid: u32,
    pub dim: usize,
    pub iid: u32,
    pub features: ElaFeatures,
}

/// Feature rows in `(fid, dim, iid)` order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    /// Computes features for every `(fid, dim, iid)` combination in parallel.
    pub fn compute(suite: &Suite, keys: &[(u32, usize, u32)], n: usize, seed: u64) -> Result<Self> {
        let mut rows: Vec<FeatureRow> = keys
            .par_iter()
            .map(|&(fid, dim, iid)| {
                let mut p = suite.make(fid, dim, iid)?;
                let features = doe_features(p.as_mut(), n, mix_seed(&[seed, fid as u64, dim as u64, iid as u64]))?;
                Ok(FeatureRow { fid, dim, iid, features })
            })
            .collect::<Result<_>>()?;
        rows.sort_by_key(|r| (r.fid, r.dim, r.iid));
        Ok(FeatureTable { rows })
    }

    pub fn get(&self, fid: u32, dim: usize, iid: u32) -> Option<&ElaFeatures> {
        self.rows.iter().find(|r| (r.fid, r.dim, r.iid) == (fid, dim, iid)).map(|r| &r.features)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<&str> = ["fid", "dim", "iid"].into_iter().chain(FEATURE_NAMES).collect();
        w.write_record(&header).expect("writing to memory");
        for r in &self.rows {
            let row: Vec<String> = [r.fid.to_string(), r.dim.to_string(), r.iid.to_string()]
                .into_iter()
                .chain(r.features.values.iter().map(f64::to_string))
                .collect();
            w.write_record(&row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_csv_string().as_bytes())
    }

    pub fn from_csv_reader<R: Read>(input: R, context: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let want: Vec<&str> = ["fid", "dim", "iid"].into_iter().chain(FEATURE_NAMES).collect();
        if header != want {
            return Err(Error::parse(context, format!("feature header must be `{}`", want.join(","))));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::parse(context, format!("row {}: field `{}` is not a finite number", line + 2, want[i]))
                })
            };
            let int = |i: usize| -> Result<u64> {
                rec[i].parse::<u64>().map_err(|_| Error::parse(context, format!("row {}: field `{}` is not an integer", line + 2, want[i])))
            };
            rows.push(FeatureRow {
                fid: int(0)? as u32,
                dim: int(1)? as usize,
                iid: int(2)? as u32,
                features: ElaFeatures { values: (3..want.len()).map(field).collect::<Result<_>>()? },
            });
        }
        rows.sort_by_key(|r| (r.fid, r.dim, r.iid));
        Ok(FeatureTable { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_csv_reader(std::fs::File::open(path)?, &path.display().to_string())
    }
}
