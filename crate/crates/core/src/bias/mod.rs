//! Structural-bias detection: final positions of many runs on the
//! uniform-noise function f0 should be uniform in the box.
//!
//! Each coordinate is tested with Anderson–Darling against U(0,1), with a
//! Bonferroni level `alpha / dim`. A median distinct-value count below
//! `n_runs / 5` also counts as non-uniform. Rejections are classified by
//! rules applied in order: centre, bounds, discretization, gaps/clusters.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::evaluator::RunOutcome;
use crate::rng::mix_seed;
use crate::runner::Algorithm;
use crate::suite::{make_f0, Objective};

pub const MIN_RUNS: usize = 30;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_BUDGET: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const HISTOGRAM_BINS: usize = 20;
/// Central window for the centre rule.
pub const CENTRE_WINDOW: (f64, f64) = (0.25, 0.75);
/// Width of each boundary strip for the bounds rule.
pub const BOUNDARY_STRIP: f64 = 0.05;
/// Resolution at which coordinates count as distinct.
pub const DISTINCT_RESOLUTION: f64 = 1e-4;

/// Bias verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    None,
    Centre,
    Bounds,
    Discretization,
    GapsClusters,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Centre => "centre",
            Verdict::Bounds => "bounds",
            Verdict::Discretization => "discretization",
            Verdict::GapsClusters => "gaps/clusters",
        }
    }
}

/// Anderson–Darling result for one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Limiting distribution `P(A² < z)` of the statistic.
fn ad_inf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp()
    }
}

/// Finite-sample correction to [`ad_inf`].
fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 + 0.01365 / n) / n
}

/// `P(A² < z)` for sample size `n`.
pub fn ad_cdf(n: usize, z: f64) -> f64 {
    let x = ad_inf(z);
    if x >= 1.0 {
        return 1.0;
    }
    (x + ad_errfix(n as f64, x)).clamp(0.0, 1.0)
}

/// Anderson–Darling test of `u` against U(0,1).
pub fn anderson_darling(u: &[f64]) -> Result<AdTest> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("Anderson-Darling test of an empty sample".into()));
    }
    if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("position {v} is outside [0, 1]")));
    }
    let mut s: Vec<f64> = u.iter().map(|&v| v.clamp(1e-300, 1.0 - f64::EPSILON)).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let sum: f64 = (0..n).map(|i| (2 * i + 1) as f64 * (s[i].ln() + (1.0 - s[n - 1 - i]).ln())).sum();
    let a2 = -(n as f64) - sum / n as f64;
    Ok(AdTest { statistic: a2, p_value: 1.0 - ad_cdf(n, a2) })
}

/// Per-coordinate tests of a `runs × dim` position matrix.
pub fn uniformity_test(positions: &[Vec<f64>]) -> Result<Vec<AdTest>> {
    let dim = check_positions(positions)?;
    (0..dim).map(|j| anderson_darling(&column(positions, j))).collect()
}

fn check_positions(positions: &[Vec<f64>]) -> Result<usize> {
    if positions.len() < MIN_RUNS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_RUNS} runs, got {}", positions.len())));
    }
    let dim = positions[0].len();
    if dim == 0 || positions.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument("positions must be a non-empty rectangular matrix".into()));
    }
    Ok(dim)
}

fn column(positions: &[Vec<f64>], j: usize) -> Vec<f64> {
    positions.iter().map(|r| r[j]).collect()
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`.
fn binomial_upper(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    Binomial::new(p, n).expect("valid binomial").sf(k - 1)
}

/// Counts per bin of equal width over [0, 1].
pub fn histogram(values: &[f64], bins: usize) -> Vec<u32> {
    let mut h = vec![0u32; bins];
    for &v in values {
        h[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    h
}

fn distinct_count(values: &[f64]) -> usize {
    let mut q: Vec<i64> = values.iter().map(|v| (v / DISTINCT_RESOLUTION).round() as i64).collect();
    q.sort_unstable();
    q.dedup();
    q.len()
}

/// Applies the classification rules to the coordinates that reject.
pub fn classify(positions: &[Vec<f64>], tests: &[AdTest], alpha: f64) -> Verdict {
    let dim = tests.len();
    let rejected: Vec<usize> = (0..dim).filter(|&j| tests[j].p_value < alpha / dim as f64).collect();
    // Continuous uniform draws almost never coincide at this resolution, so
    // a distinct-value deficit is a rejection of its own.
    let mut distinct: Vec<usize> = (0..dim).map(|j| distinct_count(&column(positions, j))).collect();
    distinct.sort_unstable();
    let discrete = (distinct[dim / 2] as f64) < positions.len() as f64 / 5.0;
    if rejected.is_empty() {
        return if discrete { Verdict::Discretization } else { Verdict::None };
    }
    let pooled: Vec<f64> = rejected.iter().flat_map(|&j| column(positions, j)).collect();
    let n = pooled.len() as u64;

    let central = pooled.iter().filter(|v| (CENTRE_WINDOW.0..=CENTRE_WINDOW.1).contains(*v)).count() as u64;
    let h = histogram(&pooled, 10);
    let mode = (0..10).rev().max_by_key(|&b| h[b]).expect("ten bins");
    let mode_centre = (mode as f64 + 0.5) / 10.0;
    let mode_central = (CENTRE_WINDOW.0..=CENTRE_WINDOW.1).contains(&mode_centre);
    if mode_central && binomial_upper(central, n, 0.5) < alpha {
        return Verdict::Centre;
    }

    let edge = pooled.iter().filter(|&&v| v <= BOUNDARY_STRIP || v >= 1.0 - BOUNDARY_STRIP).count() as u64;
    if binomial_upper(edge, n, 2.0 * BOUNDARY_STRIP) < alpha {
        return Verdict::Bounds;
    }

    if discrete {
        return Verdict::Discretization;
    }
    Verdict::GapsClusters
}

/// Full result of a bias check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiasReport {
    pub config_id: String,
    pub dim: usize,
    pub n_runs: usize,
    pub alpha: f64,
    pub tests: Vec<AdTest>,
    pub verdict: Verdict,
    /// Per-coordinate counts over [`HISTOGRAM_BINS`] equal bins.
    pub histograms: Vec<Vec<u32>>,
}

impl BiasReport {
    pub fn from_positions(config_id: &str, positions: &[Vec<f64>], alpha: f64) -> Result<Self> {
        let dim = check_positions(positions)?;
        let tests = uniformity_test(positions)?;
        let verdict = classify(positions, &tests, alpha);
        Ok(BiasReport {
            config_id: config_id.to_string(),
            dim,
            n_runs: positions.len(),
            alpha,
            histograms: (0..dim).map(|j| histogram(&column(positions, j), HISTOGRAM_BINS)).collect(),
            tests,
            verdict,
        })
    }

    pub fn min_p(&self) -> f64 {
        self.tests.iter().map(|t| t.p_value).fold(1.0, f64::min)
    }

    pub fn rejected_dims(&self) -> usize {
        self.tests.iter().filter(|t| t.p_value < self.alpha / self.dim as f64).count()
    }

    pub const CSV_HEADER: [&'static str; 6] = ["config_id", "dim", "n_runs", "verdict", "min_p", "rejected_dims"];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.config_id.clone(),
            self.dim.to_string(),
            self.n_runs.to_string(),
            self.verdict.as_str().to_string(),
            self.min_p().to_string(),
            self.rejected_dims().to_string(),
        ]
    }

    /// Histogram data for plotting.
    pub fn histogram_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "config_id": self.config_id,
            "dim": self.dim,
            "n_runs": self.n_runs,
            "verdict": self.verdict.as_str(),
            "bins": HISTOGRAM_BINS,
            "histograms": self.histograms,
            "p_values": self.tests.iter().map(|t| t.p_value).collect::<Vec<_>>(),
        }))
        .expect("json value serializes")
    }
}

/// Final best positions of `n_runs` runs on f0, scaled to the unit cube.
/// Run `r` uses `make_f0(dim, seed0 + r)`; results do not depend on the
/// number of worker threads.
pub fn collect_f0<F>(dim: usize, n_runs: usize, budget: usize, seed0: u64, run: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut dyn Objective, usize, u64) -> Result<RunOutcome> + Sync,
{
    if n_runs < MIN_RUNS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_RUNS} runs, got {n_runs}")));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut f0 = make_f0(dim, seed0 + r);
            let (lb, ub) = f0.bounds();
            let out = run(&mut f0, budget, mix_seed(&[seed0 + r, 0xB1A5]))?;
            Ok(out.best_x.iter().map(|&x| ((x - lb) / (ub - lb)).clamp(0.0, 1.0)).collect())
        })
        .collect()
}

/// [`collect_f0`] for a configured optimizer.
pub fn collect_f0_for(algo: &Algorithm, dim: usize, n_runs: usize, budget: usize, seed0: u64) -> Result<Vec<Vec<f64>>> {
    collect_f0(dim, n_runs, budget, seed0, |obj, b, s| algo.run(obj, b, s))
}

#[cfg(test)]
mod tests;
