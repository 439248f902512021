//! Two-sided Mann–Whitney U test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size for which [`mann_whitney`] enumerates exactly.
pub const EXACT_MAX_N: usize = 8;

/// Largest pooled size [`mann_whitney_exact`] accepts.
pub const EXACT_MAX_POOLED: usize = 24;

/// Mid-ranks (1-based) of the pooled sample and the tie group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Mann-Whitney test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("Mann-Whitney test sample contains NaN".into()));
    }
    Ok(())
}

/// U statistic of `a`.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    r1 - (a.len() * (a.len() + 1)) as f64 / 2.0
}

/// Exact p-value: the share of all splits of the pooled mid-ranks whose U is
/// at least as far from its mean as the observed one.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let n = a.len() + b.len();
    if n > EXACT_MAX_POOLED {
        return Err(Error::InvalidArgument(format!("exact enumeration supports at most {EXACT_MAX_POOLED} pooled values")));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let n1 = a.len();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let mu = (n1 * b.len()) as f64 / 2.0;
    let observed = (ranks[..n1].iter().sum::<f64>() - offset - mu).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let r1: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        total += 1;
        if (r1 - offset - mu).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// Normal approximation with tie and continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    check(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = ranks[..a.len()].iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = if n > 1.0 { n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0))) } else { 0.0 };
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - n1 * n2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * (1.0 - normal.cdf(z))).min(1.0))
}

/// Exact when both samples have at most [`EXACT_MAX_N`] values, normal
/// approximation otherwise.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len().max(b.len()) <= EXACT_MAX_N {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Significance level for "improvement" flags.
pub const ALPHA: f64 = 0.05;

/// `a` improves on `b`: higher mean and p below [`ALPHA`].
pub fn improves(a: &[f64], b: &[f64]) -> Result<bool> {
    Ok(crate::num::mean(a) > crate::num::mean(b) && mann_whitney(a, b)? < ALPHA)
}
