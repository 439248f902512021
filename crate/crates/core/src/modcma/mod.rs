//! Modular CMA-ES.
//!
//! Every module of the builtin `modcma` space maps onto one switch of
//! [`CmaConfig`]. The strategy parameters follow the usual CMA-ES defaults
//! (`c_σ`, `d_σ`, `c_c`, `c_1`, `c_μ` as functions of `d` and `μ_eff`).
//!
//! * `covariance = false` freezes `C` at the identity; mean, paths and `σ`
//!   still adapt.
//! * `active` adds negative weights for the worst `λ − μ` offspring, scaled
//!   so the total negative mass respects the positive-definiteness bound.
//! * `mirrored` pairs `z` with `−z`; `pairwise` ranks the better member of
//!   every pair ahead of all worse members before selection.
//! * PSR compares the ranks of the previous and current offspring in the
//!   merged population: `z = (Σ rank_prev − Σ rank_cur) / λ²`, smoothed as
//!   `s ← 0.7 s + 0.3 (z − 0.25)`, then `σ ← σ · exp(s / 2)`.
//! * IPOP doubles `λ` (and scales `μ`) at each restart; BIPOP alternates a
//!   doubling regime with a small-population regime, picking whichever has
//!   consumed fewer evaluations so far.

use std::collections::VecDeque;

use rand::Rng as _;

use crate::configspace::{Configuration, Value};
use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, RunOutcome};
use crate::linalg::{dot, jacobi_eigen, norm, Matrix};
use crate::rng::{rng_from_seed, Rng};
use crate::sampling::{Sampler, SamplerKind};
use crate::suite::Objective;

pub const SIGMA_MIN: f64 = 1e-12;
pub const SIGMA_MAX: f64 = 1e12;
const EIGEN_FLOOR: f64 = 1e-14;
const PSR_TARGET: f64 = 0.25;
const PSR_SMOOTHING: f64 = 0.3;
const PSR_DAMPING: f64 = 2.0;
const TOLFUN: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mirrored {
    Off,
    Mirrored,
    Pairwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Default,
    Equal,
    LambdaDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepSize {
    Csa,
    Psr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restart {
    None,
    Ipop,
    Bipop,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmaConfig {
    pub covariance: bool,
    pub active: bool,
    pub base_sampler: SamplerKind,
    pub elitist: bool,
    pub mirrored: Mirrored,
    pub weights: WeightKind,
    pub step_size: StepSize,
    pub local_restart: Restart,
    pub lambda: usize,
    pub mu: usize,
}

/// `4 + ⌊3 ln d⌋`.
pub fn default_lambda(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

impl CmaConfig {
    /// Plain CMA-ES with the default population size for `dim`.
    pub fn default_for(dim: usize) -> Self {
        let lambda = default_lambda(dim);
        CmaConfig {
            covariance: true,
            active: false,
            base_sampler: SamplerKind::Gaussian,
            elitist: false,
            mirrored: Mirrored::Off,
            weights: WeightKind::Default,
            step_size: StepSize::Csa,
            local_restart: Restart::None,
            lambda,
            mu: lambda / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 2 || self.mu < 1 || self.mu > self.lambda {
            return Err(Error::InvalidConfiguration(format!(
                "need 1 <= mu <= lambda and lambda >= 2, got mu={} lambda={}",
                self.mu, self.lambda
            )));
        }
        Ok(())
    }

    pub fn from_configuration(config: &Configuration) -> Result<Self> {
        if config.family != "modcma" {
            return Err(Error::InvalidConfiguration(format!("expected a modcma configuration, got {}", config.family)));
        }
        let get = |name: &str| -> Result<&Value> {
            config.get(name).ok_or_else(|| Error::InvalidConfiguration(format!("missing parameter {name}")))
        };
        let flag = |name: &str| -> Result<bool> {
            get(name)?.as_bool().ok_or_else(|| Error::InvalidConfiguration(format!("{name} must be true/false")))
        };
        let text = |name: &str| -> Result<String> {
            get(name)?
                .as_str()
                .map(str::to_ascii_lowercase)
                .ok_or_else(|| Error::InvalidConfiguration(format!("{name} must be categorical")))
        };
        let count = |name: &str| -> Result<usize> {
            match get(name)?.as_f64() {
                Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize),
                _ => Err(Error::InvalidConfiguration(format!("{name} must be a positive integer"))),
            }
        };
        let bad = |name: &str, v: &str| Error::InvalidConfiguration(format!("unknown {name} option {v:?}"));
        let sampler = text("base_sampler")?;
        let mirrored = text("mirrored")?;
        let weights = text("weights_option")?;
        let ssa = text("step_size_adaptation")?;
        let restart = text("local_restart")?;
        let cfg = CmaConfig {
            covariance: flag("covariance")?,
            active: flag("active")?,
            base_sampler: SamplerKind::parse(&sampler).ok_or_else(|| bad("base_sampler", &sampler))?,
            elitist: flag("elitist")?,
            mirrored: match mirrored.as_str() {
                "off" | "none" => Mirrored::Off,
                "mirrored" => Mirrored::Mirrored,
                "pairwise" | "mirrored pairwise" => Mirrored::Pairwise,
                _ => return Err(bad("mirrored", &mirrored)),
            },
            weights: match weights.as_str() {
                "default" => WeightKind::Default,
                "equal" => WeightKind::Equal,
                "lambda_decay" | "1/2^lambda" => WeightKind::LambdaDecay,
                _ => return Err(bad("weights_option", &weights)),
            },
            step_size: match ssa.as_str() {
                "csa" => StepSize::Csa,
                "psr" => StepSize::Psr,
                _ => return Err(bad("step_size_adaptation", &ssa)),
            },
            local_restart: match restart.as_str() {
                "none" | "off" => Restart::None,
                "ipop" => Restart::Ipop,
                "bipop" => Restart::Bipop,
                _ => return Err(bad("local_restart", &restart)),
            },
            lambda: count("lambda")?,
            mu: count("mu")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Raw λ-decay weights `1/2^i + 1/(λ 2^λ)` for `i = 1..=λ`.
pub fn lambda_decay_raw(lambda: usize) -> Vec<f64> {
    let tail = 1.0 / (lambda as f64 * 2f64.powi(lambda as i32));
    (1..=lambda).map(|i| 0.5f64.powi(i as i32) + tail).collect()
}

/// Positive recombination weights for the best `μ` offspring, summing to 1.
///
/// The default kind uses `ln((λ+1)/2) − ln i`; when `μ > λ/2` that expression
/// turns non-positive, so `ln(μ + ½) − ln i` is used instead.
pub fn recombination_weights(kind: WeightKind, lambda: usize, mu: usize) -> Vec<f64> {
    assert!(mu >= 1 && mu <= lambda, "need 1 <= mu <= lambda");
    let raw: Vec<f64> = match kind {
        WeightKind::Equal => vec![1.0; mu],
        WeightKind::LambdaDecay => lambda_decay_raw(lambda).into_iter().take(mu).collect(),
        WeightKind::Default => {
            let top = if 2 * mu <= lambda { ((lambda + 1) as f64 / 2.0).ln() } else { (mu as f64 + 0.5).ln() };
            (1..=mu).map(|i| top - (i as f64).ln()).collect()
        }
    };
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

/// Strategy constants derived from `d`, `λ` and the positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E‖N(0, I)‖.
    pub chi_n: f64,
}

impl Constants {
    pub fn new(dim: usize, weights: &[f64]) -> Self {
        let d = dim as f64;
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_1 = 2.0 / ((d + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0).powi(2) + mu_eff));
        let chi_n = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
        Constants { mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }
}

/// Negative weights for ranks `μ+1..=λ` (zero where the log-rank formula is
/// still positive), scaled to the largest total mass keeping `C` positive
/// definite.
pub fn active_weights(dim: usize, lambda: usize, mu: usize, k: &Constants) -> Vec<f64> {
    let top = ((lambda + 1) as f64 / 2.0).ln();
    let raw: Vec<f64> = (mu + 1..=lambda).map(|i| (top - (i as f64).ln()).min(0.0)).collect();
    let mass: f64 = raw.iter().map(|w| w.abs()).sum();
    if mass == 0.0 {
        return raw;
    }
    let sq: f64 = raw.iter().map(|w| w * w).sum();
    let mu_eff_neg = mass * mass / sq;
    let target = (1.0 + k.c_1 / k.c_mu)
        .min(1.0 + 2.0 * mu_eff_neg / (k.mu_eff + 2.0))
        .min((1.0 - k.c_1 - k.c_mu) / (dim as f64 * k.c_mu));
    raw.into_iter().map(|w| w * target / mass).collect()
}

/// One CMA-ES instance between restarts, driven through `ask` / `tell`.
#[derive(Clone, Debug)]
pub struct CmaEs {
    cfg: CmaConfig,
    dim: usize,
    weights: Vec<f64>,
    neg_weights: Vec<f64>,
    k: Constants,
    mean: Vec<f64>,
    sigma: f64,
    sigma0: f64,
    c: Matrix,
    /// Eigenvectors of `C` (columns) and square roots of its eigenvalues.
    b: Matrix,
    d: Vec<f64>,
    inv_sqrt: Matrix,
    eigen_interval: usize,
    last_eigen: usize,
    ps: Vec<f64>,
    pc: Vec<f64>,
    generation: usize,
    sampler: Sampler,
    prev_fitness: Option<Vec<f64>>,
    psr_s: f64,
    parents: Vec<(Vec<f64>, f64)>,
    history: VecDeque<f64>,
    history_len: usize,
    stop: Option<&'static str>,
}

impl CmaEs {
    pub fn new(cfg: &CmaConfig, dim: usize, mean: Vec<f64>, sigma0: f64, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        assert_eq!(mean.len(), dim);
        let weights = recombination_weights(cfg.weights, cfg.lambda, cfg.mu);
        let k = Constants::new(dim, &weights);
        let neg_weights = if cfg.active && cfg.covariance {
            active_weights(dim, cfg.lambda, cfg.mu, &k)
        } else {
            Vec::new()
        };
        let eigen_interval = ((1.0 / (10.0 * dim as f64 * (k.c_1 + k.c_mu))).floor() as usize).max(1);
        let sampler = Sampler::new(cfg.base_sampler, dim, rng)?;
        Ok(CmaEs {
            cfg: cfg.clone(),
            dim,
            weights,
            neg_weights,
            mean,
            sigma: sigma0,
            sigma0,
            c: Matrix::identity(dim),
            b: Matrix::identity(dim),
            d: vec![1.0; dim],
            inv_sqrt: Matrix::identity(dim),
            eigen_interval,
            last_eigen: 0,
            ps: vec![0.0; dim],
            pc: vec![0.0; dim],
            generation: 0,
            sampler,
            prev_fitness: None,
            psr_s: 0.0,
            parents: Vec::new(),
            history: VecDeque::new(),
            history_len: 10 + (30.0 * dim as f64 / cfg.lambda as f64).ceil() as usize,
            stop: None,
            k,
        })
    }

    pub fn config(&self) -> &CmaConfig {
        &self.cfg
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn negative_weights(&self) -> &[f64] {
        &self.neg_weights
    }

    pub fn constants(&self) -> &Constants {
        &self.k
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evolution_paths(&self) -> (&[f64], &[f64]) {
        (&self.ps, &self.pc)
    }

    /// Sets `p_σ`; exposed for step-size tests.
    pub fn set_sigma_path(&mut self, ps: Vec<f64>) {
        self.ps = ps;
    }

    /// Best stored parent fitness (elitist mode only).
    pub fn best_parent(&self) -> Option<f64> {
        self.parents.first().map(|p| p.1)
    }

    /// Name of the stop condition that fired, if any.
    pub fn stop_reason(&self) -> Option<&'static str> {
        self.stop
    }

    /// Draws `λ` candidates `m + σ B D z`. Mirrored modes reuse `−z` for
    /// every odd index.
    pub fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.cfg.lambda);
        let mut last_z: Vec<f64> = Vec::new();
        for k in 0..self.cfg.lambda {
            let z = if self.cfg.mirrored != Mirrored::Off && k % 2 == 1 {
                last_z.iter().map(|v| -v).collect()
            } else {
                self.sampler.next_z(rng)
            };
            let scaled: Vec<f64> = z.iter().zip(&self.d).map(|(a, b)| a * b).collect();
            let y = self.b.mul_vec(&scaled);
            out.push(self.mean.iter().zip(&y).map(|(m, yi)| m + self.sigma * yi).collect());
            last_z = z;
        }
        out
    }

    /// Order in which candidates compete for selection.
    fn rank(&self, xs: &[Vec<f64>], fs: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let key = |f: f64| if f.is_nan() { f64::INFINITY } else { f };
        let mut primary: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut secondary: Vec<(Vec<f64>, f64)> = Vec::new();
        if self.cfg.mirrored == Mirrored::Pairwise {
            for pair in (0..xs.len()).collect::<Vec<_>>().chunks(2) {
                let mut p: Vec<usize> = pair.to_vec();
                p.sort_by(|&a, &b| key(fs[a]).total_cmp(&key(fs[b])));
                primary.push((xs[p[0]].clone(), fs[p[0]]));
                if let Some(&w) = p.get(1) {
                    secondary.push((xs[w].clone(), fs[w]));
                }
            }
        } else {
            primary.extend(xs.iter().cloned().zip(fs.iter().copied()));
        }
        if self.cfg.elitist {
            primary.extend(self.parents.iter().cloned());
        }
        primary.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
        secondary.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
        primary.extend(secondary);
        primary
    }

    /// Updates the distribution from evaluated candidates (points as
    /// evaluated, i.e. after any box saturation).
    pub fn tell(&mut self, xs: &[Vec<f64>], fs: &[f64]) {
        assert_eq!(xs.len(), fs.len());
        let n = self.dim;
        let mu = self.cfg.mu;
        let ranked = self.rank(xs, fs);
        let ys: Vec<Vec<f64>> =
            ranked.iter().map(|(x, _)| x.iter().zip(&self.mean).map(|(a, m)| (a - m) / self.sigma).collect()).collect();

        let mut yw = vec![0.0; n];
        for (w, y) in self.weights.iter().zip(&ys) {
            for (a, b) in yw.iter_mut().zip(y) {
                *a += w * b;
            }
        }
        for (m, y) in self.mean.iter_mut().zip(&yw) {
            *m += self.sigma * y;
        }

        let k = &self.k;
        let cs = k.c_sigma;
        let zw = self.inv_sqrt.mul_vec(&yw);
        let coef = (cs * (2.0 - cs) * k.mu_eff).sqrt();
        for (p, z) in self.ps.iter_mut().zip(&zw) {
            *p = (1.0 - cs) * *p + coef * z;
        }
        let ps_norm = norm(&self.ps);
        let denom = (1.0 - (1.0 - cs).powi(2 * (self.generation as i32 + 1))).sqrt();
        let hsig = ps_norm / denom < (1.4 + 2.0 / (n as f64 + 1.0)) * k.chi_n;

        if self.cfg.covariance {
            let cc = k.c_c;
            let coef = if hsig { (cc * (2.0 - cc) * k.mu_eff).sqrt() } else { 0.0 };
            for (p, y) in self.pc.iter_mut().zip(&yw) {
                *p = (1.0 - cc) * *p + coef * y;
            }
            let delta = if hsig { 0.0 } else { cc * (2.0 - cc) };
            let neg_sum: f64 = self.neg_weights.iter().sum();
            let decay = 1.0 - k.c_1 - k.c_mu * (1.0 + neg_sum) + k.c_1 * delta;
            let mut c = self.c.clone();
            c.scale(decay);
            c.add_outer(k.c_1, &self.pc, &self.pc);
            for (w, y) in self.weights.iter().zip(&ys) {
                c.add_outer(k.c_mu * w, y, y);
            }
            let tail = &ys[ys.len() - self.neg_weights.len()..];
            for (w, y) in self.neg_weights.iter().zip(tail) {
                let z = self.inv_sqrt.mul_vec(y);
                let zz = dot(&z, &z);
                if zz > 0.0 {
                    c.add_outer(k.c_mu * w * n as f64 / zz, y, y);
                }
            }
            c.symmetrize();
            self.c = c;
        }

        match self.cfg.step_size {
            StepSize::Csa => {
                self.sigma *= ((k.c_sigma / k.d_sigma) * (ps_norm / k.chi_n - 1.0)).exp();
            }
            StepSize::Psr => {
                if let Some(prev) = &self.prev_fitness {
                    let z = psr_success(prev, fs);
                    self.psr_s = (1.0 - PSR_SMOOTHING) * self.psr_s + PSR_SMOOTHING * (z - PSR_TARGET);
                    self.sigma *= (self.psr_s / PSR_DAMPING).exp();
                }
                self.prev_fitness = Some(fs.to_vec());
            }
        }
        self.sigma = self.sigma.clamp(SIGMA_MIN, SIGMA_MAX);

        if self.cfg.elitist {
            self.parents = ranked.into_iter().take(mu).collect();
        }
        self.generation += 1;
        if self.cfg.covariance && self.generation - self.last_eigen >= self.eigen_interval {
            self.refresh_eigen();
        }
        self.check_stop(fs);
    }

    /// Recomputes `B`, `D` and `C^{-1/2}`, repairing `C` if an eigenvalue
    /// dropped to the floor.
    pub fn refresh_eigen(&mut self) {
        let mut e = jacobi_eigen(&self.c);
        let top = e.values.last().copied().unwrap_or(1.0).max(EIGEN_FLOOR);
        if e.values[0] <= EIGEN_FLOOR {
            let floor = (EIGEN_FLOOR * top).max(EIGEN_FLOOR * 10.0);
            e.values.iter_mut().for_each(|v| *v = v.max(floor));
            let mut c = Matrix::zeros(self.dim);
            for (i, &v) in e.values.iter().enumerate() {
                let col = e.vectors.column(i);
                c.add_outer(v, &col, &col);
            }
            c.symmetrize();
            self.c = c;
        }
        self.d = e.values.iter().map(|v| v.sqrt()).collect();
        let mut inv = Matrix::zeros(self.dim);
        for (i, &v) in e.values.iter().enumerate() {
            let col = e.vectors.column(i);
            inv.add_outer(1.0 / v.sqrt(), &col, &col);
        }
        self.inv_sqrt = inv;
        self.b = e.vectors;
        self.last_eigen = self.generation;
    }

    fn check_stop(&mut self, fs: &[f64]) {
        let best = fs.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.history.push_back(best);
        if self.history.len() > self.history_len {
            self.history.pop_front();
        }
        if self.history.len() == self.history_len {
            let hmax = self.history.iter().copied().fold(worst, f64::max);
            let hmin = self.history.iter().copied().fold(best, f64::min);
            if hmax - hmin < TOLFUN {
                self.stop = Some("tolfun");
                return;
            }
        }
        if self.cfg.covariance {
            let (lo, hi) = (self.d[0], self.d[self.dim - 1]);
            if (hi * hi) / (lo * lo) > MAX_CONDITION {
                self.stop = Some("condition");
                return;
            }
            let axis = self.generation % self.dim;
            let col = self.b.column(axis);
            let shift = 0.1 * self.sigma * self.d[axis];
            if self.mean.iter().zip(&col).all(|(m, v)| m + shift * v == *m) {
                self.stop = Some("noeffectaxis");
                return;
            }
        }
        let spread = (0..self.dim).map(|i| self.c[(i, i)].sqrt()).fold(0.0, f64::max);
        if self.sigma * spread < 1e-12 * self.sigma0 {
            self.stop = Some("tolx");
        }
    }
}

/// Success measure in `[-1, 1]`: positive when the current offspring rank
/// better than the previous ones in the merged population.
pub fn psr_success(prev: &[f64], cur: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = prev.iter().map(|&f| (f, false)).chain(cur.iter().map(|&f| (f, true))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mid-ranks for ties.
    let mut ranks = vec![0.0; all.len()];
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].iter_mut().for_each(|v| *v = r);
        i = j + 1;
    }
    let (mut sp, mut sc) = (0.0, 0.0);
    for ((_, is_cur), r) in all.iter().zip(&ranks) {
        if *is_cur {
            sc += r;
        } else {
            sp += r;
        }
    }
    let n = prev.len().max(cur.len()) as f64;
    (sp - sc) / (n * n)
}

/// Restart bookkeeping for IPOP / BIPOP.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartPolicy {
    pub kind: Restart,
    pub base_lambda: usize,
    pub base_mu: usize,
    pub large_restarts: u32,
    pub budget_large: usize,
    pub budget_small: usize,
    /// Regime of the run in progress; `None` for the initial run, which is
    /// booked to neither regime.
    pub current: Option<bool>,
}

/// Population and step size for the next run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartPlan {
    pub lambda: usize,
    pub mu: usize,
    pub sigma_factor: f64,
    pub large: bool,
}

impl RestartPolicy {
    pub fn new(kind: Restart, base_lambda: usize, base_mu: usize) -> Self {
        RestartPolicy {
            kind,
            base_lambda,
            base_mu,
            large_restarts: 0,
            budget_large: 0,
            budget_small: 0,
            current: None,
        }
    }

    fn scaled_mu(&self, lambda: usize) -> usize {
        ((self.base_mu as f64 * lambda as f64 / self.base_lambda as f64).floor() as usize).clamp(1, lambda)
    }

    /// Books `used` evaluations to the regime that just finished and picks
    /// the next run. BIPOP runs the small regime whenever it has consumed
    /// fewer evaluations than the large one, so the first restart is large.
    pub fn next(&mut self, used: usize, rng: &mut Rng) -> RestartPlan {
        match self.current {
            Some(true) => self.budget_large += used,
            Some(false) => self.budget_small += used,
            None => {}
        }
        match self.kind {
            Restart::None => RestartPlan { lambda: self.base_lambda, mu: self.base_mu, sigma_factor: 1.0, large: true },
            Restart::Ipop => {
                self.large_restarts += 1;
                let lambda = self.base_lambda << self.large_restarts;
                RestartPlan { lambda, mu: self.scaled_mu(lambda), sigma_factor: 1.0, large: true }
            }
            Restart::Bipop => {
                if self.budget_small < self.budget_large {
                    self.current = Some(false);
                    let large_lambda = (self.base_lambda << self.large_restarts) as f64;
                    let u: f64 = rng.random();
                    let ratio = 0.5 * large_lambda / self.base_lambda as f64;
                    let lambda = ((self.base_lambda as f64 * ratio.powf(u * u)).floor() as usize).max(2);
                    RestartPlan {
                        lambda,
                        mu: self.scaled_mu(lambda),
                        sigma_factor: 10f64.powf(-2.0 * rng.random::<f64>()),
                        large: false,
                    }
                } else {
                    self.current = Some(true);
                    self.large_restarts += 1;
                    let lambda = self.base_lambda << self.large_restarts;
                    RestartPlan { lambda, mu: self.scaled_mu(lambda), sigma_factor: 1.0, large: true }
                }
            }
        }
    }
}

/// Runs the configured CMA-ES on `objective` for exactly `budget`
/// evaluations. The initial mean is uniform in the box and `σ₀` is a fifth of
/// the box width.
pub fn run(cfg: &CmaConfig, objective: &mut dyn Objective, budget: usize, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let dim = objective.dim();
    let mut ev = Evaluator::new(objective, budget);
    let (lb, ub) = ev.bounds();
    let sigma0 = 0.2 * (ub - lb);
    let mut policy = RestartPolicy::new(cfg.local_restart, cfg.lambda, cfg.mu);
    let mut current = cfg.clone();
    let mut sigma = sigma0;
    let mut restarts = 0u32;
    'runs: loop {
        let mean: Vec<f64> = (0..dim).map(|_| rng.random_range(lb..ub)).collect();
        let mut es = CmaEs::new(&current, dim, mean, sigma, &mut rng)?;
        let start = ev.used();
        loop {
            let mut xs = es.ask(&mut rng);
            let mut fs = Vec::with_capacity(xs.len());
            for x in xs.iter_mut() {
                ev.clamp(x);
                match ev.evaluate(x) {
                    Some(f) => fs.push(f),
                    None => break 'runs,
                }
            }
            es.tell(&xs, &fs);
            if ev.exhausted() {
                break 'runs;
            }
            if cfg.local_restart != Restart::None && es.stop_reason().is_some() {
                break;
            }
        }
        let plan = policy.next(ev.used() - start, &mut rng);
        current.lambda = plan.lambda;
        current.mu = plan.mu;
        sigma = sigma0 * plan.sigma_factor;
        restarts += 1;
        log::debug!("restart {restarts}: lambda={} large={}", plan.lambda, plan.large);
    }
    Ok(ev.finish(restarts))
}

#[cfg(test)]
mod tests;
