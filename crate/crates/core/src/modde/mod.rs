//! Modular differential evolution.
//!
//! The donor for target `i` is
//! `v = x_base + F (x_ref − x_base) + Σ_k F (x_r_k − x_s_k)`, which covers
//! DE/rand/1, DE/best/1 and DE/current-to-pbest/1 as special cases. Sampled
//! indices are distinct from each other and from `i` while the population
//! allows it; smaller populations fall back to reuse. With an archive the
//! last subtrahend is drawn from population ∪ archive.
//!
//! Adaptation: jDE resamples each individual's F and CR with probability
//! 0.1 and keeps them on success; SHADE keeps `H = max(5, 6d)` success
//! memories updated with weighted Lehmer (F) and arithmetic (CR) means.
//! The configured F and CR seed the individual values and memories.
//! LPSR shrinks the population linearly to 4, dropping the worst members.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::configspace::{Configuration, Value};
use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, RunOutcome};
use crate::rng::{rng_from_seed, Rng};
use crate::suite::Objective;

pub const PBEST_FRACTION: f64 = 0.1;
pub const LPSR_MIN_LAMBDA: usize = 4;
pub const JDE_TAU: f64 = 0.1;
const SHADE_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Base {
    Best,
    Rand,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    None,
    Best,
    PBest,
    Rand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossoverKind {
    Bin,
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adaptation {
    None,
    Jde,
    Shade,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeConfig {
    pub base: Base,
    pub reference: Reference,
    pub diffs: usize,
    pub archive: bool,
    pub crossover: CrossoverKind,
    pub adaptation: Adaptation,
    pub lpsr: bool,
    pub lambda: usize,
    pub f: f64,
    pub cr: f64,
}

impl Default for DeConfig {
    /// DE/rand/1/bin with λ = 8, F = 0.5, CR = 0.5.
    fn default() -> Self {
        DeConfig {
            base: Base::Rand,
            reference: Reference::None,
            diffs: 1,
            archive: false,
            crossover: CrossoverKind::Bin,
            adaptation: Adaptation::None,
            lpsr: false,
            lambda: 8,
            f: 0.5,
            cr: 0.5,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidConfiguration(m));
        if self.lambda < 4 {
            return err(format!("lambda must be at least 4, got {}", self.lambda));
        }
        if !(1..=2).contains(&self.diffs) {
            return err(format!("diffs must be 1 or 2, got {}", self.diffs));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return err(format!("F must be positive, got {}", self.f));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return err(format!("CR must lie in [0, 1], got {}", self.cr));
        }
        Ok(())
    }

    pub fn from_configuration(config: &Configuration) -> Result<Self> {
        if config.family != "modde" {
            return Err(Error::InvalidConfiguration(format!("expected a modde configuration, got {}", config.family)));
        }
        let get = |name: &str| -> Result<&Value> {
            config.get(name).ok_or_else(|| Error::InvalidConfiguration(format!("missing parameter {name}")))
        };
        let text = |name: &str| -> Result<String> {
            get(name)?
                .as_str()
                .map(str::to_ascii_lowercase)
                .ok_or_else(|| Error::InvalidConfiguration(format!("{name} must be categorical")))
        };
        let num = |name: &str| -> Result<f64> {
            get(name)?.as_f64().ok_or_else(|| Error::InvalidConfiguration(format!("{name} must be numeric")))
        };
        let flag = |name: &str| -> Result<bool> {
            get(name)?.as_bool().ok_or_else(|| Error::InvalidConfiguration(format!("{name} must be true/false")))
        };
        let bad = |name: &str, v: &str| Error::InvalidConfiguration(format!("unknown {name} option {v:?}"));
        let base = text("base")?;
        let reference = text("ref")?;
        let crossover = text("crossover")?;
        let adaptation = text("adaptation_method")?;
        let cfg = DeConfig {
            base: match base.as_str() {
                "best" => Base::Best,
                "rand" => Base::Rand,
                "target" => Base::Target,
                _ => return Err(bad("base", &base)),
            },
            reference: match reference.as_str() {
                "none" => Reference::None,
                "best" => Reference::Best,
                "pbest" => Reference::PBest,
                "rand" => Reference::Rand,
                _ => return Err(bad("ref", &reference)),
            },
            diffs: num("diffs")? as usize,
            archive: flag("archive")?,
            crossover: match crossover.as_str() {
                "bin" => CrossoverKind::Bin,
                "exp" => CrossoverKind::Exp,
                _ => return Err(bad("crossover", &crossover)),
            },
            adaptation: match adaptation.as_str() {
                "none" => Adaptation::None,
                "jde" => Adaptation::Jde,
                "shade" => Adaptation::Shade,
                _ => return Err(bad("adaptation_method", &adaptation)),
            },
            lpsr: flag("lpsr")?,
            lambda: num("lambda")? as usize,
            f: num("F")?,
            cr: num("CR")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Population size under linear reduction after `evals` of `budget`
/// evaluations.
pub fn lpsr_schedule(lambda_init: usize, lambda_min: usize, budget: usize, evals: usize) -> usize {
    let t = evals.min(budget) as f64 / budget as f64;
    (lambda_init as f64 + (lambda_min as f64 - lambda_init as f64) * t).round() as usize
}

/// Binomial or exponential crossover of `target` with `donor`.
pub fn crossover(target: &[f64], donor: &[f64], cr: f64, kind: CrossoverKind, rng: &mut Rng) -> Vec<f64> {
    let d = target.len();
    let mut trial = target.to_vec();
    match kind {
        CrossoverKind::Bin => {
            let j_rand = rng.random_range(0..d);
            for j in 0..d {
                if j == j_rand || rng.random::<f64>() < cr {
                    trial[j] = donor[j];
                }
            }
        }
        CrossoverKind::Exp => {
            let mut j = rng.random_range(0..d);
            let mut len = 0;
            loop {
                trial[j] = donor[j];
                j = (j + 1) % d;
                len += 1;
                if len >= d || rng.random::<f64>() >= cr {
                    break;
                }
            }
        }
    }
    trial
}

/// Where a mutation operand came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Population(usize),
    Archive(usize),
}

/// Indices used to build one donor.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationDraw {
    pub target: usize,
    pub base: usize,
    pub reference: Option<usize>,
    /// `(r, s)` for every difference vector.
    pub pairs: Vec<(usize, Source)>,
}

/// SHADE success-history memories.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadeMemory {
    pub m_f: Vec<f64>,
    pub m_cr: Vec<f64>,
    next: usize,
}

impl ShadeMemory {
    pub fn new(size: usize, f: f64, cr: f64) -> Self {
        ShadeMemory { m_f: vec![f; size], m_cr: vec![cr; size], next: 0 }
    }

    pub fn size_for(dim: usize) -> usize {
        (6 * dim).max(5)
    }

    /// Draws `(F, CR)` from a random memory slot.
    pub fn sample(&self, rng: &mut Rng) -> (f64, f64) {
        let k = rng.random_range(0..self.m_f.len());
        let cr = (self.m_cr[k] + SHADE_SCALE * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0);
        let f = loop {
            let f = self.m_f[k] + SHADE_SCALE * (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan();
            if f > 0.0 {
                break f.min(1.0);
            }
        };
        (f, cr)
    }

    /// `successes` holds `(F, CR, improvement)`; an empty list leaves the
    /// memories untouched.
    pub fn update(&mut self, successes: &[(f64, f64, f64)]) {
        let total: f64 = successes.iter().map(|s| s.2).sum();
        if successes.is_empty() || total <= 0.0 {
            return;
        }
        let (mut num, mut den, mut cr) = (0.0, 0.0, 0.0);
        for &(f, c, delta) in successes {
            let w = delta / total;
            num += w * f * f;
            den += w * f;
            cr += w * c;
        }
        self.m_f[self.next] = num / den;
        self.m_cr[self.next] = cr;
        self.next = (self.next + 1) % self.m_f.len();
    }
}

/// jDE update of one individual's `(F, CR)` before mutation.
pub fn jde_resample(f: f64, cr: f64, rng: &mut Rng) -> (f64, f64, bool, bool) {
    let rf = rng.random::<f64>() < JDE_TAU;
    let f = if rf { 0.1 + 0.9 * rng.random::<f64>() } else { f };
    let rc = rng.random::<f64>() < JDE_TAU;
    let cr = if rc { rng.random::<f64>() } else { cr };
    (f, cr, rf, rc)
}

/// Population, archive and adaptation state of one run.
#[derive(Clone, Debug)]
pub struct DeState {
    pub cfg: DeConfig,
    pub pop: Vec<Vec<f64>>,
    pub fit: Vec<f64>,
    pub archive: Vec<Vec<f64>>,
    pub f_i: Vec<f64>,
    pub cr_i: Vec<f64>,
    pub shade: Option<ShadeMemory>,
}

impl DeState {
    pub fn new(cfg: &DeConfig, pop: Vec<Vec<f64>>, fit: Vec<f64>) -> Self {
        let n = pop.len();
        let dim = pop.first().map_or(0, Vec::len);
        DeState {
            cfg: cfg.clone(),
            f_i: vec![cfg.f; n],
            cr_i: vec![cfg.cr; n],
            shade: (cfg.adaptation == Adaptation::Shade)
                .then(|| ShadeMemory::new(ShadeMemory::size_for(dim), cfg.f, cfg.cr)),
            pop,
            fit,
            archive: Vec::new(),
        }
    }

    pub fn lambda(&self) -> usize {
        self.pop.len()
    }

    pub fn best_index(&self) -> usize {
        argmin(&self.fit)
    }

    /// Draws operands for target `i` and builds the donor with scale `f`.
    pub fn mutate(&self, i: usize, f: f64, rng: &mut Rng) -> (Vec<f64>, MutationDraw) {
        let n = self.lambda();
        let mut used = vec![i];
        let draw = |used: &mut Vec<usize>, rng: &mut Rng| -> usize {
            let free: Vec<usize> = (0..n).filter(|k| !used.contains(k)).collect();
            let k = match free.choose(rng) {
                Some(&k) => k,
                None => rng.random_range(0..n),
            };
            used.push(k);
            k
        };
        let base = match self.cfg.base {
            Base::Best => self.best_index(),
            Base::Target => i,
            Base::Rand => draw(&mut used, rng),
        };
        let reference = match self.cfg.reference {
            Reference::None => None,
            Reference::Best => Some(self.best_index()),
            Reference::PBest => {
                let top = ((PBEST_FRACTION * n as f64).ceil() as usize).max(1);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| self.fit[a].total_cmp(&self.fit[b]));
                Some(order[rng.random_range(0..top)])
            }
            Reference::Rand => Some(draw(&mut used, rng)),
        };
        let mut pairs = Vec::with_capacity(self.cfg.diffs);
        for k in 0..self.cfg.diffs {
            let r = draw(&mut used, rng);
            let last = k + 1 == self.cfg.diffs;
            let s = if last && self.cfg.archive && !self.archive.is_empty() {
                let free: Vec<usize> = (0..n).filter(|k| !used.contains(k)).collect();
                let pick = rng.random_range(0..free.len() + self.archive.len());
                if pick < free.len() {
                    used.push(free[pick]);
                    Source::Population(free[pick])
                } else {
                    Source::Archive(pick - free.len())
                }
            } else {
                Source::Population(draw(&mut used, rng))
            };
            pairs.push((r, s));
        }

        let xb = &self.pop[base];
        let mut v = xb.clone();
        if let Some(r) = reference {
            for (vj, (a, b)) in v.iter_mut().zip(self.pop[r].iter().zip(xb)) {
                *vj += f * (a - b);
            }
        }
        for &(r, s) in &pairs {
            let xs = match s {
                Source::Population(k) => &self.pop[k],
                Source::Archive(k) => &self.archive[k],
            };
            for (vj, (a, b)) in v.iter_mut().zip(self.pop[r].iter().zip(xs)) {
                *vj += f * (a - b);
            }
        }
        (v, MutationDraw { target: i, base, reference, pairs })
    }

    /// Removes the worst members until `lambda` remain; the archive shrinks
    /// with it.
    pub fn shrink_to(&mut self, lambda: usize, rng: &mut Rng) {
        if lambda >= self.lambda() {
            return;
        }
        let mut order: Vec<usize> = (0..self.lambda()).collect();
        order.sort_by(|&a, &b| self.fit[a].total_cmp(&self.fit[b]));
        order.truncate(lambda);
        order.sort_unstable();
        let pick = |v: &Vec<f64>| order.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        self.fit = pick(&self.fit);
        self.f_i = pick(&self.f_i);
        self.cr_i = pick(&self.cr_i);
        self.pop = order.iter().map(|&k| self.pop[k].clone()).collect();
        self.trim_archive(rng);
    }

    fn trim_archive(&mut self, rng: &mut Rng) {
        while self.archive.len() > self.lambda() {
            let k = rng.random_range(0..self.archive.len());
            self.archive.swap_remove(k);
        }
    }

    /// One synchronous generation. Returns `false` if the budget ran out
    /// before every trial was evaluated.
    pub fn generation(&mut self, ev: &mut Evaluator<'_>, rng: &mut Rng) -> bool {
        let n = self.lambda();
        let mut trials = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            let (f, cr) = match self.cfg.adaptation {
                Adaptation::None => (self.cfg.f, self.cfg.cr),
                Adaptation::Jde => {
                    let (f, cr, _, _) = jde_resample(self.f_i[i], self.cr_i[i], rng);
                    (f, cr)
                }
                Adaptation::Shade => self.shade.as_ref().expect("shade memory").sample(rng),
            };
            let (donor, _) = self.mutate(i, f, rng);
            let mut trial = crossover(&self.pop[i], &donor, cr, self.cfg.crossover, rng);
            ev.clamp(&mut trial);
            trials.push(trial);
            params.push((f, cr));
        }
        let mut values = Vec::with_capacity(n);
        for t in &trials {
            match ev.evaluate(t) {
                Some(v) => values.push(v),
                None => return false,
            }
        }
        let mut successes = Vec::new();
        for (i, (trial, ft)) in trials.into_iter().zip(values).enumerate() {
            if ft <= self.fit[i] || self.fit[i].is_nan() {
                if ft < self.fit[i] {
                    successes.push((params[i].0, params[i].1, self.fit[i] - ft));
                }
                let old = std::mem::replace(&mut self.pop[i], trial);
                if self.cfg.archive {
                    self.archive.push(old);
                }
                self.fit[i] = ft;
                if self.cfg.adaptation == Adaptation::Jde {
                    self.f_i[i] = params[i].0;
                    self.cr_i[i] = params[i].1;
                }
            }
        }
        if let Some(mem) = self.shade.as_mut() {
            mem.update(&successes);
        }
        self.trim_archive(rng);
        true
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Runs modular DE for exactly `budget` evaluations, initial population
/// included.
pub fn run(cfg: &DeConfig, objective: &mut dyn Objective, budget: usize, seed: u64) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let dim = objective.dim();
    let mut ev = Evaluator::new(objective, budget);
    let (lb, ub) = ev.bounds();
    let mut pop = Vec::with_capacity(cfg.lambda);
    let mut fit = Vec::with_capacity(cfg.lambda);
    for _ in 0..cfg.lambda {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(lb..ub)).collect();
        match ev.evaluate(&x) {
            Some(f) => fit.push(f),
            None => return Ok(ev.finish(0)),
        }
        pop.push(x);
    }
    let mut state = DeState::new(cfg, pop, fit);
    let lambda_min = LPSR_MIN_LAMBDA.min(cfg.lambda);
    while !ev.exhausted() {
        if !state.generation(&mut ev, &mut rng) {
            break;
        }
        if cfg.lpsr {
            let target = lpsr_schedule(cfg.lambda, lambda_min, budget, ev.used());
            state.shrink_to(target.max(lambda_min), &mut rng);
        }
    }
    Ok(ev.finish(0))
}
