//! BBOB-style noiseless benchmark problems with seeded instance transforms,
//! the uniform-fitness function f0 used for structural-bias tests, and a
//! plug-in registry for external objectives.
//!
//! Instances are generated by our own seeding scheme (not bit-compatible
//! with COCO): every random quantity is drawn from a ChaCha8 stream keyed by
//! `(fid, iid, dim, purpose)`. The optimum `xopt` is uniform in `[-4, 4]^d`
//! (with the usual function-specific exceptions), `fopt` is a Cauchy draw
//! clipped to `[-1000, 1000]` and rounded to two decimals, and rotations are
//! Gram-Schmidt orthogonalized standard-normal matrices.

mod functions;
pub mod transforms;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::random_rotation;
use crate::num::Real;
use crate::rng::{mix_seed, rng_from_seed, Rng};

pub use functions::{ellipsoid_core, rastrigin_core, rosenbrock_core, sphere_core};

/// Function ids implemented natively.
pub const NATIVE_FIDS: [u32; 24] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24];

pub const BBOB_LOWER: f64 = -5.0;
pub const BBOB_UPPER: f64 = 5.0;

pub fn function_name(fid: u32) -> &'static str {
    match fid {
        1 => "Sphere",
        2 => "Ellipsoid separable",
        3 => "Rastrigin separable",
        4 => "Skew Rastrigin-Bueche",
        5 => "Linear slope",
        6 => "Attractive sector",
        7 => "Step-ellipsoid",
        8 => "Rosenbrock",
        9 => "Rosenbrock rotated",
        10 => "Ellipsoid",
        11 => "Discus",
        12 => "Bent cigar",
        13 => "Sharp ridge",
        14 => "Sum of different powers",
        15 => "Rastrigin",
        16 => "Weierstrass",
        17 => "Schaffer F7, condition 10",
        18 => "Schaffer F7, condition 1000",
        19 => "Griewank-Rosenbrock F8F2",
        20 => "Schwefel x*sin(x)",
        21 => "Gallagher 101 peaks",
        22 => "Gallagher 21 peaks",
        23 => "Katsuura",
        24 => "Lunacek bi-Rastrigin",
        _ => "unknown",
    }
}

/// Randomized parts of an instance, all derived from `(fid, iid, dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceTransform<T> {
    pub xopt: Vec<T>,
    pub fopt: T,
    /// Row-major `d × d` rotation.
    pub r: Vec<T>,
    /// Row-major `d × d` rotation.
    pub q: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Peaks<T> {
    /// `R · y_i` for every peak centre.
    pub rotated_centers: Vec<Vec<T>>,
    pub weights: Vec<T>,
    /// Diagonal of `C_i` in the rotated frame.
    pub scales: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem<T> {
    fid: u32,
    dim: usize,
    iid: u32,
    transform: InstanceTransform<T>,
    /// ±1 pattern used by f5, f20 and f24.
    signs: Vec<T>,
    peaks: Option<Peaks<T>>,
    /// Core value at `xopt`; subtracted so that `evaluate(xopt) == fopt` exactly.
    raw_at_opt: T,
}

fn stream(fid: u32, iid: u32, dim: usize, purpose: u64) -> Rng {
    rng_from_seed(mix_seed(&[0xBB0B, fid as u64, iid as u64, dim as u64, purpose]))
}

fn cast<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Builds a native BBOB-style problem.
pub fn make_problem<T: Real>(fid: u32, dim: usize, iid: u32) -> Result<Problem<T>> {
    if !NATIVE_FIDS.contains(&fid) {
        return Err(Error::UnsupportedFunction { fid, supported: supported_list(&NATIVE_FIDS) });
    }
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
    }
    if iid < 1 {
        return Err(Error::InvalidArgument("instance ids start at 1".into()));
    }
    let d = dim;
    let mut rng = stream(fid, iid, d, 0);
    let mut xopt: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
    let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
    let fopt = ((100.0 * (std::f64::consts::PI * (u - 0.5)).tan()).clamp(-1000.0, 1000.0) * 100.0).round() / 100.0;
    let signs: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let r = random_rotation(d, &mut stream(fid, iid, d, 1));
    let q = random_rotation(d, &mut stream(fid, iid, d, 2));
    let c = (d as f64).sqrt() / 8.0;
    let c = c.max(1.0);

    let mut peaks = None;
    match fid {
        5 => xopt = signs.iter().map(|s| 5.0 * s).collect(),
        8 => xopt.iter_mut().for_each(|x| *x *= 0.75),
        9 | 19 => xopt = r.tr_mul_vec(&vec![0.5 / c; d]),
        20 => xopt = signs.iter().map(|s| 0.5 * 4.2096874633 * s).collect(),
        24 => xopt = signs.iter().map(|s| 0.5 * functions::LUNACEK_MU0 * s).collect(),
        21 | 22 => {
            let (n_peaks, alpha_first, y1_bound) = if fid == 21 { (101, 1000.0, 4.0) } else { (21, 1.0e6, 3.92) };
            let mut prng = stream(fid, iid, d, 3);
            let mut alphas: Vec<f64> =
                (0..n_peaks - 1).map(|j| 1000f64.powf(2.0 * j as f64 / (n_peaks - 2) as f64)).collect();
            alphas.shuffle(&mut prng);
            alphas.insert(0, alpha_first);
            let mut centers = Vec::with_capacity(n_peaks);
            let mut weights = Vec::with_capacity(n_peaks);
            let mut scales = Vec::with_capacity(n_peaks);
            for (i, &alpha) in alphas.iter().enumerate() {
                let bound = if i == 0 { y1_bound } else { 4.9 };
                let y: Vec<f64> = (0..d).map(|_| prng.random_range(-bound..bound)).collect();
                let w = if i == 0 { 10.0 } else { 1.1 + 8.0 * (i - 1) as f64 / (n_peaks - 2) as f64 };
                let mut diag = transforms::lambda_diag(alpha, d);
                diag.shuffle(&mut prng);
                let norm = alpha.powf(0.25);
                scales.push(cast::<T>(&diag.iter().map(|v| v / norm).collect::<Vec<_>>()));
                centers.push(cast::<T>(&r.mul_vec(&y)));
                weights.push(T::lit(w));
                if i == 0 {
                    xopt = y;
                }
            }
            peaks = Some(Peaks { rotated_centers: centers, weights, scales });
        }
        _ => {}
    }

    let mut problem = Problem {
        fid,
        dim: d,
        iid,
        transform: InstanceTransform {
            xopt: cast(&xopt),
            fopt: T::lit(fopt),
            r: cast(r.as_slice()),
            q: cast(q.as_slice()),
        },
        signs: cast(&signs),
        peaks,
        raw_at_opt: T::zero(),
    };
    problem.raw_at_opt = problem.raw(&problem.transform.xopt.clone());
    Ok(problem)
}

fn supported_list(ids: &[u32]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

impl<T: Real> Problem<T> {
    pub fn fid(&self) -> u32 {
        self.fid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iid(&self) -> u32 {
        self.iid
    }

    pub fn bounds(&self) -> (T, T) {
        (T::lit(BBOB_LOWER), T::lit(BBOB_UPPER))
    }

    pub fn fopt(&self) -> T {
        self.transform.fopt
    }

    pub fn xopt(&self) -> &[T] {
        &self.transform.xopt
    }

    pub fn transform(&self) -> &InstanceTransform<T> {
        &self.transform
    }

    /// Objective value; defined on all of ℝ^d.
    pub fn evaluate(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        self.transform.fopt + (self.raw(x) - self.raw_at_opt)
    }

    pub(crate) fn signs(&self) -> &[T] {
        &self.signs
    }

    pub(crate) fn peaks(&self) -> Option<&Peaks<T>> {
        self.peaks.as_ref()
    }
}

/// Interface the optimizers drive. Evaluation takes `&mut self` because
/// some objectives (f0) carry a random stream.
pub trait Objective: Send {
    fn dim(&self) -> usize;
    /// Box constraint, identical for every coordinate.
    fn bounds(&self) -> (f64, f64);
    fn evaluate(&mut self, x: &[f64]) -> f64;
    /// Known optimum value, if any.
    fn fopt(&self) -> Option<f64>;
    fn name(&self) -> String;
}

impl<T: Real> Objective for Problem<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> (f64, f64) {
        (BBOB_LOWER, BBOB_UPPER)
    }

    fn evaluate(&mut self, x: &[f64]) -> f64 {
        let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
        Problem::evaluate(self, &xt).as_f64()
    }

    fn fopt(&self) -> Option<f64> {
        Some(self.transform.fopt.as_f64())
    }

    fn name(&self) -> String {
        format!("f{}_d{}_i{}", self.fid, self.dim, self.iid)
    }
}

/// Uniform-fitness test function on `[0, 1]^d`: every evaluation returns a
/// fresh U(0, 1) value independent of the query point. One instance per run.
#[derive(Debug)]
pub struct F0 {
    dim: usize,
    rng: Rng,
}

pub fn make_f0(dim: usize, run_seed: u64) -> F0 {
    F0 { dim, rng: rng_from_seed(mix_seed(&[0xF0, run_seed])) }
}

impl Objective for F0 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn evaluate(&mut self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.rng.random::<f64>()
    }

    fn fopt(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String {
        format!("f0_d{}", self.dim)
    }
}

/// Plain function objective registered through the plug-in interface.
#[derive(Clone)]
pub struct PluginObjective {
    pub name: String,
    pub dim: usize,
    pub bounds: (f64, f64),
    pub fopt: Option<f64>,
    pub f: ObjectiveFn,
}

impl fmt::Debug for PluginObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PluginObjective").field("name", &self.name).field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Objective for PluginObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn evaluate(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn fopt(&self) -> Option<f64> {
        self.fopt
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Plain objective closure used by [`Suite::register_fn`].
pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Builds an objective for `(dim, iid)`.
pub type ObjectiveFactory = Arc<dyn Fn(usize, u32) -> Box<dyn Objective> + Send + Sync>;

/// Problem registry: the native functions plus plug-ins under non-native ids.
#[derive(Clone, Default)]
pub struct Suite {
    plugins: BTreeMap<u32, (String, ObjectiveFactory)>,
}

impl fmt::Debug for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.plugins.iter().map(|(k, (n, _))| format!("{k}:{n}")).collect();
        f.debug_struct("Suite").field("plugins", &names).finish()
    }
}

impl Suite {
    pub fn bbob() -> Self {
        Suite::default()
    }

    /// Registers a plug-in under `fid`; native ids cannot be overridden.
    pub fn register(&mut self, fid: u32, name: impl Into<String>, factory: ObjectiveFactory) -> Result<()> {
        if NATIVE_FIDS.contains(&fid) || fid == 0 {
            return Err(Error::InvalidArgument(format!("function id {fid} is reserved")));
        }
        self.plugins.insert(fid, (name.into(), factory));
        Ok(())
    }

    /// Registers a plain function with fixed bounds; instances are identical.
    pub fn register_fn(
        &mut self,
        fid: u32,
        name: &str,
        bounds: (f64, f64),
        fopt: Option<f64>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<()> {
        let f: ObjectiveFn = Arc::new(f);
        let owned = name.to_string();
        self.register(
            fid,
            name,
            Arc::new(move |dim, _iid| {
                Box::new(PluginObjective { name: owned.clone(), dim, bounds, fopt, f: f.clone() }) as Box<dyn Objective>
            }),
        )
    }

    pub fn supported(&self) -> Vec<u32> {
        NATIVE_FIDS.iter().copied().chain(self.plugins.keys().copied()).collect()
    }

    /// Fails with [`Error::UnsupportedFunction`] unless `fid` is native or registered.
    pub fn check(&self, fid: u32) -> Result<()> {
        if NATIVE_FIDS.contains(&fid) || self.plugins.contains_key(&fid) {
            Ok(())
        } else {
            Err(Error::UnsupportedFunction { fid, supported: supported_list(&self.supported()) })
        }
    }

    pub fn make(&self, fid: u32, dim: usize, iid: u32) -> Result<Box<dyn Objective>> {
        if NATIVE_FIDS.contains(&fid) {
            return Ok(Box::new(make_problem::<f64>(fid, dim, iid)?));
        }
        match self.plugins.get(&fid) {
            Some((_, factory)) => Ok(factory(dim, iid)),
            None => Err(Error::UnsupportedFunction { fid, supported: supported_list(&self.supported()) }),
        }
    }
}

#[cfg(test)]
mod tests;
