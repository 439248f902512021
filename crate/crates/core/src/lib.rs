//! Explainable benchmarking of modular optimization heuristics.
//!
//! The crate enumerates or samples configuration spaces of modular CMA-ES
//! and modular differential evolution, runs them on a BBOB-style suite,
//! scores runs with the normalized area over the convergence curve (AOCC),
//! and explains module contributions with tree-ensemble SHAP values,
//! ranking tables, structural-bias tests and landscape-feature based
//! configuration prediction.
//!
//! Numeric kernels that do not depend on an optimizer's internal state are
//! generic over [`Real`] (`f32` or `f64`); the aliases below fix the common
//! `f64` instantiations.

pub mod analysis;
pub mod bias;
pub mod configspace;
pub mod ela;
pub mod error;
pub mod evaluator;
pub mod gbdt;
pub mod linalg;
pub mod modcma;
pub mod modde;
pub mod num;
pub mod rng;
pub mod runner;
pub mod sampling;
pub mod suite;

pub use error::{Error, Result};
pub use num::Real;

pub type Problem = suite::Problem<f64>;
pub type Problem32 = suite::Problem<f32>;
pub type TreeEnsemble = gbdt::TreeEnsemble<f64>;
pub type TreeEnsemble32 = gbdt::TreeEnsemble<f32>;
pub type ShapExplanation = gbdt::ShapExplanation<f64>;
pub type Trajectory = runner::Trajectory<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
