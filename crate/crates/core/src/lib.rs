//! Post-selection shrinkage estimation for high-dimensional linear regression.
//!
//! The pipeline has three steps:
//!
//! 1. [`selection`]: pick a candidate subset `Ŝ₁` with the Lasso or the
//!    Adaptive Lasso (BIC over a warm-started path) and refit it by least
//!    squares (the restricted estimator, RE).
//! 2. [`wridge`]: fit a ridge penalty on the coefficients outside `Ŝ₁` only,
//!    then hard-threshold them at `a_n` to split the complement into a weak
//!    set `Ŝ₂` and a zero set `Ŝ₃` (the weighted ridge estimator, WR).
//! 3. [`shrinkage`]: shrink `WR|Ŝ₁` toward RE with the Stein-type factor
//!    `(ŝ₂ − 2)/Tₙ`, clamped at one for the positive-part version (PSE).
//!
//! [`risktheory`] evaluates the asymptotic distributional risks of these
//! estimators and [`bench`] holds the simulation and evaluation harness.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod risktheory;
pub mod rng;
pub mod selection;
pub mod shrinkage;
pub mod support;
pub mod wridge;

pub use dataset::{Case, Dataset, ThresholdSpec, TrueModel};
pub use error::{Error, Result};
pub use selection::{LassoPath, Method, Selection, SelectionConfig};
pub use shrinkage::{EstimatorBundle, PipelineConfig};
pub use support::{Support, SubsetPartition};
pub use wridge::{TuningConfig, WrFit};
