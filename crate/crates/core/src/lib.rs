//! Post-hoc uncertainty estimation for classifiers that expose a linear
//! softmax head over frozen embeddings.
//!
//! The central estimator is an entropy head initialised from the
//! classifier's own head and fine-tuned to predict misclassification.
//! Around it sit the usual baselines (softmax response, entropy, the
//! Mahalanobis family, robust density estimation, linear and attention
//! probes), bootstrap evaluation, and an ensemble decomposition used to
//! relate scores to epistemic uncertainty.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

pub mod alien;
pub mod baselines;
pub mod benchmark;
pub mod bundle;
pub mod cli;
pub mod ensemble;
mod error;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod optim;
pub mod parallel;
pub mod report;
mod scalar;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type MatrixF32 = Matrix<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type AlienHeadF32 = alien::AlienHead<f32>;
pub type AlienHeadF64 = alien::AlienHead<f64>;
pub type FittedAlienF64 = alien::FittedAlien<f64>;
pub type ProbeHeadF64 = baselines::ProbeHead<f64>;
pub type ScoreVectorF32 = metrics::ScoreVector<f32>;
pub type ScoreVectorF64 = metrics::ScoreVector<f64>;
pub type EnsembleProbsF32 = ensemble::EnsembleProbs<f32>;
pub type EnsembleProbsF64 = ensemble::EnsembleProbs<f64>;
