//! Linear-denoiser diffusion laboratory.
//!
//! A single-step "diffusion model" whose denoiser is an affine map fitted by
//! (ridge) least squares, together with:
//!
//! * [`model`]: clean-data sampling, forward OU noising and OU marginals;
//! * [`denoiser`]: the regression fit and the generated Gaussian;
//! * [`metrics`]: Gaussian KL, its mean/variance split, and the E_OG
//!   sample-set distance;
//! * [`theory`]: deterministic-equivalence predictions for the expected
//!   variance part of the KL, with a Wishart Monte Carlo oracle;
//! * [`chain`]: a multi-step linear-denoiser chain on Gaussian-mixture data;
//! * [`harness`]: seeded sweeps, trial execution and CSV output.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the harness and CLI.

// `!(x > 0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod denoiser;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use chain::{ChainConfig, ChainModel, StepSampling};
pub use denoiser::{GeneratorInit, LinearDenoiser};
pub use metrics::KlReport;
pub use model::{Covariance, DataModel, GaussianSpec, ModelConfig, NoiseLevel, TrainingSet};
pub use theory::{Branch, RidgePair, TheoryKl};

pub type ModelConfig64 = ModelConfig<f64>;
pub type TrainingSet64 = TrainingSet<f64>;
pub type GaussianSpec64 = GaussianSpec<f64>;
pub type LinearDenoiser64 = LinearDenoiser<f64>;
pub type GeneratorInit64 = GeneratorInit<f64>;
pub type KlReport64 = KlReport<f64>;
pub type RidgePair64 = RidgePair<f64>;
pub type TheoryKl64 = TheoryKl<f64>;
pub type ChainConfig64 = ChainConfig<f64>;
pub type ChainModel64 = ChainModel<f64>;

pub type ModelConfig32 = ModelConfig<f32>;
pub type GaussianSpec32 = GaussianSpec<f32>;
pub type RidgePair32 = RidgePair<f32>;
pub type TheoryKl32 = TheoryKl<f32>;
