//! Hermite-basis representations of Gaussian processes, their Wick
//! calculus and local-time estimators.
//!
//! The basis, chaos and quadrature kernels are generic over [`Scalar`]
//! (`f32` or `f64`); process models and Monte Carlo work in `f64`. The
//! aliases below fix the scalar for the common cases.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod error;
pub mod hermite;
pub mod integrate;
pub mod linalg;
pub mod localtime;
pub mod procmodel;
pub mod quad;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use procmodel::{Domain, Family, HurstFunction, ModelKnobs, ProcessModel};
pub use scalar::Scalar;
pub use simulate::{GridSpec, PathEnsemble, Sampler};

pub type Basis = hermite::HermiteBasis<f64>;
pub type Basis32 = hermite::HermiteBasis<f32>;
pub type Coeffs = hermite::CoeffSeq<f64>;
pub type Coeffs32 = hermite::CoeffSeq<f32>;
pub type Chaos = chaos::ChaosVector<f64>;
pub type Chaos32 = chaos::ChaosVector<f32>;
pub type TestFn = chaos::TestFunction<f64>;
pub type TestFn32 = chaos::TestFunction<f32>;
pub type Rule = quad::FixedRule<f64>;
pub type Rule32 = quad::FixedRule<f32>;
