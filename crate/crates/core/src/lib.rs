//! Prioritized selection of heteroscedastic units under false discovery rate
//! control: prior deconvolution, conditional local fdr scoring, the
//! value-to-cost selection rule, r-value rankings and a simulation harness.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, with `F32` variants alongside.

// negated comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deconv;
mod error;
pub mod model;
pub mod rvalue;
mod scalar;
pub mod selection;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::{normal_pdf, std_normal_cdf, std_normal_pdf, std_normal_sf, Real};

pub type Observation = model::Observation<f64>;
pub type TestingProblem = model::TestingProblem<f64>;
pub type TruthLabels = model::TruthLabels<f64>;
pub type MetricsRecord = model::MetricsRecord<f64>;
pub type FittedPrior = deconv::FittedPrior<f64>;
pub type TruePrior = deconv::TruePrior<f64>;
pub type ScoredUnit = selection::ScoredUnit<f64>;
pub type SelectionResult = selection::SelectionResult<f64>;

pub type ObservationF32 = model::Observation<f32>;
pub type FittedPriorF32 = deconv::FittedPrior<f32>;
pub type ScoredUnitF32 = selection::ScoredUnit<f32>;
pub type SelectionResultF32 = selection::SelectionResult<f32>;

pub use model::DecisionVector;
