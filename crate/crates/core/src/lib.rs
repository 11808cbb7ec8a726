//! From-scratch forecasting networks for photovoltaic power series, with regularization
//! regimes, error metrics, a benchmark grid runner and overfitting analysis.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases below fix the
//! element type to `f64`, which is what the benchmark pipeline uses.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod params;
pub mod regularization;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type ParamSet = params::ParamSet<f64>;
pub type Model = models::Model<f64>;
pub type Model32 = models::Model<f32>;
pub type WindowSet = data::WindowSet<f64>;
pub type PartitionWindows = data::PartitionWindows<f64>;
pub type EarlyStopper = regularization::EarlyStopper<f64>;
pub type OptimizerState = training::OptimizerState<f64>;
