//! Label-noise SGD for small ReLU networks: exact manual backpropagation,
//! activation-sparsity instrumentation, deterministic sweeps and checkers
//! for the norm-decay and neuron-death dynamics.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choice.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod idx;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod netfile;
pub mod rng;
pub mod scalar;
pub mod theorems;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector64 = linalg::Vector<f64>;
pub type Vector32 = linalg::Vector<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Network64 = model::Network<f64>;
pub type Network32 = model::Network<f32>;
pub type ForwardTrace64 = model::ForwardTrace<f64>;
pub type Dataset64 = data::LabeledDataset<f64>;
