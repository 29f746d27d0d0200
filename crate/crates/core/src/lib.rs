//! EEG spatial super-resolution.
//!
//! Reconstructs a dense electrode montage from a sparse subset with a
//! transformer that alternates attention across electrodes and across time.

pub mod attention;
pub mod baselines;
pub mod blocks;
pub mod config;
pub mod checkpoint;
pub mod data;
pub mod downstream;
pub mod error;
pub mod layers;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod montage;
pub mod params;
pub mod plot;
pub mod positional;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use montage::ElectrodeMontage;
pub use tensor::Tensor;
