//! Training and inference runtime for multi-scale attention purification
//! networks with channel-wise shrinkage denoising (MSAP-DM), aimed at
//! sensor-based human activity recognition.
//!
//! Every layer has a hand-written backward pass; there is no autodiff tape.
//! Layers are generic over [`nncore::Scalar`] so the same code runs in `f32`
//! for training and `f64` for finite-difference gradient checks.

pub mod attention;
pub mod benchmark;

pub mod blocks;
pub mod container;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod nncore;
pub mod training;

pub use error::{Error, Result};
