//! Full-model assembly, configuration, parameter accounting and weight files.

mod config;
mod io;
mod model;

pub use config::{Denoise, ModelConfig, Variant};
pub use io::{decode_model, encode_model, load_checkpoint, load_weights, save_checkpoint, save_weights};
pub use model::{Model, ModelCache};

use crate::nncore::{Parameterized, Scalar};

/// Total number of scalar parameters.
pub fn param_count<T: Scalar>(model: &Model<T>) -> usize {
    model.param_count()
}
