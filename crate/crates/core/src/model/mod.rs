//! Dense autoencoder, its trainer and on-disk format.

mod ae;
mod io;
mod train;

pub use ae::{validate_dims, AeModel, Gradients, BASELINE_DIMS};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, TrainConfig, TrainReport};

/// MACs for one forward pass of a single input vector.
pub fn count_macs<F: ndarray::NdFloat>(model: &AeModel<F>) -> u64 {
    model.count_macs()
}
