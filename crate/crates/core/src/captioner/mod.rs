//! Soft-attention LSTM caption decoder over precomputed feature grids.
//!
//! All arithmetic is f64 and single-threaded during training; gradients are
//! derived by hand and checked against finite differences.

mod decode;
mod features;
mod model;
mod params;
pub mod tensor;
mod train;

pub use decode::{decode_all, greedy_decode, AttentionExport, AttentionStep, DecodeResult};
pub use features::{
    load_features, parse_features, save_features, synthetic_grid, write_features, FeatureGrid,
    FeatureSource, DEFAULT_LOCATIONS,
};
pub use model::{attend, backward, backward_into, forward_loss, lstm_step, Attention, Tape};
pub use params::{init_decoder, DecoderParams, Dims, TENSOR_NAMES};
pub use train::{encode_caption, train, train_from, truncate_gold, TrainConfig, TrainOutcome};
