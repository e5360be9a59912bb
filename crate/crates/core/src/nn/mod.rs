//! Transformer-encoder forward pass with the adaptive linear module.

pub mod kernels;
pub mod linear;
pub mod model;

pub use kernels::{gelu, gelu_scalar, layer_norm, softmax_rows, LayerNormParams};
pub use linear::{
    bucket_index, linear_forward, profile_linear, LinearLayer, ProfileCache, ProfileTimer,
    TransposeFlags, WallClockTimer, FLAG_BUCKETS,
};
pub use model::{
    build_model, encoder_layer, feed_forward, model_forward, self_attention, AttentionWeights,
    EncoderConfig, EncoderLayerWeights, FfnWeights, Model,
};
