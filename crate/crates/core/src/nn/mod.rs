//! Dense network engine: forward evaluation, reverse-mode gradients, Adam.

mod adam;
mod mlp;

pub use adam::{
    adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_DECAY_PERIOD, DEFAULT_DECAY_RATE, DEFAULT_EPSILON,
};
pub use mlp::{elu, param_norm_sq, Activation, Backward, ForwardCache, Gradients, Mlp, MlpDocument};
