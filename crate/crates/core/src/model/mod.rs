//! Soft-orthogonal graph network: input transform, message-passing layers
//! with the orthogonality correction, and the prototype head.

pub mod checkpoint;
mod config;
mod features;
mod network;

pub use config::{Backbone, InputTransform, SognConfig};
pub use features::NodeFeatures;
pub use network::{
    backbone_on_tape, backbone_propagate, forward, forward_on_tape, init_params, soc_penalty, sogn_layer, ForwardVars,
    ModelParams,
};
