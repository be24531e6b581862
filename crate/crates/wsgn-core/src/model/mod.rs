//! Weakly supervised action model: two score heads, frame weighting, and the
//! losses used to train and probe them.

pub mod config;
pub mod forward;
pub mod normalize;
pub mod params;

pub use config::{Mode, ModelConfig, Normalization, NormalizationSet, Phase};
pub use forward::{
    class_probs, frame_scores, inference_trace, naive_forward_backward, naive_predict,
    select_scores, supervised_forward_backward, video_predict, weak_forward_backward, ForwardTrace,
};
pub use normalize::{
    fuse_weights, gloc, gloc_backward, sloc, sloc_backward, zloc, zloc_backward,
};
pub use params::{ModelParams, BLOCK_NAMES};
