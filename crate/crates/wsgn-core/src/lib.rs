//! Weakly supervised temporal action localization.
//!
//! The crate trains a small two-stream network from video-level class labels
//! alone, weights each frame's class evidence by learned selection scores, and
//! turns the weighted frame scores into timestamped detections. It ships its
//! own reverse-mode gradients, a synthetic video generator for controlled
//! benchmarks, a detection and localization evaluator, and binary formats for
//! features, checkpoints, and score dumps.

pub mod datagen;
pub mod detector;
pub mod diffcore;
pub mod evaluator;
pub mod error;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
