//! Acoustic morphological sensing for granular jamming grippers.
//!
//! The pipeline: a logarithmic sweep excites the gripper cavity, a synthetic
//! modal simulator stands in for the physical gripper and microphone, STFT
//! features summarize each recording, and small trainable models reconstruct
//! object properties (size, material, orientation, class) or learn
//! pose-invariant contrastive embeddings. An evaluation layer provides
//! pose-grouped cross-validation, sweeps, and the confidence-gated sorting
//! rule.

pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod signal;
pub mod sim;

pub use error::{Error, ErrorCategory, Result};
