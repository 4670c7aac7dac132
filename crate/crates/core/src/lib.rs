//! Decision-level fusion of evidential classifiers trained on heterogeneous
//! frames of discernment.
//!
//! Each classifier maps an input to a mass function on its own frame. The
//! mass functions are carried to a common refinement by vacuous extension,
//! combined with Dempster's rule and turned into a decision through the
//! pignistic transform. The whole graph is differentiable, so the fused
//! system can be fine-tuned end to end with soft (set-valued) labels.

pub mod autodiff;
pub mod belief;
pub mod classifier;
pub mod data;
pub mod fusion;
pub mod harness;

mod error;

pub use error::{Error, Result};
