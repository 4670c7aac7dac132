//! Fusion of several classifiers on a common frame.
//!
//! Five strategies are provided. MFE extends each DS-layer mass function to
//! the common frame and combines them with Dempster's rule; PMF does the same
//! with softmax outputs; BF flattens the extended masses to probabilities and
//! multiplies them; PFC and EFC concatenate features into a joint softmax or
//! DS layer. Every strategy also has a differentiable route on an
//! [`autodiff::Tape`](crate::autodiff::Tape) for end-to-end training.

mod loss;
mod pipeline;
mod strategy;

pub use loss::{record_soft_label_loss, soft_label_loss, SoftLabel, LOSS_CLAMP};
pub use pipeline::{record_combine, record_pignistic, FusionPipeline, Member, Prediction, TapeMass};
pub use strategy::Strategy;

use crate::Result;

/// Fused prediction of an MFE pipeline.
pub fn mfe_predict(pipeline: &FusionPipeline, x: &[f64]) -> Result<Prediction> {
    expect(pipeline, Strategy::Mfe)?;
    pipeline.predict(x)
}

pub fn pmf_predict(pipeline: &FusionPipeline, x: &[f64]) -> Result<Prediction> {
    expect(pipeline, Strategy::Pmf)?;
    pipeline.predict(x)
}

pub fn bf_predict(pipeline: &FusionPipeline, x: &[f64]) -> Result<Prediction> {
    expect(pipeline, Strategy::Bf)?;
    pipeline.predict(x)
}

pub fn pfc_predict(pipeline: &FusionPipeline, x: &[f64]) -> Result<Prediction> {
    expect(pipeline, Strategy::Pfc)?;
    pipeline.predict(x)
}

pub fn efc_predict(pipeline: &FusionPipeline, x: &[f64]) -> Result<Prediction> {
    expect(pipeline, Strategy::Efc)?;
    pipeline.predict(x)
}

fn expect(pipeline: &FusionPipeline, strategy: Strategy) -> Result<()> {
    if pipeline.strategy() == strategy {
        Ok(())
    } else {
        Err(crate::Error::InvalidConfig(format!(
            "pipeline uses {}, not {strategy}",
            pipeline.strategy()
        )))
    }
}
