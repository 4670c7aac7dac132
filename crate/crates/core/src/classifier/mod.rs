//! Classifiers that map an input record to a mass function on their own
//! frame: a dense feature extractor followed by either a prototype-based DS
//! layer or a softmax head.

mod checkpoint;
mod ds_layer;
mod extractor;
mod softmax_head;

use std::sync::Arc;

use crate::autodiff::{ParamValue, Tape, Var};
use crate::belief::{ClassSubset, Frame, MassFunction};
use crate::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use ds_layer::{init_ds_layer, prototype_mass, DsLayer, Prototype};
pub use extractor::{Activation, DenseLayer, FeatureExtractor};
pub use softmax_head::SoftmaxHead;

/// Default feature dimension.
pub const DEFAULT_FEATURE_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Evidential(DsLayer),
    Probabilistic(SoftmaxHead),
}

impl Head {
    pub fn frame(&self) -> &Arc<Frame> {
        match self {
            Head::Evidential(l) => l.frame(),
            Head::Probabilistic(h) => h.frame(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Head::Evidential(l) => l.dim(),
            Head::Probabilistic(h) => h.dim(),
        }
    }

    pub fn forward(&self, feat: &[f64]) -> Result<MassFunction> {
        match self {
            Head::Evidential(l) => l.forward(feat),
            Head::Probabilistic(h) => h.forward(feat),
        }
    }

    /// Focal sets matching the vector returned by [`record`](Self::record).
    pub fn focal_sets(&self) -> Vec<ClassSubset> {
        match self {
            Head::Evidential(l) => l.focal_sets(),
            Head::Probabilistic(h) => (0..h.frame().len()).map(|k| h.frame().singleton(k)).collect(),
        }
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamValue> {
        match self {
            Head::Evidential(l) => l.params(prefix),
            Head::Probabilistic(h) => h.params(prefix),
        }
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Vec<f64>)> {
        match self {
            Head::Evidential(l) => l.params_mut(prefix),
            Head::Probabilistic(h) => h.params_mut(prefix),
        }
    }

    pub fn record(&self, tape: &mut Tape, prefix: &str, feat: Var) -> Result<Var> {
        match self {
            Head::Evidential(l) => l.record(tape, prefix, feat),
            Head::Probabilistic(h) => h.record(tape, prefix, feat),
        }
    }
}

/// Feature extractor plus head, producing a mass function on the head's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub extractor: FeatureExtractor,
    pub head: Head,
}

impl Classifier {
    pub fn new(extractor: FeatureExtractor, head: Head) -> Result<Self> {
        if extractor.output_dim() != head.dim() {
            return Err(Error::ShapeMismatch(format!(
                "extractor gives {} features, head expects {}",
                extractor.output_dim(),
                head.dim()
            )));
        }
        Ok(Self { extractor, head })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        self.head.frame()
    }

    pub fn is_evidential(&self) -> bool {
        matches!(self.head, Head::Evidential(_))
    }

    pub fn mass(&self, x: &[f64]) -> Result<MassFunction> {
        let feat = self.extractor.extract(x)?;
        self.head.forward(&feat)
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamValue> {
        let mut v = self.extractor.params(&format!("{prefix}fx."));
        v.extend(self.head.params(&format!("{prefix}head.")));
        v
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Vec<f64>)> {
        let mut v = self.extractor.params_mut(&format!("{prefix}fx."));
        v.extend(self.head.params_mut(&format!("{prefix}head.")));
        v
    }

    pub fn record_features(&self, tape: &mut Tape, prefix: &str, x: Var) -> Result<Var> {
        self.extractor.record(tape, &format!("{prefix}fx."), x)
    }

    /// Records the whole classifier; the output is a mass vector over
    /// [`Head::focal_sets`].
    pub fn record_mass(&self, tape: &mut Tape, prefix: &str, x: Var) -> Result<Var> {
        let feat = self.record_features(tape, prefix, x)?;
        self.head.record(tape, &format!("{prefix}head."), feat)
    }
}

pub(crate) fn lookup(tape: &Tape, name: &str) -> Result<Var> {
    tape.param_var(name).ok_or_else(|| Error::UnknownParameter(name.to_string()))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
