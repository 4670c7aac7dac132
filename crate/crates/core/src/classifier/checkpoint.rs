use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::Frame;
use crate::{Error, Result};

use super::{Classifier, DenseLayer, DsLayer, FeatureExtractor, Head, Prototype, SoftmaxHead};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized classifier. All matrices are flat and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub frame_id: String,
    pub classes: Vec<String>,
    pub anything_else: Option<String>,
    pub extractor: Vec<DenseLayer>,
    pub head: HeadCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HeadCheckpoint {
    Evidential {
        prototypes: usize,
        dim: usize,
        centers: Vec<f64>,
        eta: Vec<f64>,
        xi: Vec<f64>,
        u_raw: Vec<f64>,
    },
    Probabilistic {
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

impl Checkpoint {
    pub fn from_classifier(c: &Classifier) -> Self {
        let frame = c.frame();
        let (head, anything_else) = match &c.head {
            Head::Evidential(l) => (
                HeadCheckpoint::Evidential {
                    prototypes: l.n_prototypes(),
                    dim: l.dim(),
                    centers: l.centers.clone(),
                    eta: l.eta.clone(),
                    xi: l.xi.clone(),
                    u_raw: l.u_raw.clone(),
                },
                l.anything_else().map(|i| frame.class_name(i).to_string()),
            ),
            Head::Probabilistic(h) => (
                HeadCheckpoint::Probabilistic {
                    dim: h.dim(),
                    weights: h.weights.clone(),
                    bias: h.bias.clone(),
                },
                None,
            ),
        };
        Self {
            version: CHECKPOINT_VERSION,
            frame_id: frame.id().to_string(),
            classes: frame.classes().to_vec(),
            anything_else,
            extractor: c.extractor.layers().to_vec(),
            head,
        }
    }

    /// Rebuilds the classifier on `frame`, which must be the frame it was saved for.
    pub fn into_classifier(self, frame: &Arc<Frame>) -> Result<Classifier> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(self.version));
        }
        if self.frame_id != frame.id() || self.classes != frame.classes() {
            return Err(Error::CheckpointFrame {
                expected: frame.id().to_string(),
                found: self.frame_id,
            });
        }
        let extractor = FeatureExtractor::new(self.extractor)?;
        let head = match self.head {
            HeadCheckpoint::Evidential {
                prototypes,
                dim,
                centers,
                eta,
                xi,
                u_raw,
            } => {
                let anything_else = self.anything_else.as_deref().map(|n| frame.require_index(n)).transpose()?;
                let m = frame.len() - usize::from(anything_else.is_some());
                if centers.len() != prototypes * dim
                    || eta.len() != prototypes
                    || xi.len() != prototypes
                    || u_raw.len() != prototypes * m
                {
                    return Err(Error::ShapeMismatch(
                        "evidential head arrays do not match declared shapes".into(),
                    ));
                }
                let protos: Vec<Prototype> = (0..prototypes)
                    .map(|i| Prototype {
                        center: centers[i * dim..(i + 1) * dim].to_vec(),
                        eta: eta[i],
                        xi: xi[i],
                        u_raw: u_raw[i * m..(i + 1) * m].to_vec(),
                    })
                    .collect();
                Head::Evidential(DsLayer::new(frame, anything_else, &protos)?)
            }
            HeadCheckpoint::Probabilistic { dim, weights, bias } => {
                Head::Probabilistic(SoftmaxHead::new(frame, dim, weights, bias)?)
            }
        };
        Classifier::new(extractor, head)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
