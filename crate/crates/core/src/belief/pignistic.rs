use std::sync::Arc;

use super::{BeliefError, ClassSubset, Frame, MassFunction, NORMALIZATION_TOLERANCE};

/// Probability distribution over a frame obtained by splitting each focal
/// mass equally among its elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PignisticDistribution {
    frame: Arc<Frame>,
    probs: Vec<f64>,
}

impl PignisticDistribution {
    pub fn new(frame: &Arc<Frame>, probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.len() != frame.len() {
            return Err(BeliefError::InvalidDistribution {
                reason: format!("{} probabilities for {} classes", probs.len(), frame.len()),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(BeliefError::InvalidDistribution {
                reason: "negative or non-finite entry".into(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(BeliefError::InvalidDistribution {
                reason: format!("sums to {total}"),
            });
        }
        Ok(Self {
            frame: frame.clone(),
            probs,
        })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a subset, `Σ_{ω∈A} BetP(ω)`.
    pub fn prob_of(&self, subset: &ClassSubset) -> f64 {
        subset.iter().map(|i| self.probs[i]).sum()
    }
}

pub fn pignistic(m: &MassFunction) -> PignisticDistribution {
    let mut probs = vec![0.0; m.frame().len()];
    for (a, mass) in m.focal() {
        let share = mass / a.len() as f64;
        for w in a.iter() {
            probs[w] += share;
        }
    }
    PignisticDistribution {
        frame: m.frame().clone(),
        probs,
    }
}

/// Index of the most probable class; ties go to the lowest index.
pub fn decide(betp: &PignisticDistribution) -> usize {
    argmax(&betp.probs)
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in values.iter().enumerate().skip(1) {
        if p > values[best] {
            best = i;
        }
    }
    best
}
