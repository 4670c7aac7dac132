use std::sync::Arc;

use crate::autodiff::{ParamValue, Tape, Var};
use crate::belief::{Frame, MassFunction};
use crate::{Error, Result};

use super::{lookup, softmax};

/// Linear layer followed by softmax, read as a Bayesian mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    frame: Arc<Frame>,
    dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl SoftmaxHead {
    pub fn new(frame: &Arc<Frame>, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != frame.len() * dim || bias.len() != frame.len() {
            return Err(Error::ShapeMismatch(format!(
                "softmax head for {} classes and {dim} features got {} weights, {} biases",
                frame.len(),
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            frame: frame.clone(),
            dim,
            weights,
            bias,
        })
    }

    pub fn zeros(frame: &Arc<Frame>, dim: usize) -> Self {
        Self::new(frame, dim, vec![0.0; frame.len() * dim], vec![0.0; frame.len()]).expect("consistent shapes")
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn probabilities(&self, feat: &[f64]) -> Result<Vec<f64>> {
        if feat.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "feature has {} values, head expects {}",
                feat.len(),
                self.dim
            )));
        }
        let logits: Vec<f64> = (0..self.frame.len())
            .map(|k| {
                let row = &self.weights[k * self.dim..(k + 1) * self.dim];
                row.iter().zip(feat).map(|(w, x)| w * x).sum::<f64>() + self.bias[k]
            })
            .collect();
        Ok(softmax(&logits))
    }

    pub fn forward(&self, feat: &[f64]) -> Result<MassFunction> {
        let probs = self.probabilities(feat)?;
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.into_iter().map(|p| p / total).collect();
        Ok(MassFunction::bayesian(&self.frame, &probs)?)
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamValue> {
        vec![
            ParamValue::matrix(format!("{prefix}w"), self.frame.len(), self.dim, self.weights.clone()),
            ParamValue::vector(format!("{prefix}b"), self.bias.clone()),
        ]
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Vec<f64>)> {
        vec![
            (format!("{prefix}w"), &mut self.weights),
            (format!("{prefix}b"), &mut self.bias),
        ]
    }

    /// Records the head; the output is the probability vector in frame order.
    pub fn record(&self, tape: &mut Tape, prefix: &str, feat: Var) -> Result<Var> {
        let w = lookup(tape, &format!("{prefix}w"))?;
        let b = lookup(tape, &format!("{prefix}b"))?;
        let logits = tape.affine(w, b, feat)?;
        Ok(tape.softmax(logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Arc<Frame> {
        Arc::new(Frame::new("h", ["a", "b", "c"]).unwrap())
    }

    #[test]
    fn zero_weights_are_uniform() {
        let h = SoftmaxHead::zeros(&frame(), 4);
        let m = h.forward(&[1.0, -3.0, 2.0, 0.5]).unwrap();
        assert!(m.is_bayesian());
        for k in 0..3 {
            assert!((m.mass_of(&m.frame().singleton(k)) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_logit_takes_all_mass() {
        let f = frame();
        let h = SoftmaxHead::new(&f, 1, vec![0.0, 0.0, 0.0], vec![0.0, 60.0, 0.0]).unwrap();
        let m = h.forward(&[1.0]).unwrap();
        assert!(m.mass_of(&f.singleton(1)) > 1.0 - 1e-12);
    }

    #[test]
    fn shape_checks() {
        let f = frame();
        assert!(SoftmaxHead::new(&f, 2, vec![0.0; 5], vec![0.0; 3]).is_err());
        assert!(SoftmaxHead::zeros(&f, 2).forward(&[1.0]).is_err());
    }
}
