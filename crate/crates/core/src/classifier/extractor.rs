use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamValue, Tape, Var};
use crate::{Error, Result};

use super::lookup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// A fully connected layer, `act(W x + b)` with `W` stored `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Small dense network mapping an input record to a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    layers: Vec<DenseLayer>,
}

impl FeatureExtractor {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("extractor needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: parameters do not match {}x{}",
                    l.outputs, l.inputs
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("layer {i}: non-finite parameter")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.inputs,
                    layers[i - 1].outputs
                )));
            }
        }
        Ok(Self { layers })
    }

    /// He-initialized network with the given layer widths. Every layer uses
    /// ReLU except the last, which uses `output_activation`.
    pub fn random<R: Rng>(dims: &[usize], output_activation: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::ShapeMismatch("need input and output widths".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let (inputs, outputs) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
            let weights = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
            let activation = if i + 2 == dims.len() {
                output_activation
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer {
                inputs,
                outputs,
                activation,
                weights,
                bias: vec![0.0; outputs],
            });
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn extract(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, extractor expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        let mut h = x.to_vec();
        for l in &self.layers {
            h = (0..l.outputs)
                .map(|o| {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    let z = row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + l.bias[o];
                    match l.activation {
                        Activation::Relu => z.max(0.0),
                        Activation::Identity => z,
                    }
                })
                .collect();
        }
        Ok(h)
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamValue> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    ParamValue::matrix(format!("{prefix}l{i}.w"), l.outputs, l.inputs, l.weights.clone()),
                    ParamValue::vector(format!("{prefix}l{i}.b"), l.bias.clone()),
                ]
            })
            .collect()
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Vec<f64>)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("{prefix}l{i}.w"), &mut l.weights),
                    (format!("{prefix}l{i}.b"), &mut l.bias),
                ]
            })
            .collect()
    }

    /// Records the forward pass; parameters are looked up on the tape by name.
    pub fn record(&self, tape: &mut Tape, prefix: &str, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            let w = lookup(tape, &format!("{prefix}l{i}.w"))?;
            let b = lookup(tape, &format!("{prefix}l{i}.b"))?;
            h = tape.affine(w, b, h)?;
            if l.activation == Activation::Relu {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn layer(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> DenseLayer {
        DenseLayer {
            inputs,
            outputs,
            activation: Activation::Relu,
            weights,
            bias,
        }
    }

    #[test]
    fn zero_network_gives_zero_features() {
        let e = FeatureExtractor::new(vec![layer(3, 4, vec![0.0; 12], vec![0.0; 4])]).unwrap();
        assert_eq!(e.extract(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_relu_layer() {
        let e = FeatureExtractor::new(vec![layer(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2])]).unwrap();
        assert_eq!(e.extract(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        assert!(FeatureExtractor::new(vec![
            layer(2, 2, vec![0.0; 4], vec![0.0; 2]),
            layer(3, 1, vec![0.0; 3], vec![0.0])
        ])
        .is_err());
        let e = FeatureExtractor::new(vec![layer(2, 1, vec![1.0, 1.0], vec![0.0])]).unwrap();
        assert!(matches!(e.extract(&[1.0]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(e.extract(&[1.0, f64::NAN]), Err(Error::NonFiniteInput(1))));
    }

    #[test]
    fn seeded_forward_is_locked() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = FeatureExtractor::random(&[2, 4, 3], Activation::Identity, &mut rng).unwrap();
        let f = e.extract(&[0.5, -1.25]).unwrap();
        let golden = [-0.950629625385538, 0.009505187507585777, -1.0589124006080481];
        for (a, b) in f.iter().zip(golden) {
            assert!((a - b).abs() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn tape_matches_direct_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = FeatureExtractor::random(&[3, 5, 4], Activation::Identity, &mut rng).unwrap();
        let x = [0.3, -0.7, 1.1];
        let mut t = Tape::new();
        for p in e.params("f.") {
            t.param(&p).unwrap();
        }
        let xv = t.constant(x.to_vec());
        let out = e.record(&mut t, "f.", xv).unwrap();
        let direct = e.extract(&x).unwrap();
        for (a, b) in t.value(out).iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
