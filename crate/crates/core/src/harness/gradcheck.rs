use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{grad_check, AdError, GradCheck};
use crate::belief::Frame;
use crate::classifier::{Activation, Classifier, DsLayer, FeatureExtractor, Head, Prototype};
use crate::data::desk_bench;
use crate::fusion::{
    record_pignistic, record_soft_label_loss, FusionPipeline, Member, SoftLabel, Strategy, TapeMass, LOSS_CLAMP,
};
use crate::{Error, Result};

fn to_ad(e: Error) -> AdError {
    match e {
        Error::Autodiff(e) => e,
        other => AdError::DomainError {
            op: "record",
            detail: other.to_string(),
        },
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_layer(rng: &mut ChaCha8Rng, frame: &Arc<Frame>, anything_else: Option<usize>, dim: usize, n: usize) -> Result<DsLayer> {
    let m = frame.len() - usize::from(anything_else.is_some());
    let protos: Vec<Prototype> = (0..n)
        .map(|_| Prototype {
            center: (0..dim).map(|_| normal(rng)).collect(),
            eta: rng.random_range(0.3..1.5),
            xi: normal(rng),
            u_raw: (0..m).map(|_| normal(rng)).collect(),
        })
        .collect();
    DsLayer::new(frame, anything_else, &protos)
}

fn random_label(rng: &mut ChaCha8Rng, frame: &Frame) -> Result<SoftLabel> {
    loop {
        let s = frame.subset((0..frame.len()).filter(|_| rng.random_bool(0.4)))?;
        if !s.is_empty() {
            return SoftLabel::new(frame, s);
        }
    }
}

/// DS layer, pignistic transform and soft-label loss on a random frame.
pub fn ds_loss_check(seed: u64, h: f64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.random_range(2..=5);
    let frame = Arc::new(Frame::new("f", (0..size).map(|i| format!("k{i}")))?);
    let anything_else = rng.random_bool(0.5).then_some(size - 1).filter(|_| size > 2);
    let dim = rng.random_range(1..=4);
    let n = rng.random_range(1..=4);
    let layer = random_layer(&mut rng, &frame, anything_else, dim, n)?;
    let feat: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let label = random_label(&mut rng, &frame)?;
    let focal = layer.focal_sets();
    let params = layer.params("");
    Ok(grad_check(
        |t, _| {
            let x = t.constant(feat.clone());
            let mass = layer.record(t, "", x).map_err(to_ad)?;
            let betp = record_pignistic(
                t,
                &TapeMass {
                    focal: focal.clone(),
                    mass,
                },
                frame.len(),
            )
            .map_err(to_ad)?;
            record_soft_label_loss(t, betp, &label, LOSS_CLAMP).map_err(to_ad)
        },
        &params,
        h,
    )?)
}

/// Full two-classifier MFE pipeline on the desk frames.
pub fn mfe_pipeline_check(seed: u64, h: f64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = desk_bench().frames.resolve()?;
    let mut members = Vec::new();
    for sf in &frames.sources {
        let extractor = FeatureExtractor::random(&[2, 4, 3], Activation::Identity, &mut rng)?;
        let layer = random_layer(&mut rng, &sf.frame, sf.anything_else, 3, 3)?;
        members.push(Member {
            classifier: Classifier::new(extractor, Head::Evidential(layer))?,
            refining: sf.refining.clone(),
        });
    }
    let pipeline = FusionPipeline::new(Strategy::Mfe, &frames.common, members, None)?;
    let x: Vec<f64> = (0..2).map(|_| normal(&mut rng)).collect();
    let label = random_label(&mut rng, &frames.common)?;
    let params = pipeline.params();
    Ok(grad_check(
        |t, _| pipeline.record_loss_registered(t, &x, &label, LOSS_CLAMP).map_err(to_ad),
        &params,
        h,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_checks_pass_on_a_few_seeds() {
        for seed in 0..3 {
            assert!(ds_loss_check(seed, 1e-5).unwrap().max_rel_error < 1e-4);
            assert!(mfe_pipeline_check(seed, 1e-5).unwrap().max_rel_error < 1e-4);
        }
    }
}
