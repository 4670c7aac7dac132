use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::belief::Refining;
use crate::classifier::{init_ds_layer, Classifier, FeatureExtractor, Head, SoftmaxHead};
use crate::data::{MergedDataset, SourceDataset, SourceFrame};
use crate::fusion::{FusionPipeline, Member, SoftLabel, Strategy};
use crate::{Error, Result};

use super::TrainConfig;

/// Optimizer settings for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSettings {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub clamp: f64,
    pub seed: u64,
}

/// Mean training loss of each epoch, measured while the epoch runs.
pub type LossCurve = Vec<f64>;

/// Mean loss over a labelled set at the current parameters.
pub fn mean_loss(pipeline: &FusionPipeline, xs: &[&[f64]], labels: &[SoftLabel], clamp: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(labels) {
        let mut tape = Tape::new();
        let loss = pipeline.record_loss(&mut tape, x, y, clamp)?;
        total += tape.scalar(loss);
    }
    Ok(total / xs.len() as f64)
}

/// Minibatch SGD on the mean soft-label loss. On a non-finite loss the
/// parameters are restored to the start of the failing epoch.
pub fn sgd(pipeline: &mut FusionPipeline, xs: &[&[f64]], labels: &[SoftLabel], s: &SgdSettings) -> Result<LossCurve> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if xs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            xs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut curve = Vec::with_capacity(s.epochs);
    for epoch in 0..s.epochs {
        let snapshot = pipeline.params();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(s.batch) {
            let mut grads: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for &i in batch {
                let mut tape = Tape::new();
                let loss = pipeline.record_loss(&mut tape, xs[i], &labels[i], s.clamp)?;
                let value = tape.scalar(loss);
                if !value.is_finite() {
                    restore(pipeline, &snapshot);
                    return Err(Error::Divergence { epoch, loss: value });
                }
                epoch_loss += value;
                for (name, g) in tape.backward(loss)?.iter() {
                    match grads.get_mut(name) {
                        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                        None => {
                            grads.insert(name.to_string(), g.to_vec());
                        }
                    }
                }
            }
            let step = s.lr / batch.len() as f64;
            for (name, values) in pipeline.params_mut() {
                if let Some(g) = grads.get(&name) {
                    values.iter_mut().zip(g).for_each(|(v, g)| *v -= step * g);
                }
            }
        }
        let mean = epoch_loss / xs.len() as f64;
        log::info!("epoch {}: loss {mean:.6}", epoch + 1);
        if !mean.is_finite() || pipeline.params().iter().any(|p| p.values.iter().any(|v| !v.is_finite())) {
            restore(pipeline, &snapshot);
            return Err(Error::Divergence { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok(curve)
}

fn restore(pipeline: &mut FusionPipeline, snapshot: &[crate::autodiff::ParamValue]) {
    let by_name: BTreeMap<&str, &Vec<f64>> = snapshot.iter().map(|p| (p.name.as_str(), &p.values)).collect();
    for (name, values) in pipeline.params_mut() {
        if let Some(v) = by_name.get(name.as_str()) {
            values.clone_from(v);
        }
    }
}

/// Which head a source classifier carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Evidential,
    Probabilistic,
}

/// Seed for a component, so that different sources and heads draw
/// independent streams from one run seed.
pub(crate) fn sub_seed(seed: u64, tag: &str, index: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes().chain((index as u64).to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    seed ^ h
}

/// Builds an untrained classifier for a source. DS layers are initialized
/// from the extractor's features of the training set.
pub fn init_classifier(
    source: &SourceFrame,
    train: &SourceDataset,
    cfg: &TrainConfig,
    kind: HeadKind,
    index: usize,
) -> Result<Classifier> {
    let input = train.dim().ok_or(Error::EmptyDataset)?;
    let mut dims = vec![input];
    dims.extend(&cfg.hidden);
    dims.push(cfg.feature_dim);
    let tag = match kind {
        HeadKind::Evidential => "ds",
        HeadKind::Probabilistic => "softmax",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, tag, index));
    let extractor = FeatureExtractor::random(&dims, cfg.output_activation, &mut rng)?;
    let head = match kind {
        HeadKind::Evidential => {
            let feats = train
                .records
                .iter()
                .map(|r| extractor.extract(&r.features))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<_> = train.records.iter().map(|r| source.frame.singleton(r.label)).collect();
            let classes = source.frame.len() - usize::from(source.anything_else.is_some());
            let n = cfg.prototypes_for(source.frame.id(), classes).min(feats.len());
            Head::Evidential(init_ds_layer(
                &feats,
                &labels,
                &source.frame,
                source.anything_else,
                n,
                sub_seed(cfg.seed, "proto", index),
            )?)
        }
        HeadKind::Probabilistic => Head::Probabilistic(SoftmaxHead::zeros(&source.frame, cfg.feature_dim)),
    };
    Classifier::new(extractor, head)
}

/// Trains a classifier on its own frame with singleton labels. On divergence
/// the classifier keeps the parameters of the last completed epoch.
pub fn pretrain(classifier: &mut Classifier, train: &SourceDataset, cfg: &TrainConfig, index: usize) -> Result<LossCurve> {
    if train.frame.as_ref() != classifier.frame().as_ref() {
        return Err(Error::ShapeMismatch(format!(
            "dataset on frame `{}`, classifier on `{}`",
            train.frame.id(),
            classifier.frame().id()
        )));
    }
    let frame: Arc<_> = classifier.frame().clone();
    let strategy = if classifier.is_evidential() {
        Strategy::Mfe
    } else {
        Strategy::Pmf
    };
    let member = Member {
        classifier: classifier.clone(),
        refining: Refining::identity(&frame),
    };
    let mut pipeline = FusionPipeline::new(strategy, &frame, vec![member], None)?;
    let xs: Vec<&[f64]> = train.records.iter().map(|r| r.features.as_slice()).collect();
    let labels = train
        .records
        .iter()
        .map(|r| SoftLabel::new(&frame, frame.singleton(r.label)))
        .collect::<Result<Vec<_>>>()?;
    let settings = SgdSettings {
        lr: cfg.pretrain_lr,
        epochs: cfg.pretrain_epochs,
        batch: cfg.batch,
        clamp: cfg.loss_clamp,
        seed: sub_seed(cfg.seed, "pretrain", index),
    };
    let result = sgd(&mut pipeline, &xs, &labels, &settings);
    let (mut members, _) = pipeline.into_parts();
    *classifier = members.remove(0).classifier;
    result
}

/// Fine-tunes every parameter of a pipeline on the merged soft-labelled set.
pub fn finetune(pipeline: &mut FusionPipeline, merged: &MergedDataset, cfg: &TrainConfig) -> Result<LossCurve> {
    if merged.common_frame().as_ref() != pipeline.common_frame().as_ref() {
        return Err(Error::InvalidConfig(
            "merged data and pipeline use different common frames".into(),
        ));
    }
    let xs: Vec<&[f64]> = merged.records.iter().map(|r| r.features.as_slice()).collect();
    let labels: Vec<SoftLabel> = (0..merged.len()).map(|i| merged.soft_label(i)).collect();
    let settings = SgdSettings {
        lr: cfg.finetune_lr,
        epochs: cfg.finetune_epochs,
        batch: cfg.batch,
        clamp: cfg.loss_clamp,
        seed: sub_seed(cfg.seed, pipeline.strategy().as_str(), 0),
    };
    sgd(pipeline, &xs, &labels, &settings)
}

/// Attaches a fresh joint head to the members' extractors for PFC or EFC.
pub fn joint_pipeline(
    strategy: Strategy,
    members: Vec<Member>,
    merged: &MergedDataset,
    cfg: &TrainConfig,
) -> Result<FusionPipeline> {
    let common = merged.common_frame().clone();
    let dim: usize = members.iter().map(|m| m.classifier.extractor.output_dim()).sum();
    let head = match strategy {
        Strategy::Pfc => Head::Probabilistic(SoftmaxHead::zeros(&common, dim)),
        Strategy::Efc => {
            let mut feats = Vec::with_capacity(merged.len());
            for r in &merged.records {
                let mut f = Vec::with_capacity(dim);
                for m in &members {
                    f.extend(m.classifier.extractor.extract(&r.features)?);
                }
                feats.push(f);
            }
            let labels: Vec<_> = (0..merged.len()).map(|i| merged.soft_label(i).subset().clone()).collect();
            let n = cfg.joint_prototypes_for(common.len()).min(feats.len());
            Head::Evidential(init_ds_layer(
                &feats,
                &labels,
                &common,
                None,
                n,
                sub_seed(cfg.seed, "joint", 0),
            )?)
        }
        other => return Err(Error::InvalidConfig(format!("{other} has no joint head"))),
    };
    FusionPipeline::new(strategy, &common, members, Some(head))
}
