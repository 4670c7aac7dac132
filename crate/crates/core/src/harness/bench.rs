use crate::classifier::Classifier;
use crate::data::{gen_synthetic, merge_datasets, BenchSpec, FrameSet, GeneratedSource, MergedDataset};
use crate::fusion::{FusionPipeline, Member, Strategy};
use crate::{Error, Result};

use super::eval::{evaluate_oracle, evaluate_pipeline, evaluate_standalone, StrategyOutcome};
use super::report::{build_report, EvalReport};
use super::train::{finetune, init_classifier, joint_pipeline, pretrain, HeadKind, LossCurve};
use super::{config_hash, TrainConfig};

/// Outcome name of the fine-tuned MFE pipeline.
pub const E2E_MFE: &str = "e2e-mfe";
pub const ORACLE: &str = "oracle";

pub fn standalone_name(kind: HeadKind, source: &str) -> String {
    match kind {
        HeadKind::Evidential => format!("ds-{source}"),
        HeadKind::Probabilistic => format!("softmax-{source}"),
    }
}

/// Initializes and pretrains one classifier per source.
pub fn pretrain_sources(
    frames: &FrameSet,
    data: &[GeneratedSource],
    cfg: &TrainConfig,
    kind: HeadKind,
) -> Result<(Vec<Classifier>, Vec<LossCurve>)> {
    let mut classifiers = Vec::with_capacity(data.len());
    let mut curves = Vec::with_capacity(data.len());
    for (i, d) in data.iter().enumerate() {
        let source = frames
            .source(&d.train.id)
            .ok_or_else(|| Error::MissingRefining(d.train.id.clone()))?;
        let mut c = init_classifier(source, &d.train, cfg, kind, i)?;
        log::info!("pretraining {}", standalone_name(kind, &d.train.id));
        curves.push(pretrain(&mut c, &d.train, cfg, i)?);
        classifiers.push(c);
    }
    Ok((classifiers, curves))
}

/// Pairs classifiers with the refinings of their frames.
pub fn members_for(frames: &FrameSet, classifiers: &[Classifier]) -> Result<Vec<Member>> {
    classifiers
        .iter()
        .map(|c| {
            let sf = frames
                .source(c.frame().id())
                .filter(|sf| sf.frame.as_ref() == c.frame().as_ref())
                .ok_or_else(|| Error::MissingRefining(c.frame().id().to_string()))?;
            Ok(Member {
                classifier: c.clone(),
                refining: sf.refining.clone(),
            })
        })
        .collect()
}

pub fn merge_split(frames: &FrameSet, data: &[GeneratedSource]) -> Result<(MergedDataset, MergedDataset)> {
    let train: Vec<_> = data.iter().map(|d| &d.train).collect();
    let test: Vec<_> = data.iter().map(|d| &d.test).collect();
    Ok((merge_datasets(&train, frames)?, merge_datasets(&test, frames)?))
}

/// Pretrained classifiers of both kinds; either may be absent.
#[derive(Debug, Clone, Default)]
pub struct Pretrained {
    pub evidential: Option<Vec<Classifier>>,
    pub probabilistic: Option<Vec<Classifier>>,
}

/// Evaluates the requested strategies. PFC and EFC first train their joint
/// head, together with the extractors, on the merged training set.
pub fn fuse_eval(
    frames: &FrameSet,
    pretrained: &Pretrained,
    train: &MergedDataset,
    test: &MergedDataset,
    cfg: &TrainConfig,
    strategies: &[Strategy],
) -> Result<Vec<StrategyOutcome>> {
    let mut out = Vec::new();
    for &s in strategies {
        let classifiers = if s.needs_evidential_members() || s == Strategy::Efc {
            pretrained.evidential.as_ref()
        } else {
            pretrained.probabilistic.as_ref()
        }
        .ok_or_else(|| Error::InvalidConfig(format!("{s} needs classifiers that were not pretrained")))?;
        let members = members_for(frames, classifiers)?;
        let pipeline = if s.has_joint_head() {
            let mut p = joint_pipeline(s, members, train, cfg)?;
            log::info!("training joint head for {s}");
            finetune(&mut p, train, cfg)?;
            p
        } else {
            FusionPipeline::new(s, &frames.common, members, None)?
        };
        out.push(evaluate_pipeline(s.as_str(), &pipeline, test)?);
    }
    Ok(out)
}

/// Fine-tunes an MFE pipeline built from the evidential classifiers.
pub fn finetune_mfe(
    frames: &FrameSet,
    classifiers: &[Classifier],
    train: &MergedDataset,
    cfg: &TrainConfig,
) -> Result<(FusionPipeline, LossCurve)> {
    let mut p = FusionPipeline::new(Strategy::Mfe, &frames.common, members_for(frames, classifiers)?, None)?;
    let curve = finetune(&mut p, train, cfg)?;
    Ok((p, curve))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub strategies: Vec<Strategy>,
    pub e2e: bool,
    pub standalone: bool,
    pub oracle: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            e2e: true,
            standalone: true,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub report: EvalReport,
    pub outcomes: Vec<StrategyOutcome>,
    pub pretrain_curves: Vec<(String, LossCurve)>,
    pub finetune_curve: Option<LossCurve>,
}

/// Generates data from `cfg.seed`, pretrains, fuses and scores in one go.
pub fn run_benchmark(bench: &BenchSpec, cfg: &TrainConfig, opts: &BenchOptions) -> Result<BenchRun> {
    cfg.validate()?;
    let frames = bench.frames.resolve()?;
    let data = gen_synthetic(cfg.seed, &bench.synth, &frames)?;
    let (train, test) = merge_split(&frames, &data)?;

    let needs_ds = opts.e2e
        || opts
            .strategies
            .iter()
            .any(|s| s.needs_evidential_members() || *s == Strategy::Efc);
    let needs_softmax = opts.strategies.iter().any(|s| matches!(s, Strategy::Pmf | Strategy::Pfc));
    let mut pretrained = Pretrained::default();
    let mut pretrain_curves = Vec::new();
    let mut outcomes = Vec::new();
    for (kind, wanted) in [(HeadKind::Evidential, needs_ds), (HeadKind::Probabilistic, needs_softmax)] {
        if !wanted {
            continue;
        }
        let (cs, curves) = pretrain_sources(&frames, &data, cfg, kind)?;
        for ((c, curve), d) in cs.iter().zip(curves).zip(&data) {
            let name = standalone_name(kind, &d.test.id);
            if opts.standalone {
                outcomes.push(evaluate_standalone(&name, c, &d.test)?);
            }
            pretrain_curves.push((name, curve));
        }
        match kind {
            HeadKind::Evidential => pretrained.evidential = Some(cs),
            HeadKind::Probabilistic => pretrained.probabilistic = Some(cs),
        }
    }
    outcomes.extend(fuse_eval(&frames, &pretrained, &train, &test, cfg, &opts.strategies)?);
    let mut finetune_curve = None;
    if opts.e2e {
        let cs = pretrained.evidential.as_ref().expect("pretrained above");
        let (p, curve) = finetune_mfe(&frames, cs, &train, cfg)?;
        outcomes.push(evaluate_pipeline(E2E_MFE, &p, &test)?);
        finetune_curve = Some(curve);
    }
    if opts.oracle {
        outcomes.push(evaluate_oracle(ORACLE, &bench.synth, &test)?);
    }
    let hash = config_hash(&[&serde_json::to_value(cfg)?, &serde_json::to_value(bench)?])?;
    let report = build_report(&outcomes, cfg.seed, &hash)?;
    Ok(BenchRun {
        report,
        outcomes,
        pretrain_curves,
        finetune_curve,
    })
}
