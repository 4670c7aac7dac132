use serde::{Deserialize, Serialize};

use crate::belief::{decide, pignistic, BeliefError, Frame, MassFunction};
use crate::classifier::Classifier;
use crate::data::{nearest_mean, MergedDataset, SourceDataset, SynthSpec};
use crate::fusion::{FusionPipeline, SoftLabel};
use crate::{Error, Result};

/// Focal sets kept per mass function in dumps.
pub const DUMP_FOCAL_SETS: usize = 4;

/// Outcome of one test record under one strategy. Masses are preformatted so
/// that the dump alone is enough to recompute every reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub dataset: String,
    /// Class on the record's source frame.
    pub label: String,
    pub soft_label: String,
    /// `None` when fusion hit total conflict.
    pub decision: Option<String>,
    pub correct: bool,
    pub conflict: bool,
    pub members: Vec<String>,
    pub fused: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub name: String,
    pub samples: Vec<SampleOutcome>,
}

impl StrategyOutcome {
    pub fn error_rate(&self) -> Result<f64> {
        let correct: Vec<bool> = self.samples.iter().map(|s| s.correct).collect();
        error_rate(&correct)
    }

    /// Error rate over the records of one dataset.
    pub fn dataset_error_rate(&self, dataset: &str) -> Result<f64> {
        let correct: Vec<bool> = self
            .samples
            .iter()
            .filter(|s| s.dataset == dataset)
            .map(|s| s.correct)
            .collect();
        error_rate(&correct)
    }
}

/// `1 − (1/|T|) Σ 1[decision ∈ label]`. A missing decision counts as wrong.
pub fn average_error(decisions: &[Option<usize>], labels: &[SoftLabel]) -> Result<f64> {
    if decisions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} decisions for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    let correct: Vec<bool> = decisions
        .iter()
        .zip(labels)
        .map(|(d, l)| d.is_some_and(|d| l.contains(d)))
        .collect();
    error_rate(&correct)
}

fn error_rate(correct: &[bool]) -> Result<f64> {
    if correct.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let hits = correct.iter().filter(|&&c| c).count();
    Ok(1.0 - hits as f64 / correct.len() as f64)
}

/// `{a}=0.500000; Θ=0.500000`, largest masses first.
pub fn format_mass(m: &MassFunction) -> String {
    let frame = m.frame();
    m.top_focal(DUMP_FOCAL_SETS)
        .iter()
        .map(|(s, v)| format!("{}={v:.6}", frame.format_subset(s)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn is_total_conflict(e: &Error) -> bool {
    matches!(e, Error::Belief(BeliefError::TotalConflict { .. }))
}

pub fn evaluate_pipeline(name: &str, pipeline: &FusionPipeline, test: &MergedDataset) -> Result<StrategyOutcome> {
    let common = test.common_frame();
    let mut samples = Vec::with_capacity(test.len());
    for (i, r) in test.records.iter().enumerate() {
        let label = test.soft_label(i);
        let base = SampleOutcome {
            id: r.id.clone(),
            dataset: test.source_ids()[r.source].clone(),
            label: test.source_class_name(i).to_string(),
            soft_label: common.format_subset(label.subset()),
            decision: None,
            correct: false,
            conflict: false,
            members: Vec::new(),
            fused: String::new(),
        };
        match pipeline.predict(&r.features) {
            Ok(p) => samples.push(SampleOutcome {
                decision: Some(common.class_name(p.decision).to_string()),
                correct: label.contains(p.decision),
                members: p.sources.iter().map(format_mass).collect(),
                fused: format_mass(&p.fused),
                ..base
            }),
            Err(e) if is_total_conflict(&e) => {
                log::warn!("{name}: total conflict on `{}`", r.id);
                let members = pipeline
                    .members()
                    .iter()
                    .map(|m| m.classifier.mass(&r.features).map(|m| format_mass(&m)))
                    .collect::<Result<Vec<_>>>()
                    .unwrap_or_default();
                samples.push(SampleOutcome {
                    conflict: true,
                    members,
                    ..base
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(StrategyOutcome {
        name: name.to_string(),
        samples,
    })
}

/// A source classifier alone, decided and scored on its own frame.
pub fn evaluate_standalone(name: &str, classifier: &Classifier, test: &SourceDataset) -> Result<StrategyOutcome> {
    let frame = classifier.frame();
    let mut samples = Vec::with_capacity(test.len());
    for r in &test.records {
        let m = classifier.mass(&r.features)?;
        let decision = decide(&pignistic(&m));
        let label = frame.class_name(r.label).to_string();
        samples.push(SampleOutcome {
            id: r.id.clone(),
            dataset: test.id.clone(),
            soft_label: frame.format_subset(&frame.singleton(r.label)),
            label,
            decision: Some(frame.class_name(decision).to_string()),
            correct: decision == r.label,
            conflict: false,
            members: vec![format_mass(&m)],
            fused: format_mass(&m),
        });
    }
    Ok(StrategyOutcome {
        name: name.to_string(),
        samples,
    })
}

/// Nearest component mean, scored against soft labels on the common frame.
pub fn evaluate_oracle(name: &str, spec: &SynthSpec, test: &MergedDataset) -> Result<StrategyOutcome> {
    let common: &Frame = test.common_frame();
    let mut samples = Vec::with_capacity(test.len());
    for (i, r) in test.records.iter().enumerate() {
        let label = test.soft_label(i);
        let comp = &spec.classes[nearest_mean(spec, &r.features)].name;
        let decision = common
            .index_of(comp)
            .ok_or_else(|| Error::InvalidSpec(format!("component `{comp}` is not a common-frame class")))?;
        samples.push(SampleOutcome {
            id: r.id.clone(),
            dataset: test.source_ids()[r.source].clone(),
            label: test.source_class_name(i).to_string(),
            soft_label: common.format_subset(label.subset()),
            decision: Some(comp.clone()),
            correct: label.contains(decision),
            conflict: false,
            members: Vec::new(),
            fused: String::new(),
        });
    }
    Ok(StrategyOutcome {
        name: name.to_string(),
        samples,
    })
}
