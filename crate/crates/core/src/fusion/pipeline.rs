use std::collections::BTreeMap;
use std::sync::Arc;

use crate::autodiff::{ParamValue, Tape, Var};
use crate::belief::{
    combine, pignistic, vacuous_extend, BeliefError, ClassSubset, Frame, MassFunction, PignisticDistribution, Refining,
};
use crate::classifier::{Classifier, Head};
use crate::{Error, Result};

use super::loss::{record_soft_label_loss, SoftLabel};
use super::Strategy;

/// A source classifier together with the refining of its frame into the
/// common frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub classifier: Classifier,
    pub refining: Refining,
}

/// Fused output for one input record.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Each member's mass function on its own frame (empty for feature-level strategies).
    pub sources: Vec<MassFunction>,
    /// Fused mass function on the common frame.
    pub fused: MassFunction,
    pub betp: PignisticDistribution,
    pub decision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionPipeline {
    strategy: Strategy,
    common: Arc<Frame>,
    members: Vec<Member>,
    joint: Option<Head>,
}

impl FusionPipeline {
    pub fn new(strategy: Strategy, common: &Arc<Frame>, members: Vec<Member>, joint: Option<Head>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("a pipeline needs at least one classifier".into()));
        }
        for (n, m) in members.iter().enumerate() {
            if m.refining.target().as_ref() != common.as_ref() {
                return Err(Error::InvalidConfig(format!(
                    "member {n}: refining does not target the common frame"
                )));
            }
            if m.refining.source().as_ref() != m.classifier.frame().as_ref() {
                return Err(Error::MissingRefining(m.classifier.frame().id().to_string()));
            }
            match (strategy, m.classifier.is_evidential()) {
                (Strategy::Mfe | Strategy::Bf, false) => {
                    return Err(Error::InvalidConfig(format!(
                        "{strategy} needs DS-layer classifiers (member {n})"
                    )))
                }
                (Strategy::Pmf, true) => return Err(Error::InvalidConfig(format!("pmf needs softmax classifiers (member {n})"))),
                _ => {}
            }
        }
        match (&joint, strategy) {
            (None, Strategy::Pfc | Strategy::Efc) => {
                return Err(Error::InvalidConfig(format!("{strategy} needs a joint head")));
            }
            (Some(_), Strategy::Mfe | Strategy::Pmf | Strategy::Bf) => {
                return Err(Error::InvalidConfig(format!("{strategy} takes no joint head")));
            }
            (Some(head), _) => {
                let concat: usize = members.iter().map(|m| m.classifier.extractor.output_dim()).sum();
                if head.dim() != concat {
                    return Err(Error::ShapeMismatch(format!(
                        "joint head expects {} features, members give {concat}",
                        head.dim()
                    )));
                }
                if head.frame().as_ref() != common.as_ref() {
                    return Err(Error::InvalidConfig("joint head must live on the common frame".into()));
                }
                let kind_ok = match head {
                    Head::Probabilistic(_) => strategy == Strategy::Pfc,
                    Head::Evidential(_) => strategy == Strategy::Efc,
                };
                if !kind_ok {
                    return Err(Error::InvalidConfig(format!("wrong joint head type for {strategy}")));
                }
            }
            (None, _) => {}
        }
        Ok(Self {
            strategy,
            common: common.clone(),
            members,
            joint,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn common_frame(&self) -> &Arc<Frame> {
        &self.common
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn joint(&self) -> Option<&Head> {
        self.joint.as_ref()
    }

    pub fn into_parts(self) -> (Vec<Member>, Option<Head>) {
        (self.members, self.joint)
    }

    /// Dispatches on the pipeline's strategy.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self.strategy {
            Strategy::Mfe | Strategy::Pmf => self.extended_fusion(x),
            Strategy::Bf => self.bayesian_fusion(x),
            Strategy::Pfc | Strategy::Efc => self.feature_fusion(x),
        }
    }

    fn member_masses(&self, x: &[f64]) -> Result<Vec<MassFunction>> {
        self.members.iter().map(|m| m.classifier.mass(x)).collect()
    }

    fn extended_masses(&self, sources: &[MassFunction]) -> Result<Vec<MassFunction>> {
        self.members
            .iter()
            .zip(sources)
            .map(|(m, s)| Ok(vacuous_extend(s, &m.refining)?))
            .collect()
    }

    fn extended_fusion(&self, x: &[f64]) -> Result<Prediction> {
        let sources = self.member_masses(x)?;
        let extended = self.extended_masses(&sources)?;
        let mut fused = extended[0].clone();
        for m in &extended[1..] {
            fused = combine(&fused, m)?;
        }
        Ok(finish(sources, fused))
    }

    fn bayesian_fusion(&self, x: &[f64]) -> Result<Prediction> {
        let sources = self.member_masses(x)?;
        let extended = self.extended_masses(&sources)?;
        let mut product = vec![1.0; self.common.len()];
        for m in &extended {
            for (p, q) in product.iter_mut().zip(pignistic(m).probs()) {
                *p *= q;
            }
        }
        let total: f64 = product.iter().sum();
        if total <= crate::belief::CONFLICT_THRESHOLD {
            return Err(BeliefError::TotalConflict { conflict: 1.0 - total }.into());
        }
        let probs: Vec<f64> = product.into_iter().map(|p| p / total).collect();
        let fused = MassFunction::bayesian(&self.common, &probs)?;
        Ok(finish(sources, fused))
    }

    fn concatenated_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut feat = Vec::new();
        for m in &self.members {
            feat.extend(m.classifier.extractor.extract(x)?);
        }
        Ok(feat)
    }

    fn feature_fusion(&self, x: &[f64]) -> Result<Prediction> {
        let feat = self.concatenated_features(x)?;
        let fused = self.joint.as_ref().expect("checked at construction").forward(&feat)?;
        Ok(finish(Vec::new(), fused))
    }

    /// All trainable parameters, prefixed `c{n}.` per member and `joint.` for
    /// the joint head.
    pub fn params(&self) -> Vec<ParamValue> {
        let mut v = Vec::new();
        for (n, m) in self.members.iter().enumerate() {
            let prefix = format!("c{n}.");
            if self.strategy.has_joint_head() {
                v.extend(m.classifier.extractor.params(&format!("{prefix}fx.")));
            } else {
                v.extend(m.classifier.params(&prefix));
            }
        }
        if let Some(j) = &self.joint {
            v.extend(j.params("joint."));
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let joint_strategy = self.strategy.has_joint_head();
        let mut v = Vec::new();
        for (n, m) in self.members.iter_mut().enumerate() {
            let prefix = format!("c{n}.");
            if joint_strategy {
                v.extend(m.classifier.extractor.params_mut(&format!("{prefix}fx.")));
            } else {
                v.extend(m.classifier.params_mut(&prefix));
            }
        }
        if let Some(j) = &mut self.joint {
            v.extend(j.params_mut("joint."));
        }
        v
    }

    /// Records the fused BetP vector on the common frame. Parameters must
    /// already be registered under the names from [`params`](Self::params).
    pub fn record_betp(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.strategy {
            Strategy::Mfe | Strategy::Pmf => {
                let mut fused: Option<TapeMass> = None;
                for (n, m) in self.members.iter().enumerate() {
                    let ext = self.record_extended(tape, n, m, x)?;
                    fused = Some(match fused {
                        None => ext,
                        Some(acc) => record_combine(tape, &acc, &ext)?,
                    });
                }
                let fused = fused.expect("non-empty members");
                record_pignistic(tape, &fused, self.common.len())
            }
            Strategy::Bf => {
                let mut product: Option<Var> = None;
                for (n, m) in self.members.iter().enumerate() {
                    let ext = self.record_extended(tape, n, m, x)?;
                    let flat = record_pignistic(tape, &ext, self.common.len())?;
                    product = Some(match product {
                        None => flat,
                        Some(p) => tape.mul(p, flat)?,
                    });
                }
                Ok(tape.normalize_by_sum(product.expect("non-empty members"))?)
            }
            Strategy::Pfc | Strategy::Efc => {
                let mut parts = Vec::with_capacity(self.members.len());
                for (n, m) in self.members.iter().enumerate() {
                    parts.push(m.classifier.record_features(tape, &format!("c{n}."), x)?);
                }
                let feat = tape.concat(&parts);
                let joint = self.joint.as_ref().expect("checked at construction");
                let out = joint.record(tape, "joint.", feat)?;
                match joint {
                    Head::Probabilistic(_) => Ok(out),
                    Head::Evidential(_) => {
                        let mass = TapeMass {
                            focal: joint.focal_sets(),
                            mass: out,
                        };
                        record_pignistic(tape, &mass, self.common.len())
                    }
                }
            }
        }
    }

    fn record_extended(&self, tape: &mut Tape, n: usize, m: &Member, x: Var) -> Result<TapeMass> {
        let mass = m.classifier.record_mass(tape, &format!("c{n}."), x)?;
        let focal = m.classifier.head.focal_sets().iter().map(|a| m.refining.apply(a)).collect();
        Ok(TapeMass { focal, mass })
    }

    /// Builds a tape with all parameters registered and records the loss for
    /// one labelled record.
    pub fn record_loss(&self, tape: &mut Tape, x: &[f64], label: &SoftLabel, clamp: f64) -> Result<Var> {
        for p in self.params() {
            tape.param(&p)?;
        }
        self.record_loss_registered(tape, x, label, clamp)
    }

    /// As [`record_loss`](Self::record_loss) but with parameters already on the tape.
    pub fn record_loss_registered(&self, tape: &mut Tape, x: &[f64], label: &SoftLabel, clamp: f64) -> Result<Var> {
        let xv = tape.constant(x.to_vec());
        let betp = self.record_betp(tape, xv)?;
        record_soft_label_loss(tape, betp, label, clamp)
    }
}

fn finish(sources: Vec<MassFunction>, fused: MassFunction) -> Prediction {
    let betp = pignistic(&fused);
    let decision = crate::belief::decide(&betp);
    Prediction {
        sources,
        fused,
        betp,
        decision,
    }
}

/// A mass vector on the tape over a fixed list of focal sets.
#[derive(Debug, Clone)]
pub struct TapeMass {
    pub focal: Vec<ClassSubset>,
    pub mass: Var,
}

/// Dempster's rule by composition: outer product, grouping by intersection,
/// then renormalization.
pub fn record_combine(tape: &mut Tape, a: &TapeMass, b: &TapeMass) -> Result<TapeMass> {
    let nb = b.focal.len();
    let mut groups: BTreeMap<ClassSubset, Vec<usize>> = BTreeMap::new();
    for (i, fa) in a.focal.iter().enumerate() {
        for (j, fb) in b.focal.iter().enumerate() {
            let inter = fa.intersection(fb);
            if !inter.is_empty() {
                groups.entry(inter).or_default().push(i * nb + j);
            }
        }
    }
    if groups.is_empty() {
        return Err(BeliefError::TotalConflict { conflict: 1.0 }.into());
    }
    let mut entries = Vec::new();
    let mut focal = Vec::with_capacity(groups.len());
    for (o, (subset, pairs)) in groups.into_iter().enumerate() {
        entries.extend(pairs.into_iter().map(|p| (o, p, 1.0)));
        focal.push(subset);
    }
    let products = tape.outer(a.mass, b.mass);
    let grouped = tape.sparse_linear(products, entries.into(), focal.len())?;
    let mass = tape.normalize_by_sum(grouped)?;
    Ok(TapeMass { focal, mass })
}

/// BetP as a fixed linear map of the focal masses.
pub fn record_pignistic(tape: &mut Tape, m: &TapeMass, frame_len: usize) -> Result<Var> {
    let entries: Vec<(usize, usize, f64)> = m
        .focal
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            let share = 1.0 / a.len() as f64;
            a.iter().map(move |w| (w, i, share))
        })
        .collect();
    Ok(tape.sparse_linear(m.mass, entries.into(), frame_len)?)
}
