use crate::autodiff::{Tape, Var};
use crate::belief::{BeliefError, ClassSubset, Frame, PignisticDistribution};
use crate::Result;

/// Floor applied to `BetP(A)` before taking the logarithm.
pub const LOSS_CLAMP: f64 = 1e-300;

/// A set-valued label: the true class is known to lie in the subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SoftLabel(ClassSubset);

impl SoftLabel {
    pub fn new(frame: &Frame, subset: ClassSubset) -> Result<Self> {
        if subset.frame_size() != frame.len() {
            return Err(BeliefError::SubsetSize {
                expected: frame.len(),
                found: subset.frame_size(),
            }
            .into());
        }
        if subset.is_empty() {
            return Err(BeliefError::EmptyFocal { mass: 1.0 }.into());
        }
        Ok(Self(subset))
    }

    pub fn subset(&self) -> &ClassSubset {
        &self.0
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.contains(class)
    }

    pub fn is_precise(&self) -> bool {
        self.0.len() == 1
    }
}

/// `−log Σ_{ω∈A} BetP(ω)`. A zero probability is clamped and logged.
pub fn soft_label_loss(betp: &PignisticDistribution, label: &SoftLabel) -> Result<f64> {
    let frame = betp.frame();
    if label.subset().frame_size() != frame.len() {
        return Err(BeliefError::SubsetSize {
            expected: frame.len(),
            found: label.subset().frame_size(),
        }
        .into());
    }
    let p = betp.prob_of(label.subset());
    Ok(-clamp_probability(p, LOSS_CLAMP).ln())
}

fn clamp_probability(p: f64, floor: f64) -> f64 {
    if p < floor {
        log::warn!("BetP of soft label is {p:e}; clamping to {floor:e}");
        floor
    } else {
        p
    }
}

/// Records the soft-label loss on the tape from a BetP vector.
pub fn record_soft_label_loss(tape: &mut Tape, betp: Var, label: &SoftLabel, clamp: f64) -> Result<Var> {
    let indicator: Vec<f64> = (0..label.subset().frame_size())
        .map(|k| if label.contains(k) { 1.0 } else { 0.0 })
        .collect();
    let ind = tape.constant(indicator);
    let p = tape.dot(betp, ind)?;
    if tape.scalar(p) < clamp {
        log::warn!("BetP of soft label is {:e}; clamping to {clamp:e}", tape.scalar(p));
    }
    let clamped = tape.clamp_min(p, clamp);
    let log = tape.log(clamped)?;
    Ok(tape.neg(log))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::belief::{make_mass, pignistic};

    fn frame() -> Arc<Frame> {
        Arc::new(Frame::new("o", ["a", "b", "c", "d"]).unwrap())
    }

    #[test]
    fn zero_when_betp_inside_label() {
        let f = frame();
        let m = make_mass(&f, [(f.subset([0, 1]).unwrap(), 1.0)]).unwrap();
        let label = SoftLabel::new(&f, f.subset([0, 1, 2]).unwrap()).unwrap();
        assert_eq!(soft_label_loss(&pignistic(&m), &label).unwrap(), 0.0);
    }

    #[test]
    fn whole_frame_label_costs_nothing() {
        let f = frame();
        let betp = PignisticDistribution::new(&f, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let loss = soft_label_loss(&betp, &SoftLabel::new(&f, f.full()).unwrap()).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn uniform_precise_label_is_ln4() {
        let f = frame();
        let betp = PignisticDistribution::new(&f, vec![0.25; 4]).unwrap();
        let loss = soft_label_loss(&betp, &SoftLabel::new(&f, f.singleton(2)).unwrap()).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-15);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let f = frame();
        let betp = PignisticDistribution::new(&f, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let loss = soft_label_loss(&betp, &SoftLabel::new(&f, f.singleton(3)).unwrap()).unwrap();
        assert!((loss + LOSS_CLAMP.ln()).abs() < 1e-9);
    }

    #[test]
    fn empty_label_rejected() {
        let f = frame();
        assert!(SoftLabel::new(&f, f.empty_subset()).is_err());
    }

    #[test]
    fn monotone_in_label_probability() {
        let f = frame();
        let label = SoftLabel::new(&f, f.subset([0, 1]).unwrap()).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let p = k as f64 / 10.0;
            let betp = PignisticDistribution::new(&f, vec![p / 2.0, p / 2.0, (1.0 - p) / 2.0, (1.0 - p) / 2.0]).unwrap();
            let l = soft_label_loss(&betp, &label).unwrap();
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn tape_loss_matches_direct() {
        let f = frame();
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let label = SoftLabel::new(&f, f.subset([1, 3]).unwrap()).unwrap();
        let mut t = Tape::new();
        let b = t.constant(probs.clone());
        let l = record_soft_label_loss(&mut t, b, &label, LOSS_CLAMP).unwrap();
        let direct = soft_label_loss(&PignisticDistribution::new(&f, probs).unwrap(), &label).unwrap();
        assert!((t.scalar(l) - direct).abs() < 1e-15);
    }
}
