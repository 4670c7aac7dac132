use std::collections::BTreeMap;
use std::sync::Arc;

use super::{BeliefError, ClassSubset, Frame};

/// Tolerance on `|Σ m(A) − 1|` accepted by [`make_mass`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Dempster denominators at or below this value are reported as total conflict.
pub const CONFLICT_THRESHOLD: f64 = 1e-12;

/// A normalized mass function on a finite frame.
///
/// Focal sets are kept in a sorted map without zero entries, so iteration
/// order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    frame: Arc<Frame>,
    focal: BTreeMap<ClassSubset, f64>,
}

/// Builds a mass function, merging duplicate subsets by summation.
///
/// Input that does not sum to one is rejected rather than rescaled.
pub fn make_mass<I>(frame: &Arc<Frame>, assignments: I) -> Result<MassFunction, BeliefError>
where
    I: IntoIterator<Item = (ClassSubset, f64)>,
{
    let mut focal: BTreeMap<ClassSubset, f64> = BTreeMap::new();
    for (subset, mass) in assignments {
        frame.check_subset(&subset)?;
        if !mass.is_finite() || mass < 0.0 {
            return Err(BeliefError::NegativeMass { mass });
        }
        if subset.is_empty() {
            if mass > 0.0 {
                return Err(BeliefError::EmptyFocal { mass });
            }
            continue;
        }
        *focal.entry(subset).or_insert(0.0) += mass;
    }
    focal.retain(|_, m| *m > 0.0);
    let total: f64 = focal.values().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(BeliefError::NotNormalized { total });
    }
    Ok(MassFunction {
        frame: frame.clone(),
        focal,
    })
}

pub(crate) fn same_frame(a: &Arc<Frame>, b: &Arc<Frame>) -> Result<(), BeliefError> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(BeliefError::FrameMismatch {
            expected: a.id().to_string(),
            found: b.id().to_string(),
        })
    }
}

impl MassFunction {
    /// Total ignorance: all mass on the whole frame.
    pub fn vacuous(frame: &Arc<Frame>) -> Self {
        let mut focal = BTreeMap::new();
        focal.insert(frame.full(), 1.0);
        Self {
            frame: frame.clone(),
            focal,
        }
    }

    /// A Bayesian mass function from a probability vector indexed by class.
    pub fn bayesian(frame: &Arc<Frame>, probs: &[f64]) -> Result<Self, BeliefError> {
        if probs.len() != frame.len() {
            return Err(BeliefError::SubsetSize {
                expected: frame.len(),
                found: probs.len(),
            });
        }
        make_mass(frame, probs.iter().enumerate().map(|(i, &p)| (frame.singleton(i), p)))
    }

    /// Wraps masses that are normalized by construction, dropping zeros.
    pub(crate) fn from_normalized(frame: Arc<Frame>, mut focal: BTreeMap<ClassSubset, f64>) -> Self {
        focal.retain(|s, m| *m > 0.0 && !s.is_empty());
        debug_assert!((focal.values().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
        Self { frame, focal }
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    /// Focal sets and their masses in subset order.
    pub fn focal(&self) -> impl Iterator<Item = (&ClassSubset, f64)> {
        self.focal.iter().map(|(s, &m)| (s, m))
    }

    pub fn focal_count(&self) -> usize {
        self.focal.len()
    }

    pub fn mass_of(&self, subset: &ClassSubset) -> f64 {
        self.focal.get(subset).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.focal.values().sum()
    }

    pub fn is_bayesian(&self) -> bool {
        self.focal.keys().all(|s| s.len() == 1)
    }

    pub fn is_vacuous(&self) -> bool {
        self.focal.len() == 1 && self.focal.keys().all(ClassSubset::is_full)
    }

    /// Focal sets sorted by decreasing mass, ties by subset order.
    pub fn top_focal(&self, k: usize) -> Vec<(ClassSubset, f64)> {
        let mut v: Vec<(ClassSubset, f64)> = self.focal.iter().map(|(s, &m)| (s.clone(), m)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

/// Unnormalized conjunctive products over non-empty intersections, plus the
/// mass that fell on the empty set. Contributions to each intersection are
/// summed in sorted order so that swapping the operands gives bit-identical
/// results.
pub(crate) fn conjunctive_products(m1: &MassFunction, m2: &MassFunction) -> (BTreeMap<ClassSubset, f64>, f64) {
    let mut terms: BTreeMap<ClassSubset, Vec<f64>> = BTreeMap::new();
    let mut conflict = Vec::new();
    for (b, mb) in &m1.focal {
        for (c, mc) in &m2.focal {
            let a = b.intersection(c);
            let p = mb * mc;
            if a.is_empty() {
                conflict.push(p);
            } else {
                terms.entry(a).or_default().push(p);
            }
        }
    }
    let out = terms.into_iter().map(|(a, v)| (a, ordered_sum(v))).collect();
    (out, ordered_sum(conflict))
}

fn ordered_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Dempster's rule: conjunctive combination renormalized over non-empty
/// intersections.
pub fn combine(m1: &MassFunction, m2: &MassFunction) -> Result<MassFunction, BeliefError> {
    same_frame(&m1.frame, &m2.frame)?;
    let (mut products, conflict) = conjunctive_products(m1, m2);
    let denominator: f64 = products.values().sum();
    if denominator <= CONFLICT_THRESHOLD {
        return Err(BeliefError::TotalConflict { conflict });
    }
    for m in products.values_mut() {
        *m /= denominator;
    }
    Ok(MassFunction::from_normalized(m1.frame.clone(), products))
}

/// Left fold of [`combine`]. Returns `None` for an empty input.
pub fn combine_all<'a, I>(masses: I) -> Option<Result<MassFunction, BeliefError>>
where
    I: IntoIterator<Item = &'a MassFunction>,
{
    let mut it = masses.into_iter();
    let first = it.next()?.clone();
    Some(it.try_fold(first, |acc, m| combine(&acc, m)))
}

/// Mass of the empty intersection before renormalization, `Σ_{B∩C=∅} m1(B)m2(C)`.
pub fn conflict_degree(m1: &MassFunction, m2: &MassFunction) -> Result<f64, BeliefError> {
    same_frame(&m1.frame, &m2.frame)?;
    let (_, conflict) = conjunctive_products(m1, m2);
    Ok(conflict.clamp(0.0, 1.0))
}

pub fn belief(m: &MassFunction, subset: &ClassSubset) -> Result<f64, BeliefError> {
    m.frame.check_subset(subset)?;
    Ok(m.focal.iter().filter(|(b, _)| b.is_subset_of(subset)).map(|(_, v)| v).sum())
}

pub fn plausibility(m: &MassFunction, subset: &ClassSubset) -> Result<f64, BeliefError> {
    m.frame.check_subset(subset)?;
    Ok(m.focal.iter().filter(|(b, _)| b.intersects(subset)).map(|(_, v)| v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Arc<Frame> {
        Arc::new(Frame::new("ab", ["a", "b"]).unwrap())
    }

    fn simple(frame: &Arc<Frame>, class: usize, mass: f64) -> MassFunction {
        make_mass(frame, [(frame.singleton(class), mass), (frame.full(), 1.0 - mass)]).unwrap()
    }

    #[test]
    fn make_mass_examples() {
        let f = ab();
        let v = make_mass(&f, [(f.full(), 1.0)]).unwrap();
        assert!(v.is_vacuous());
        let s = simple(&f, 0, 0.6);
        assert_eq!(s.focal_count(), 2);
        assert_eq!(s.mass_of(&f.singleton(0)), 0.6);
        let err = make_mass(&f, [(f.singleton(0), 0.5), (f.singleton(1), 0.4)]).unwrap_err();
        assert!(matches!(err, BeliefError::NotNormalized { total } if (total - 0.9).abs() < 1e-15));
    }

    #[test]
    fn make_mass_errors_and_merging() {
        let f = ab();
        assert!(matches!(
            make_mass(&f, [(f.empty_subset(), 0.1), (f.full(), 0.9)]),
            Err(BeliefError::EmptyFocal { .. })
        ));
        assert!(matches!(
            make_mass(&f, [(f.singleton(0), -0.1), (f.full(), 1.1)]),
            Err(BeliefError::NegativeMass { .. })
        ));
        let m = make_mass(
            &f,
            [
                (f.singleton(0), 0.25),
                (f.singleton(0), 0.25),
                (f.full(), 0.5),
                (f.singleton(1), 0.0),
            ],
        )
        .unwrap();
        assert_eq!(m.focal_count(), 2);
        assert_eq!(m.mass_of(&f.singleton(0)), 0.5);
        let other = Arc::new(Frame::new("abc", ["a", "b", "c"]).unwrap());
        assert!(matches!(
            make_mass(&f, [(other.full(), 1.0)]),
            Err(BeliefError::SubsetSize { .. })
        ));
    }

    #[test]
    fn combine_worked_example() {
        let f = ab();
        let m1 = simple(&f, 0, 0.6);
        let m2 = simple(&f, 1, 0.5);
        let c = combine(&m1, &m2).unwrap();
        assert!((c.mass_of(&f.singleton(0)) - 0.3 / 0.7).abs() < 1e-15);
        assert!((c.mass_of(&f.singleton(1)) - 0.2 / 0.7).abs() < 1e-15);
        assert!((c.mass_of(&f.full()) - 0.2 / 0.7).abs() < 1e-15);
        assert!((conflict_degree(&m1, &m2).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn vacuous_is_neutral_and_conflict_zero() {
        let f = ab();
        let m = simple(&f, 0, 0.6);
        let v = MassFunction::vacuous(&f);
        assert_eq!(combine(&m, &v).unwrap(), m);
        assert_eq!(combine(&v, &m).unwrap(), m);
        assert_eq!(conflict_degree(&m, &v).unwrap(), 0.0);
    }

    #[test]
    fn total_conflict() {
        let f = ab();
        let a = simple(&f, 0, 1.0);
        let b = simple(&f, 1, 1.0);
        assert!(matches!(combine(&a, &b), Err(BeliefError::TotalConflict { .. })));
        assert_eq!(conflict_degree(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn frame_mismatch() {
        let f = ab();
        let g = Arc::new(Frame::new("xy", ["x", "y"]).unwrap());
        let r = combine(&MassFunction::vacuous(&f), &MassFunction::vacuous(&g));
        assert!(matches!(r, Err(BeliefError::FrameMismatch { .. })));
        assert!(conflict_degree(&MassFunction::vacuous(&f), &MassFunction::vacuous(&g)).is_err());
    }

    #[test]
    fn belief_and_plausibility_examples() {
        let f = ab();
        let m = simple(&f, 0, 0.6);
        assert!((belief(&m, &f.full()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(belief(&m, &f.singleton(0)).unwrap(), 0.6);
        assert_eq!(plausibility(&m, &f.singleton(0)).unwrap(), 1.0);
        let v = MassFunction::vacuous(&f);
        assert_eq!(plausibility(&v, &f.singleton(0)).unwrap(), 1.0);
        assert_eq!(belief(&v, &f.singleton(0)).unwrap(), 0.0);
    }

    #[test]
    fn decision_survives_uniform_rescaling_before_normalization() {
        use super::super::{decide, pignistic};
        let f = Arc::new(Frame::new("abc", ["a", "b", "c"]).unwrap());
        let m1 = make_mass(&f, [(f.singleton(0), 0.3), (f.subset([1, 2]).unwrap(), 0.5), (f.full(), 0.2)]).unwrap();
        let m2 = make_mass(
            &f,
            [(f.singleton(1), 0.4), (f.subset([0, 2]).unwrap(), 0.35), (f.full(), 0.25)],
        )
        .unwrap();
        let expected = decide(&pignistic(&combine(&m1, &m2).unwrap()));
        let (products, _) = conjunctive_products(&m1, &m2);
        for scale in [1e-6, 0.37, 3.0, 1e5] {
            let scaled: BTreeMap<ClassSubset, f64> = products.iter().map(|(s, m)| (s.clone(), m * scale)).collect();
            let total: f64 = scaled.values().sum();
            let normalized = scaled.into_iter().map(|(s, m)| (s, m / total)).collect();
            let m = MassFunction::from_normalized(f.clone(), normalized);
            assert_eq!(decide(&pignistic(&m)), expected);
        }
    }
}
