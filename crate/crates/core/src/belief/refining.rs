use std::collections::BTreeMap;
use std::sync::Arc;

use super::mass::same_frame;
use super::{BeliefError, ClassSubset, Frame, MassFunction};

/// A refining maps every class of a coarse source frame onto a block of a
/// partition of a finer target frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Refining {
    source: Arc<Frame>,
    target: Arc<Frame>,
    images: Vec<ClassSubset>,
}

/// Validates that `images` (one per source class, in source order) partition
/// the target frame.
pub fn make_refining(source: &Arc<Frame>, target: &Arc<Frame>, images: Vec<ClassSubset>) -> Result<Refining, BeliefError> {
    if images.len() != source.len() {
        return Err(BeliefError::NotAPartition {
            reason: format!("{} images given for {} source classes", images.len(), source.len()),
            classes: Vec::new(),
        });
    }
    for img in &images {
        target.check_subset(img)?;
    }
    let empty: Vec<String> = images
        .iter()
        .enumerate()
        .filter(|(_, img)| img.is_empty())
        .map(|(i, _)| source.class_name(i).to_string())
        .collect();
    if !empty.is_empty() {
        return Err(BeliefError::NotAPartition {
            reason: "empty image".into(),
            classes: empty,
        });
    }
    let mut owner: Vec<Option<usize>> = vec![None; target.len()];
    let mut overlaps = Vec::new();
    for (i, img) in images.iter().enumerate() {
        for w in img.iter() {
            match owner[w] {
                Some(j) => overlaps.push(format!(
                    "{} (images of {} and {})",
                    target.class_name(w),
                    source.class_name(j),
                    source.class_name(i)
                )),
                None => owner[w] = Some(i),
            }
        }
    }
    if !overlaps.is_empty() {
        return Err(BeliefError::NotAPartition {
            reason: "overlapping images".into(),
            classes: overlaps,
        });
    }
    let gaps: Vec<String> = owner
        .iter()
        .enumerate()
        .filter(|(_, o)| o.is_none())
        .map(|(w, _)| target.class_name(w).to_string())
        .collect();
    if !gaps.is_empty() {
        return Err(BeliefError::NotAPartition {
            reason: "target classes not covered".into(),
            classes: gaps,
        });
    }
    Ok(Refining {
        source: source.clone(),
        target: target.clone(),
        images,
    })
}

impl Refining {
    pub fn identity(frame: &Arc<Frame>) -> Self {
        Self {
            source: frame.clone(),
            target: frame.clone(),
            images: (0..frame.len()).map(|i| frame.singleton(i)).collect(),
        }
    }

    /// Builds a refining from `(source class, [target classes])` name pairs.
    pub fn from_names<S: AsRef<str>>(source: &Arc<Frame>, target: &Arc<Frame>, map: &[(S, Vec<S>)]) -> Result<Self, BeliefError> {
        let mut images: Vec<Option<ClassSubset>> = vec![None; source.len()];
        for (name, image) in map {
            let i = source.require_index(name.as_ref())?;
            images[i] = Some(target.subset_of_names(image)?);
        }
        let missing: Vec<String> = images
            .iter()
            .enumerate()
            .filter(|(_, img)| img.is_none())
            .map(|(i, _)| source.class_name(i).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(BeliefError::NotAPartition {
                reason: "source classes without an image".into(),
                classes: missing,
            });
        }
        make_refining(source, target, images.into_iter().flatten().collect())
    }

    pub fn source(&self) -> &Arc<Frame> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Frame> {
        &self.target
    }

    /// Image of a single source class.
    pub fn image(&self, class: usize) -> &ClassSubset {
        &self.images[class]
    }

    /// Image of an arbitrary subset: the union of its members' images.
    pub fn apply(&self, subset: &ClassSubset) -> ClassSubset {
        subset
            .iter()
            .fold(self.target.empty_subset(), |acc, i| acc.union(&self.images[i]))
    }

    /// The source class whose image contains target class `target_class`.
    pub fn coarsen(&self, target_class: usize) -> usize {
        self.images
            .iter()
            .position(|img| img.contains(target_class))
            .expect("refining images cover the target frame")
    }
}

/// Re-expresses `m` on the target frame: every focal set `A` moves to `ρ(A)`.
pub fn vacuous_extend(m: &MassFunction, rho: &Refining) -> Result<MassFunction, BeliefError> {
    same_frame(rho.source(), m.frame())?;
    let mut focal = BTreeMap::new();
    for (a, mass) in m.focal() {
        *focal.entry(rho.apply(a)).or_insert(0.0) += mass;
    }
    Ok(MassFunction::from_normalized(rho.target().clone(), focal))
}
