use std::collections::HashMap;

use super::{BeliefError, ClassSubset};

/// Largest frame accepted by [`Frame::new`].
pub const DEFAULT_MAX_CLASSES: usize = 256;

/// A frame of discernment: an ordered list of mutually exclusive classes.
#[derive(Debug, Clone)]
pub struct Frame {
    id: String,
    classes: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.classes == other.classes
    }
}

impl Eq for Frame {}

impl Frame {
    pub fn new<S: Into<String>>(id: impl Into<String>, classes: impl IntoIterator<Item = S>) -> Result<Self, BeliefError> {
        Self::with_max_classes(id, classes, DEFAULT_MAX_CLASSES)
    }

    pub fn with_max_classes<S: Into<String>>(
        id: impl Into<String>,
        classes: impl IntoIterator<Item = S>,
        max_classes: usize,
    ) -> Result<Self, BeliefError> {
        let id = id.into();
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        let invalid = |reason: String| BeliefError::InvalidFrame {
            frame: id.clone(),
            reason,
        };
        if classes.is_empty() {
            return Err(invalid("no classes".into()));
        }
        if classes.len() > max_classes {
            return Err(invalid(format!(
                "{} classes exceeds the limit of {max_classes}",
                classes.len()
            )));
        }
        let mut index = HashMap::with_capacity(classes.len());
        for (i, name) in classes.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(invalid(format!("duplicate class `{name}`")));
            }
        }
        Ok(Self { id, classes, index })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require_index(&self, name: &str) -> Result<usize, BeliefError> {
        self.index_of(name).ok_or_else(|| BeliefError::UnknownClass {
            frame: self.id.clone(),
            name: name.to_string(),
        })
    }

    pub fn full(&self) -> ClassSubset {
        ClassSubset::full(self.len())
    }

    pub fn empty_subset(&self) -> ClassSubset {
        ClassSubset::empty(self.len())
    }

    pub fn singleton(&self, index: usize) -> ClassSubset {
        ClassSubset::singleton(self.len(), index)
    }

    pub fn subset<I: IntoIterator<Item = usize>>(&self, indices: I) -> Result<ClassSubset, BeliefError> {
        let indices: Vec<usize> = indices.into_iter().collect();
        ClassSubset::from_indices(self.len(), indices.iter().copied()).ok_or_else(|| BeliefError::InvalidFrame {
            frame: self.id.clone(),
            reason: format!("index out of range in {indices:?}"),
        })
    }

    pub fn subset_of_names<S: AsRef<str>>(&self, names: &[S]) -> Result<ClassSubset, BeliefError> {
        let mut s = self.empty_subset();
        for name in names {
            s.insert(self.require_index(name.as_ref())?);
        }
        Ok(s)
    }

    /// Renders a subset as `{a,b}`, or `Θ` for the whole frame.
    pub fn format_subset(&self, subset: &ClassSubset) -> String {
        if subset.is_full() && self.len() > 1 {
            return "Θ".to_string();
        }
        let names: Vec<&str> = subset.iter().map(|i| self.class_name(i)).collect();
        format!("{{{}}}", names.join(","))
    }

    pub(crate) fn check_subset(&self, subset: &ClassSubset) -> Result<(), BeliefError> {
        if subset.frame_size() != self.len() {
            return Err(BeliefError::SubsetSize {
                expected: self.len(),
                found: subset.frame_size(),
            });
        }
        Ok(())
    }
}
