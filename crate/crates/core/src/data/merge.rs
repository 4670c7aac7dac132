use std::sync::Arc;

use crate::belief::{Frame, Refining};
use crate::fusion::SoftLabel;
use crate::{Error, Result};

use super::{FrameSet, SourceDataset};

/// A record of the merged learning set. The soft label is not stored; it is
/// the image of `class` under the refining of source `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedRecord {
    pub id: String,
    pub features: Vec<f64>,
    /// Index into [`MergedDataset::source_ids`].
    pub source: usize,
    /// Class index on the source frame.
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedDataset {
    common: Arc<Frame>,
    source_ids: Vec<String>,
    refinings: Vec<Refining>,
    pub records: Vec<MergedRecord>,
}

impl MergedDataset {
    pub fn common_frame(&self) -> &Arc<Frame> {
        &self.common
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    pub fn refining(&self, source: usize) -> &Refining {
        &self.refinings[source]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn soft_label(&self, i: usize) -> SoftLabel {
        let r = &self.records[i];
        SoftLabel::new(&self.common, self.refinings[r.source].image(r.class).clone()).expect("refining images are non-empty")
    }

    /// Name of the record's original class on its source frame.
    pub fn source_class_name(&self, i: usize) -> &str {
        let r = &self.records[i];
        self.refinings[r.source].source().class_name(r.class)
    }
}

/// Concatenates source datasets onto the common frame.
pub fn merge_datasets(sources: &[&SourceDataset], frames: &FrameSet) -> Result<MergedDataset> {
    let mut source_ids: Vec<String> = Vec::new();
    let mut refinings: Vec<Refining> = Vec::new();
    let mut records = Vec::new();
    for ds in sources {
        let sf = frames
            .source(ds.frame.id())
            .filter(|sf| sf.frame.as_ref() == ds.frame.as_ref())
            .ok_or_else(|| Error::MissingRefining(ds.frame.id().to_string()))?;
        let idx = match source_ids.iter().position(|s| s == ds.frame.id()) {
            Some(i) => i,
            None => {
                source_ids.push(ds.frame.id().to_string());
                refinings.push(sf.refining.clone());
                source_ids.len() - 1
            }
        };
        records.extend(ds.records.iter().map(|r| MergedRecord {
            id: r.id.clone(),
            features: r.features.clone(),
            source: idx,
            class: r.label,
        }));
    }
    Ok(MergedDataset {
        common: frames.common.clone(),
        source_ids,
        refinings,
        records,
    })
}
