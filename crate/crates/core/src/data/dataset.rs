use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefError, Frame};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One labelled record; `label` indexes the dataset's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub features: Vec<f64>,
    pub label: usize,
}

/// Records labelled on one source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDataset {
    pub id: String,
    pub frame: Arc<Frame>,
    pub split: Split,
    pub records: Vec<Record>,
}

impl SourceDataset {
    pub fn new(id: impl Into<String>, frame: &Arc<Frame>, split: Split, records: Vec<Record>) -> Result<Self> {
        if let Some(first) = records.first() {
            let dim = first.features.len();
            if let Some(r) = records.iter().find(|r| r.features.len() != dim) {
                return Err(Error::ShapeMismatch(format!(
                    "record `{}` has {} features, expected {dim}",
                    r.id,
                    r.features.len()
                )));
            }
        }
        if let Some(r) = records.iter().find(|r| r.label >= frame.len()) {
            return Err(Error::ShapeMismatch(format!(
                "record `{}` label {} outside frame",
                r.id, r.label
            )));
        }
        Ok(Self {
            id: id.into(),
            frame: frame.clone(),
            split,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.features.len())
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }
}

/// Writes `id,f0..f{P-1},label`. Floats use the shortest round-trip form.
pub fn save_dataset_csv(ds: &SourceDataset, path: &Path) -> Result<()> {
    let dim = ds.dim().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["id".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in &ds.records {
        let mut row = Vec::with_capacity(dim + 2);
        row.push(r.id.clone());
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(ds.frame.class_name(r.label).to_string());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset_csv(path: &Path, frame: &Arc<Frame>, id: &str, split: Split) -> Result<SourceDataset> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let n = header.len();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if n < 2 || &header[0] != "id" || &header[n - 1] != "label" {
        return Err(parse_err(1, "header must be id,f0..f{P-1},label".into()));
    }
    for (i, h) in header.iter().skip(1).take(n - 2).enumerate() {
        if h != format!("f{i}") {
            return Err(parse_err(1, format!("unexpected column `{h}`, expected f{i}")));
        }
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let features = row
            .iter()
            .skip(1)
            .take(n - 2)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("bad number `{v}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let name = &row[n - 1];
        let label = frame.index_of(name).ok_or_else(|| {
            parse_err(
                line,
                BeliefError::UnknownClass {
                    frame: frame.id().to_string(),
                    name: name.to_string(),
                }
                .to_string(),
            )
        })?;
        records.push(Record {
            id: row[0].to_string(),
            features,
            label,
        });
    }
    SourceDataset::new(id, frame, split, records)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
