use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefError, Frame, Refining};
use crate::{Error, Result};

/// Id given to the common frame.
pub const COMMON_FRAME_ID: &str = "common";

/// On-disk frames configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesConfig {
    pub common_frame: Vec<String>,
    pub sources: Vec<SourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub id: String,
    pub classes: Vec<String>,
    #[serde(default)]
    pub anything_else: Option<String>,
    /// Image of every class except the anything-else class, whose image is
    /// the complement of all others.
    #[serde(default)]
    pub image: BTreeMap<String, Vec<String>>,
}

/// A resolved source frame with its refining into the common frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceFrame {
    pub frame: Arc<Frame>,
    pub anything_else: Option<usize>,
    pub refining: Refining,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub common: Arc<Frame>,
    pub sources: Vec<SourceFrame>,
}

impl FrameSet {
    pub fn source(&self, id: &str) -> Option<&SourceFrame> {
        self.sources.iter().find(|s| s.frame.id() == id)
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.frame.id() == id)
    }
}

pub fn load_frames_config(path: &Path) -> Result<FrameSet> {
    FramesConfig::load(path)?.resolve()
}

impl FramesConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Builds the frames and validates every refining as a partition of the
    /// common frame.
    pub fn resolve(&self) -> Result<FrameSet> {
        let common = Arc::new(Frame::new(COMMON_FRAME_ID, self.common_frame.iter().cloned())?);
        let mut seen = BTreeSet::new();
        let mut sources = Vec::with_capacity(self.sources.len());
        for src in &self.sources {
            if !seen.insert(src.id.as_str()) {
                return Err(Error::DuplicateFrameId(src.id.clone()));
            }
            sources.push(resolve_source(src, &common)?);
        }
        Ok(FrameSet { common, sources })
    }
}

fn resolve_source(src: &SourceConfig, common: &Arc<Frame>) -> Result<SourceFrame> {
    let mut classes = src.classes.clone();
    if let Some(other) = &src.anything_else {
        if !classes.contains(other) {
            classes.push(other.clone());
        }
    }
    let frame = Arc::new(Frame::new(src.id.clone(), classes)?);
    let anything_else = src.anything_else.as_deref().map(|n| frame.require_index(n)).transpose()?;

    for key in src.image.keys() {
        let k = frame.require_index(key)?;
        if Some(k) == anything_else {
            return Err(Error::InvalidConfig(format!(
                "source `{}`: the image of `{key}` is derived and must not be listed",
                src.id
            )));
        }
    }
    let mut images = vec![None; frame.len()];
    let mut missing = Vec::new();
    for (k, slot) in images.iter_mut().enumerate() {
        if Some(k) == anything_else {
            continue;
        }
        match src.image.get(frame.class_name(k)) {
            Some(names) => *slot = Some(common.subset_of_names(names)?),
            None => missing.push(frame.class_name(k).to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(BeliefError::NotAPartition {
            reason: format!("source `{}`: classes without an image", src.id),
            classes: missing,
        }
        .into());
    }
    if let Some(a) = anything_else {
        let covered = images.iter().flatten().fold(common.empty_subset(), |acc, s| acc.union(s));
        images[a] = Some(covered.complement());
    }
    let images = images.into_iter().map(|i| i.expect("filled above")).collect();
    let refining = crate::belief::make_refining(&frame, common, images)?;
    Ok(SourceFrame {
        frame,
        anything_else,
        refining,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_json() -> &'static str {
        r#"{
          "common_frame": ["c1","c2","c3","c4","c5","c6"],
          "sources": [
            {"id": "s1", "classes": ["c1","c2","coarse"], "anything_else": null,
             "image": {"c1": ["c1"], "c2": ["c2"], "coarse": ["c3","c4","c5","c6"]}},
            {"id": "s2", "classes": ["c3","c4","c5","c6"], "anything_else": "other",
             "image": {"c3": ["c3"], "c4": ["c4"], "c5": ["c5"], "c6": ["c6"]}}
          ]
        }"#
    }

    #[test]
    fn desk_config_resolves() {
        let cfg: FramesConfig = serde_json::from_str(desk_json()).unwrap();
        let set = cfg.resolve().unwrap();
        assert_eq!(set.common.len(), 6);
        let s2 = set.source("s2").unwrap();
        assert_eq!(s2.frame.len(), 5);
        let other = s2.anything_else.unwrap();
        assert_eq!(s2.refining.image(other), &set.common.subset([0, 1]).unwrap());
        let s1 = set.source("s1").unwrap();
        assert_eq!(s1.refining.image(2).len(), 4);
    }

    #[test]
    fn missing_common_class_is_a_gap() {
        let mut cfg: FramesConfig = serde_json::from_str(desk_json()).unwrap();
        cfg.sources[0]
            .image
            .insert("coarse".into(), vec!["c3".into(), "c4".into(), "c5".into()]);
        let err = cfg.resolve().unwrap_err();
        assert!(matches!(err, Error::Belief(BeliefError::NotAPartition { ref classes, .. }) if classes == &["c6".to_string()]));
    }

    #[test]
    fn unknown_and_duplicate() {
        let mut cfg: FramesConfig = serde_json::from_str(desk_json()).unwrap();
        cfg.sources[1].image.insert("c3".into(), vec!["c9".into()]);
        assert!(matches!(cfg.resolve(), Err(Error::Belief(BeliefError::UnknownClass { .. }))));
        let mut cfg: FramesConfig = serde_json::from_str(desk_json()).unwrap();
        cfg.sources[1].id = "s1".into();
        assert!(matches!(cfg.resolve(), Err(Error::DuplicateFrameId(_))));
        let mut cfg: FramesConfig = serde_json::from_str(desk_json()).unwrap();
        cfg.sources[1].image.remove("c4");
        assert!(matches!(cfg.resolve(), Err(Error::Belief(BeliefError::NotAPartition { .. }))));
    }

    #[test]
    fn large_partitioned_frame_resolves() {
        let keep = ["airplane", "automobile", "deer", "frog", "horse", "ship", "truck"];
        let birds: Vec<String> = (0..200).map(|i| format!("bird{i:03}")).collect();
        let cats: Vec<String> = (0..12).map(|i| format!("cat{i:02}")).collect();
        let dogs: Vec<String> = (0..25).map(|i| format!("dog{i:02}")).collect();
        let mut common: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
        common.extend(birds.iter().cloned());
        common.extend(cats.iter().cloned());
        common.extend(dogs.iter().cloned());

        let mut cifar_image: BTreeMap<String, Vec<String>> = keep.iter().map(|c| (c.to_string(), vec![c.to_string()])).collect();
        cifar_image.insert("bird".into(), birds.clone());
        cifar_image.insert("cat".into(), cats.clone());
        cifar_image.insert("dog".into(), dogs.clone());
        let cifar_classes = [
            "airplane",
            "automobile",
            "bird",
            "cat",
            "deer",
            "dog",
            "frog",
            "horse",
            "ship",
            "truck",
        ];
        let pets: Vec<String> = cats.iter().chain(&dogs).cloned().collect();
        let cfg = FramesConfig {
            common_frame: common,
            sources: vec![
                SourceConfig {
                    id: "cifar".into(),
                    classes: cifar_classes.iter().map(|s| s.to_string()).collect(),
                    anything_else: None,
                    image: cifar_image,
                },
                SourceConfig {
                    id: "cub".into(),
                    classes: birds.clone(),
                    anything_else: Some("cub_other".into()),
                    image: birds.iter().map(|b| (b.clone(), vec![b.clone()])).collect(),
                },
                SourceConfig {
                    id: "oxford".into(),
                    classes: pets.clone(),
                    anything_else: Some("oxford_other".into()),
                    image: pets.iter().map(|b| (b.clone(), vec![b.clone()])).collect(),
                },
            ],
        };
        let set = cfg.resolve().unwrap();
        assert_eq!(set.common.len(), 7 + 200 + 37);
        let sizes: Vec<usize> = set.sources.iter().map(|s| s.frame.len()).collect();
        assert_eq!(sizes, vec![10, 201, 38]);
        let cifar = set.source("cifar").unwrap();
        let multi = (0..10).filter(|&k| cifar.refining.image(k).len() > 1).count();
        assert_eq!(multi, 3);
        let cub = set.source("cub").unwrap();
        assert_eq!(cub.refining.image(cub.anything_else.unwrap()).len(), 44);
        let ox = set.source("oxford").unwrap();
        assert_eq!(ox.refining.image(ox.anything_else.unwrap()).len(), 207);
    }
}
