use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FrameSet, FramesConfig, Record, SourceConfig, SourceDataset, Split};
use crate::{Error, Result};

/// Isotropic Gaussian component of one common-frame class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComponent {
    pub name: String,
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Sample counts per common-frame class, train and test together. Each sample
/// is labelled with the source class whose image contains its class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSampling {
    pub id: String,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub classes: Vec<ClassComponent>,
    pub sources: Vec<SourceSampling>,
}

fn default_train_fraction() -> f64 {
    0.5
}

/// Frames plus generator settings; the file read by `gen-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub frames: FramesConfig,
    pub synth: SynthSpec,
}

impl BenchSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// One train and one test dataset per source.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSource {
    pub train: SourceDataset,
    pub test: SourceDataset,
}

pub fn gen_synthetic(seed: u64, spec: &SynthSpec, frames: &FrameSet) -> Result<Vec<GeneratedSource>> {
    validate(spec, frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.sources.len());
    for sampling in &spec.sources {
        let sf = frames.source(&sampling.id).expect("validated");
        let mut train = Vec::new();
        let mut test = Vec::new();
        for comp in &spec.classes {
            let n = sampling.counts.get(&comp.name).copied().unwrap_or(0);
            if n == 0 {
                continue;
            }
            let omega = frames.common.index_of(&comp.name).expect("validated");
            let label = sf.refining.coarsen(omega);
            let n_train = (n as f64 * spec.train_fraction).round() as usize;
            for j in 0..n {
                let features = comp
                    .mean
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + comp.scale * z
                    })
                    .collect();
                let (split, bucket) = if j < n_train { ("tr", &mut train) } else { ("te", &mut test) };
                bucket.push(Record {
                    id: format!("{}-{}-{}-{j}", sampling.id, split, comp.name),
                    features,
                    label,
                });
            }
        }
        out.push(GeneratedSource {
            train: SourceDataset::new(sampling.id.clone(), &sf.frame, Split::Train, train)?,
            test: SourceDataset::new(sampling.id.clone(), &sf.frame, Split::Test, test)?,
        });
    }
    Ok(out)
}

fn validate(spec: &SynthSpec, frames: &FrameSet) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidSpec(m));
    if spec.dim == 0 {
        return bad("feature dimension must be positive".into());
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return bad(format!("train fraction {} outside (0, 1)", spec.train_fraction));
    }
    for c in &spec.classes {
        if frames.common.index_of(&c.name).is_none() {
            return bad(format!("component `{}` is not a common-frame class", c.name));
        }
        if c.mean.len() != spec.dim {
            return bad(format!(
                "component `{}` mean has {} entries, expected {}",
                c.name,
                c.mean.len(),
                spec.dim
            ));
        }
        if !(c.scale >= 0.0 && c.scale.is_finite()) || c.mean.iter().any(|v| !v.is_finite()) {
            return bad(format!("component `{}` has a non-finite mean or negative scale", c.name));
        }
    }
    for s in &spec.sources {
        if frames.source(&s.id).is_none() {
            return bad(format!("unknown source `{}`", s.id));
        }
        for name in s.counts.keys() {
            if !spec.classes.iter().any(|c| &c.name == name) {
                return bad(format!("source `{}` samples `{name}` which has no component", s.id));
            }
        }
    }
    Ok(())
}

/// Classifies by the nearest component mean, the Bayes rule for isotropic
/// components of equal scale and equal priors.
pub fn nearest_mean(spec: &SynthSpec, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in spec.classes.iter().enumerate() {
        let d: f64 = c.mean.iter().zip(x).map(|(m, v)| (m - v) * (m - v)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Means for two groups of classes. The first group sits on a vertical line
/// left of the origin, the second on a circle around the origin; neighbours in
/// either group are `spacing` apart and the groups are `gap` apart.
fn two_groups(first: &[String], rest: &[String], spacing: f64, gap: f64, scale: f64) -> Vec<ClassComponent> {
    let k = rest.len() as f64;
    let radius = if rest.len() > 1 {
        spacing / (2.0 * (std::f64::consts::PI / k).sin())
    } else {
        0.0
    };
    let x0 = -(radius + gap);
    let mid = (first.len() as f64 - 1.0) / 2.0;
    let line = first.iter().enumerate().map(|(i, name)| ClassComponent {
        name: name.clone(),
        mean: vec![x0, spacing * (i as f64 - mid)],
        scale,
    });
    let ring = rest.iter().enumerate().map(|(i, name)| {
        let a = std::f64::consts::TAU * i as f64 / k;
        ClassComponent {
            name: name.clone(),
            mean: vec![radius * a.cos(), radius * a.sin()],
            scale,
        }
    });
    line.chain(ring).collect()
}

fn names(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

const SPACING: f64 = 3.5;
const DESK_GAP: f64 = 6.0;
const UNBALANCED_GAP: f64 = 3.0;

/// Two sources sharing part of a six-class frame. `s1` sees c1, c2 and a
/// coarse class standing for c3..c6; `s2` sees c3..c6 and an anything-else
/// class. 600 train and 600 test samples per source. Each source's unseen
/// classes lie in a separate region of feature space.
pub fn desk_bench() -> BenchSpec {
    two_source_bench(6, 2, SPACING, DESK_GAP)
}

/// Ten common classes where the first source resolves only two of them and
/// lumps the other eight into one coarse class. The two groups sit closer
/// than in [`desk_bench`], so the sources disagree more often.
pub fn unbalanced_bench() -> BenchSpec {
    two_source_bench(10, 2, SPACING, UNBALANCED_GAP)
}

fn two_source_bench(n: usize, fine1: usize, spacing: f64, gap: f64) -> BenchSpec {
    let all = names("c", 1..=n);
    let (first, rest) = all.split_at(fine1);
    let mut image1: BTreeMap<String, Vec<String>> = first.iter().map(|c| (c.clone(), vec![c.clone()])).collect();
    image1.insert("coarse".into(), rest.to_vec());
    let mut classes1 = first.to_vec();
    classes1.push("coarse".into());
    let image2 = rest.iter().map(|c| (c.clone(), vec![c.clone()])).collect();
    let frames = FramesConfig {
        common_frame: all.clone(),
        sources: vec![
            SourceConfig {
                id: "s1".into(),
                classes: classes1,
                anything_else: None,
                image: image1,
            },
            SourceConfig {
                id: "s2".into(),
                classes: rest.to_vec(),
                anything_else: Some("other".into()),
                image: image2,
            },
        ],
    };
    // Each source draws 1200 samples. s1 splits half over its fine classes
    // and half over the coarse members; s2 splits evenly over its own.
    let per_fine = 600 / fine1;
    let per_coarse = 600 / rest.len();
    let per_own = 1200 / rest.len();
    let counts1 = first
        .iter()
        .map(|c| (c.clone(), per_fine))
        .chain(rest.iter().map(|c| (c.clone(), per_coarse)))
        .collect();
    let counts2 = rest.iter().map(|c| (c.clone(), per_own)).collect();
    BenchSpec {
        frames,
        synth: SynthSpec {
            dim: 2,
            train_fraction: 0.5,
            classes: two_groups(first, rest, spacing, gap, 1.0),
            sources: vec![
                SourceSampling {
                    id: "s1".into(),
                    counts: counts1,
                },
                SourceSampling {
                    id: "s2".into(),
                    counts: counts2,
                },
            ],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_sizes_and_labels() {
        let bench = desk_bench();
        let frames = bench.frames.resolve().unwrap();
        let g = gen_synthetic(1, &bench.synth, &frames).unwrap();
        assert_eq!(g.len(), 2);
        for s in &g {
            assert_eq!(s.train.len(), 600);
            assert_eq!(s.test.len(), 600);
        }
        let coarse = g[0].train.frame.index_of("coarse").unwrap();
        assert_eq!(g[0].train.records.iter().filter(|r| r.label == coarse).count(), 300);
        assert!(g[1]
            .train
            .records
            .iter()
            .all(|r| g[1].train.frame.class_name(r.label) != "other"));
    }

    #[test]
    fn repeatable_and_seed_sensitive() {
        let bench = desk_bench();
        let frames = bench.frames.resolve().unwrap();
        let a = gen_synthetic(3, &bench.synth, &frames).unwrap();
        assert_eq!(a, gen_synthetic(3, &bench.synth, &frames).unwrap());
        assert_ne!(a, gen_synthetic(4, &bench.synth, &frames).unwrap());
    }

    #[test]
    fn zero_scale_puts_samples_on_the_mean() {
        let mut bench = desk_bench();
        for c in &mut bench.synth.classes {
            c.scale = 0.0;
        }
        let frames = bench.frames.resolve().unwrap();
        let g = gen_synthetic(0, &bench.synth, &frames).unwrap();
        for r in &g[1].test.records {
            let name = &r.id.split('-').nth(2).unwrap().to_string();
            let comp = bench.synth.classes.iter().find(|c| &c.name == name).unwrap();
            assert_eq!(r.features, comp.mean);
        }
    }

    #[test]
    fn invalid_specs() {
        let bench = desk_bench();
        let frames = bench.frames.resolve().unwrap();
        let mut s = bench.synth.clone();
        s.classes[0].mean.push(0.0);
        assert!(matches!(gen_synthetic(0, &s, &frames), Err(Error::InvalidSpec(_))));
        let mut s = bench.synth.clone();
        s.classes[0].scale = -1.0;
        assert!(matches!(gen_synthetic(0, &s, &frames), Err(Error::InvalidSpec(_))));
        let mut s = bench.synth.clone();
        s.sources[0].id = "nope".into();
        assert!(matches!(gen_synthetic(0, &s, &frames), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn unbalanced_frames_resolve() {
        let bench = unbalanced_bench();
        let frames = bench.frames.resolve().unwrap();
        assert_eq!(frames.common.len(), 10);
        assert_eq!(frames.sources[0].frame.len(), 3);
        assert_eq!(frames.sources[0].refining.image(2).len(), 8);
        assert_eq!(frames.sources[1].frame.len(), 9);
    }
}
