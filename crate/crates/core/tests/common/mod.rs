//! Independent reference implementations used by the integration tests.
//!
//! Mass functions are represented densely: a vector of length 2^n indexed
//! by the bitmask of the subset.
#![allow(dead_code)]

use std::sync::Arc;

use dsfusion::belief::{make_mass, ClassSubset, Frame, MassFunction, Refining};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame(n: usize) -> Arc<Frame> {
    Arc::new(Frame::new(format!("f{n}"), (0..n).map(|i| format!("w{i}"))).unwrap())
}

pub fn mask(s: &ClassSubset) -> usize {
    s.iter().fold(0, |m, i| m | (1 << i))
}

pub fn subset_of_mask(n: usize, m: usize) -> ClassSubset {
    ClassSubset::from_indices(n, (0..n).filter(|i| m >> i & 1 == 1)).unwrap()
}

pub fn dense(m: &MassFunction) -> Vec<f64> {
    let n = m.frame().len();
    let mut v = vec![0.0; 1 << n];
    for (s, x) in m.focal() {
        v[mask(s)] += x;
    }
    v
}

/// Dempster's rule by enumerating every pair of subsets.
pub fn dempster(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut out = vec![0.0; a.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i & j] += x * y;
        }
    }
    let k = out[0];
    if 1.0 - k <= 1e-12 {
        return None;
    }
    out[0] = 0.0;
    out.iter_mut().for_each(|v| *v /= 1.0 - k);
    Some(out)
}

pub fn dense_belief(m: &[f64], a: usize) -> f64 {
    (1..m.len()).filter(|&b| b & !a == 0).map(|b| m[b]).sum()
}

pub fn dense_plausibility(m: &[f64], a: usize) -> f64 {
    (1..m.len()).filter(|&b| b & a != 0).map(|b| m[b]).sum()
}

pub fn dense_pignistic(m: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    for (b, &x) in m.iter().enumerate().skip(1) {
        let size = b.count_ones() as f64;
        for (k, pk) in p.iter_mut().enumerate() {
            if b >> k & 1 == 1 {
                *pk += x / size;
            }
        }
    }
    p
}

/// Dense vacuous extension: each source mask maps to the union of images.
pub fn dense_extend(m: &[f64], images: &[usize], target_n: usize) -> Vec<f64> {
    let mut out = vec![0.0; 1 << target_n];
    for (b, &x) in m.iter().enumerate() {
        let img = (0..images.len())
            .filter(|k| b >> k & 1 == 1)
            .fold(0, |acc, k| acc | images[k]);
        out[img] += x;
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A random mass function with 1..=`max_focal` random non-empty focal sets.
pub fn random_mass(rng: &mut ChaCha8Rng, f: &Arc<Frame>, max_focal: usize) -> MassFunction {
    let n = f.len();
    let k = rng.random_range(1..=max_focal);
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let sets: Vec<usize> = (0..k).map(|_| rng.random_range(1..1usize << n)).collect();
    make_mass(
        f,
        sets.into_iter().zip(weights).map(|(s, w)| (subset_of_mask(n, s), w / total)),
    )
    .unwrap()
}

/// A random refining of a frame with `source_n` classes into `target_n ≥ source_n` classes.
pub fn random_refining(rng: &mut ChaCha8Rng, source_n: usize, target_n: usize) -> Refining {
    let source = Arc::new(Frame::new("src", (0..source_n).map(|i| format!("s{i}"))).unwrap());
    let target = Arc::new(Frame::new("tgt", (0..target_n).map(|i| format!("t{i}"))).unwrap());
    // every source class gets one target class, the rest are spread at random
    let mut owner: Vec<usize> = (0..target_n)
        .map(|t| if t < source_n { t } else { rng.random_range(0..source_n) })
        .collect();
    for i in (1..owner.len()).rev() {
        owner.swap(i, rng.random_range(0..=i));
    }
    let images = (0..source_n)
        .map(|s| ClassSubset::from_indices(target_n, (0..target_n).filter(|&t| owner[t] == s)).unwrap())
        .collect();
    dsfusion::belief::make_refining(&source, &target, images).unwrap()
}

pub fn image_masks(r: &Refining) -> Vec<usize> {
    (0..r.source().len()).map(|k| mask(r.image(k))).collect()
}

/// Mass of one prototype from the closed-form definition, densely.
pub fn dense_prototype_mass(
    n: usize,
    singletons: &[usize],
    center: &[f64],
    eta: f64,
    xi: f64,
    u_raw: &[f64],
    feat: &[f64],
) -> Vec<f64> {
    let d2: f64 = center.iter().zip(feat).map(|(c, x)| (c - x) * (c - x)).sum();
    let alpha = 1.0 / (1.0 + (-xi).exp());
    let s = alpha * (-(eta * eta) * d2).exp();
    let mx = u_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u_raw.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut out = vec![0.0; 1 << n];
    for (pos, &k) in singletons.iter().enumerate() {
        out[1 << k] += e[pos] / z * s;
    }
    out[(1 << n) - 1] += 1.0 - s;
    out
}
