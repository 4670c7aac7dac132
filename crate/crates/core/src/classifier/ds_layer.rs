use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamValue, Tape, Var};
use crate::belief::{BeliefError, ClassSubset, Frame, MassFunction};
use crate::{Error, Result};

use super::{lookup, sigmoid, softmax};

/// One prototype of a DS layer.
///
/// The reliability `alpha = sigmoid(xi)` and the membership degrees
/// `u = softmax(u_raw)` are stored through unconstrained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub center: Vec<f64>,
    pub eta: f64,
    pub xi: f64,
    pub u_raw: Vec<f64>,
}

impl Prototype {
    pub fn alpha(&self) -> f64 {
        sigmoid(self.xi)
    }

    pub fn membership(&self) -> Vec<f64> {
        softmax(&self.u_raw)
    }

    /// Evidence strength `alpha · exp(−eta² ‖feat − center‖²)`.
    pub fn activation(&self, feat: &[f64]) -> f64 {
        let d2: f64 = feat.iter().zip(&self.center).map(|(x, w)| (x - w) * (x - w)).sum();
        self.alpha() * (-(self.eta * self.eta) * d2).exp()
    }
}

/// Simple mass function of one prototype: `u_k · s` on each singleton
/// `{θ_k}` listed in `singletons` and `1 − s` on the whole frame.
pub fn prototype_mass(p: &Prototype, feat: &[f64], frame: &Arc<Frame>, singletons: &[usize]) -> Result<MassFunction> {
    if feat.len() != p.center.len() || p.u_raw.len() != singletons.len() {
        return Err(Error::ShapeMismatch(format!(
            "feature {} / center {}, membership {} / singletons {}",
            feat.len(),
            p.center.len(),
            p.u_raw.len(),
            singletons.len()
        )));
    }
    let s = p.activation(feat);
    let u = p.membership();
    let mut focal: Vec<(ClassSubset, f64)> = singletons
        .iter()
        .zip(&u)
        .map(|(&k, &uk)| (frame.singleton(k), uk * s))
        .collect();
    focal.push((frame.full(), 1.0 - s));
    Ok(simple_mass(frame, focal))
}

fn simple_mass(frame: &Arc<Frame>, focal: Vec<(ClassSubset, f64)>) -> MassFunction {
    let mut map = BTreeMap::new();
    for (s, m) in focal {
        *map.entry(s).or_insert(0.0) += m;
    }
    MassFunction::from_normalized(frame.clone(), map)
}

/// A layer of prototypes whose simple mass functions are combined by
/// Dempster's rule. Focal sets of the output are the singletons of every
/// class except the optional anything-else class, plus the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DsLayer {
    frame: Arc<Frame>,
    anything_else: Option<usize>,
    singletons: Vec<usize>,
    dim: usize,
    pub(crate) centers: Vec<f64>,
    pub(crate) eta: Vec<f64>,
    pub(crate) xi: Vec<f64>,
    pub(crate) u_raw: Vec<f64>,
}

impl DsLayer {
    pub fn new(frame: &Arc<Frame>, anything_else: Option<usize>, prototypes: &[Prototype]) -> Result<Self> {
        if prototypes.is_empty() {
            return Err(Error::ShapeMismatch("a DS layer needs at least one prototype".into()));
        }
        if let Some(a) = anything_else {
            if a >= frame.len() {
                return Err(Error::ShapeMismatch(format!("anything-else index {a} outside frame")));
            }
        }
        let singletons: Vec<usize> = (0..frame.len()).filter(|&k| Some(k) != anything_else).collect();
        if singletons.is_empty() {
            return Err(Error::ShapeMismatch("frame has no class besides anything-else".into()));
        }
        let dim = prototypes[0].center.len();
        let mut layer = Self {
            frame: frame.clone(),
            anything_else,
            dim,
            centers: Vec::with_capacity(dim * prototypes.len()),
            eta: Vec::new(),
            xi: Vec::new(),
            u_raw: Vec::new(),
            singletons,
        };
        for p in prototypes {
            if p.center.len() != dim || p.u_raw.len() != layer.singletons.len() {
                return Err(Error::ShapeMismatch("inconsistent prototype shapes".into()));
            }
            let all = p.center.iter().chain(&p.u_raw).chain([&p.eta, &p.xi]);
            if all.into_iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch("non-finite prototype parameter".into()));
            }
            layer.centers.extend_from_slice(&p.center);
            layer.eta.push(p.eta);
            layer.xi.push(p.xi);
            layer.u_raw.extend_from_slice(&p.u_raw);
        }
        Ok(layer)
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn anything_else(&self) -> Option<usize> {
        self.anything_else
    }

    /// Frame indices of the classes that carry singleton mass.
    pub fn singletons(&self) -> &[usize] {
        &self.singletons
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_prototypes(&self) -> usize {
        self.eta.len()
    }

    pub fn prototype(&self, i: usize) -> Prototype {
        let (p, m) = (self.dim, self.singletons.len());
        Prototype {
            center: self.centers[i * p..(i + 1) * p].to_vec(),
            eta: self.eta[i],
            xi: self.xi[i],
            u_raw: self.u_raw[i * m..(i + 1) * m].to_vec(),
        }
    }

    pub fn prototypes(&self) -> Vec<Prototype> {
        (0..self.n_prototypes()).map(|i| self.prototype(i)).collect()
    }

    /// Closed-form orthogonal sum for this focal structure: returns the
    /// singleton masses (in [`singletons`](Self::singletons) order) and the
    /// mass on the whole frame.
    pub fn combine_raw(&self, feat: &[f64]) -> Result<(Vec<f64>, f64)> {
        if feat.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "feature has {} values, layer expects {}",
                feat.len(),
                self.dim
            )));
        }
        let mut singles: Vec<f64> = Vec::new();
        let mut ignorance = 1.0;
        for i in 0..self.n_prototypes() {
            let p = self.prototype(i);
            let s = p.activation(feat);
            let b: Vec<f64> = p.membership().into_iter().map(|u| u * s).collect();
            let bb = 1.0 - s;
            if i == 0 {
                singles = b;
                ignorance = bb;
                continue;
            }
            let next: Vec<f64> = singles
                .iter()
                .zip(&b)
                .map(|(a, bk)| a * bk + a * bb + ignorance * bk)
                .collect();
            let next_ign = ignorance * bb;
            let total = next.iter().sum::<f64>() + next_ign;
            if total <= 0.0 {
                // Unreachable while every prototype keeps alpha < 1.
                return Err(BeliefError::TotalConflict { conflict: 1.0 }.into());
            }
            singles = next.into_iter().map(|v| v / total).collect();
            ignorance = next_ign / total;
        }
        Ok((singles, ignorance))
    }

    pub fn forward(&self, feat: &[f64]) -> Result<MassFunction> {
        let (singles, ignorance) = self.combine_raw(feat)?;
        let mut focal: Vec<(ClassSubset, f64)> = self
            .singletons
            .iter()
            .zip(singles)
            .map(|(&k, m)| (self.frame.singleton(k), m))
            .collect();
        focal.push((self.frame.full(), ignorance));
        Ok(simple_mass(&self.frame, focal))
    }

    /// Focal sets in the order produced by [`record`](Self::record).
    pub fn focal_sets(&self) -> Vec<ClassSubset> {
        let mut v: Vec<ClassSubset> = self.singletons.iter().map(|&k| self.frame.singleton(k)).collect();
        v.push(self.frame.full());
        v
    }

    pub fn params(&self, prefix: &str) -> Vec<ParamValue> {
        let i = self.n_prototypes();
        vec![
            ParamValue::matrix(format!("{prefix}centers"), i, self.dim, self.centers.clone()),
            ParamValue::vector(format!("{prefix}eta"), self.eta.clone()),
            ParamValue::vector(format!("{prefix}xi"), self.xi.clone()),
            ParamValue::matrix(format!("{prefix}u"), i, self.singletons.len(), self.u_raw.clone()),
        ]
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Vec<f64>)> {
        vec![
            (format!("{prefix}centers"), &mut self.centers),
            (format!("{prefix}eta"), &mut self.eta),
            (format!("{prefix}xi"), &mut self.xi),
            (format!("{prefix}u"), &mut self.u_raw),
        ]
    }

    /// Records the layer on the tape. The output is the mass vector over
    /// [`focal_sets`](Self::focal_sets).
    pub fn record(&self, tape: &mut Tape, prefix: &str, feat: Var) -> Result<Var> {
        let centers = lookup(tape, &format!("{prefix}centers"))?;
        let eta = lookup(tape, &format!("{prefix}eta"))?;
        let xi = lookup(tape, &format!("{prefix}xi"))?;
        let u_raw = lookup(tape, &format!("{prefix}u"))?;
        let m = self.singletons.len();

        let d2 = tape.squared_distance(feat, centers)?;
        let eta2 = tape.mul(eta, eta)?;
        let scaled = tape.mul(eta2, d2)?;
        let neg = tape.neg(scaled);
        let decay = tape.exp(neg);
        let alpha = tape.sigmoid(xi);
        let s = tape.mul(alpha, decay)?;
        let u = tape.softmax(u_raw);
        let one = tape.constant_scalar(1.0);

        let mut state: Option<(Var, Var)> = None;
        for i in 0..self.n_prototypes() {
            let si = tape.index(s, i)?;
            let ui = tape.row(u, i)?;
            let b = tape.mul(ui, si)?;
            let bb = tape.sub(one, si)?;
            state = Some(match state {
                None => (b, bb),
                Some((a, aa)) => {
                    let ab = tape.mul(a, b)?;
                    let a_bb = tape.mul(a, bb)?;
                    let aa_b = tape.mul(b, aa)?;
                    let t1 = tape.add(ab, a_bb)?;
                    let singles = tape.add(t1, aa_b)?;
                    let ign = tape.mul(aa, bb)?;
                    let joined = tape.concat(&[singles, ign]);
                    let norm = tape.normalize_by_sum(joined)?;
                    (tape.slice(norm, 0, m)?, tape.index(norm, m)?)
                }
            });
        }
        let (singles, ign) = state.expect("at least one prototype");
        Ok(tape.concat(&[singles, ign]))
    }
}

/// Initializes a DS layer from a feature set.
///
/// Centers are picked by k-means++ seeding. `eta` starts at the inverse mean
/// pairwise center distance, `xi` at 0 (alpha = 0.5), and each membership
/// vector leans toward the dominant label of the samples nearest to its
/// center with a logit margin of 1. `labels` are subsets of the layer frame;
/// members of a label share its weight equally.
pub fn init_ds_layer(
    features: &[Vec<f64>],
    labels: &[ClassSubset],
    frame: &Arc<Frame>,
    anything_else: Option<usize>,
    n_prototypes: usize,
    seed: u64,
) -> Result<DsLayer> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != features.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    if n_prototypes == 0 || n_prototypes > features.len() {
        return Err(Error::ShapeMismatch(format!(
            "{n_prototypes} prototypes requested for {} samples",
            features.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::ShapeMismatch("features of unequal length".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = kmeans_pp(features, n_prototypes, &mut rng);
    let centers: Vec<&Vec<f64>> = chosen.iter().map(|&i| &features[i]).collect();

    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            dist_sum += sq_dist(centers[i], centers[j]).sqrt();
            pairs += 1;
        }
    }
    let mut mean_dist = if pairs > 0 { dist_sum / pairs as f64 } else { 0.0 };
    if mean_dist <= 0.0 {
        mean_dist = features.iter().map(|f| sq_dist(f, centers[0]).sqrt()).sum::<f64>() / features.len() as f64;
    }
    let eta = if mean_dist > 0.0 { 1.0 / mean_dist } else { 1.0 };

    let singletons: Vec<usize> = (0..frame.len()).filter(|&k| Some(k) != anything_else).collect();
    let mut votes = vec![vec![0.0; singletons.len()]; centers.len()];
    for (f, label) in features.iter().zip(labels) {
        let nearest = (0..centers.len())
            .min_by(|&a, &b| sq_dist(f, centers[a]).total_cmp(&sq_dist(f, centers[b])))
            .expect("non-empty");
        let share = 1.0 / label.len().max(1) as f64;
        for (pos, &k) in singletons.iter().enumerate() {
            if label.contains(k) {
                votes[nearest][pos] += share;
            }
        }
    }

    let prototypes: Vec<Prototype> = centers
        .iter()
        .zip(&votes)
        .map(|(c, v)| {
            let mut u_raw = vec![0.0; singletons.len()];
            if v.iter().any(|&x| x > 0.0) {
                u_raw[crate::belief::argmax(v)] = 1.0;
            }
            Prototype {
                center: (*c).clone(),
                eta,
                xi: 0.0,
                u_raw,
            }
        })
        .collect();
    DsLayer::new(frame, anything_else, &prototypes)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of `k` distinct samples chosen by D² weighting.
fn kmeans_pp<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while chosen.len() < k {
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| d2[i]).sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !taken[i]) {
                if d2[i] <= 0.0 {
                    continue;
                }
                pick = Some(i);
                r -= d2[i];
                if r < 0.0 {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen
}
