//! Learning which (location class, task type) pairs resolve tasks well.
//!
//! Outcomes are grouped per pair into a three-dimensional feature (mean
//! accuracy, mean PRS, response rate), standardized, and clustered by a
//! k-means whose first centroids come from seed-labelled pairs. Each cluster
//! is then judged against accuracy and PRS thresholds and every member
//! inherits the verdict.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{LocationClassId, TaskTypeId};
use crate::rng::{stream, Stream};

const DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("no (class, type) pair has enough samples")]
    NoData,
    #[error("{points} points cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("k must be at least 2")]
    K,
    #[error("seed labels must include both verdicts")]
    SeedVerdicts,
    #[error("thresholds out of range: accuracy in (0, 1), prs > 0")]
    Threshold,
    #[error("max_iters must be positive and tol non-negative")]
    Iteration,
}

/// One delivered assignment seen from the pair it was answered in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub class: LocationClassId,
    pub task_type: TaskTypeId,
    pub answered: bool,
    pub correct: bool,
    /// PRS of the answer; ignored when unanswered.
    pub prs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationFeature {
    pub class: LocationClassId,
    pub task_type: TaskTypeId,
    /// Fraction of answers that were correct (0 if none).
    pub mean_accuracy: f64,
    pub mean_prs: f64,
    /// Answers per assignment.
    pub response_rate: f64,
    /// Assignments observed.
    pub sample_count: u32,
    /// Sampling variance of the three means above (accuracy, PRS, rate).
    #[serde(default)]
    pub sampling_var: [f64; DIM],
}

impl LocationFeature {
    fn key(&self) -> (LocationClassId, TaskTypeId) {
        (self.class, self.task_type)
    }

    fn raw(&self) -> [f64; DIM] {
        [self.mean_accuracy, self.mean_prs, self.response_rate]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Efficient,
    Inefficient,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Efficient => "efficient",
            Verdict::Inefficient => "inefficient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedLabel {
    pub class: LocationClassId,
    pub task_type: TaskTypeId,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPair {
    pub class: LocationClassId,
    pub task_type: TaskTypeId,
    pub verdict: Verdict,
    pub confidence: f64,
    pub samples: u32,
}

#[derive(Default)]
struct Tally {
    n: u32,
    answered: u32,
    correct: u32,
    prs_sum: f64,
    prs_sq: f64,
}

/// Per-pair features for every pair with at least `min_samples` observations,
/// ordered by (class, type).
pub fn featurize(observations: &[Observation], min_samples: u32) -> Result<Vec<LocationFeature>, GeoError> {
    let mut groups: BTreeMap<(LocationClassId, TaskTypeId), Tally> = BTreeMap::new();
    for o in observations {
        let t = groups.entry((o.class, o.task_type)).or_default();
        t.n += 1;
        if o.answered {
            t.answered += 1;
            t.correct += o.correct as u32;
            t.prs_sum += o.prs;
            t.prs_sq += o.prs * o.prs;
        }
    }
    let out: Vec<LocationFeature> = groups
        .into_iter()
        .filter(|(_, t)| t.n >= min_samples.max(1))
        .map(|((class, task_type), t)| {
            let per_answer = |x: f64| if t.answered > 0 { x / t.answered as f64 } else { 0.0 };
            let acc = per_answer(t.correct as f64);
            let prs = per_answer(t.prs_sum);
            let rate = t.answered as f64 / t.n as f64;
            let prs_spread = (per_answer(t.prs_sq) - prs * prs).max(0.0);
            LocationFeature {
                class,
                task_type,
                mean_accuracy: acc,
                mean_prs: prs,
                response_rate: rate,
                sample_count: t.n,
                sampling_var: [per_answer(acc * (1.0 - acc)), per_answer(prs_spread), rate * (1.0 - rate) / t.n as f64],
            }
        })
        .collect();
    if out.is_empty() {
        return Err(GeoError::NoData);
    }
    Ok(out)
}

/// Zero mean, unit (population) variance per dimension; constant dimensions
/// map to 0.
pub fn standardize(features: &[LocationFeature]) -> Vec<[f64; DIM]> {
    let n = features.len() as f64;
    let mut mean = [0.0; DIM];
    for f in features {
        for (m, x) in mean.iter_mut().zip(f.raw()) {
            *m += x;
        }
    }
    let mean = mean.map(|m| m / n);
    let mut sd = [0.0; DIM];
    for f in features {
        for d in 0..DIM {
            sd[d] += (f.raw()[d] - mean[d]) * (f.raw()[d] - mean[d]) / n;
        }
    }
    let sd: [f64; DIM] = core::array::from_fn(|d| {
        let s = libm::sqrt(sd[d]);
        // Rounding residue on a constant dimension.
        if s <= 1e-12 * mean[d].abs().max(1.0) {
            0.0
        } else {
            s
        }
    });
    features
        .iter()
        .map(|f| {
            let raw = f.raw();
            core::array::from_fn(|d| if sd[d] > 0.0 { (raw[d] - mean[d]) / sd[d] } else { 0.0 })
        })
        .collect()
}

/// Standardized features scaled per dimension by how much of the spread
/// between pairs is not sampling noise, `max(0, 1 - mean sampling variance /
/// between-pair variance)`. A dimension that only carries noise shrinks
/// towards 0 instead of weighing as much as a real signal.
pub fn cluster_space(features: &[LocationFeature]) -> Vec<[f64; DIM]> {
    let n = features.len() as f64;
    let z = standardize(features);
    let reliability: [f64; DIM] = core::array::from_fn(|d| {
        let mean = features.iter().map(|f| f.raw()[d]).sum::<f64>() / n;
        let between = features.iter().map(|f| (f.raw()[d] - mean) * (f.raw()[d] - mean)).sum::<f64>() / n;
        let noise = features.iter().map(|f| f.sampling_var[d]).sum::<f64>() / n;
        if between > 0.0 {
            (1.0 - noise / between).max(0.0)
        } else {
            0.0
        }
    });
    z.into_iter().map(|p| core::array::from_fn(|d| p[d] * reliability[d])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Extra randomly initialised runs after the seeded one.
    pub restarts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { k: 2, max_iters: 100, tol: 1e-9, seed: 0, restarts: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster of each feature, in input order.
    pub assignment: Vec<usize>,
    /// Centroids in standardized space.
    pub centroids: Vec<[f64; DIM]>,
    /// Cluster each seed verdict was pinned to.
    pub pinned: BTreeMap<Verdict, usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Some cluster ended empty.
    pub degenerate: bool,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, &c)| c == cluster).map(|(i, _)| i)
    }
}

fn sq_dist(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the smaller index.
pub fn nearest(point: &[f64; DIM], centroids: &[[f64; DIM]]) -> usize {
    let mut best = 0;
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        if sq_dist(point, centroid) < sq_dist(point, &centroids[best]) {
            best = c;
        }
    }
    best
}

fn mean_of(points: &[[f64; DIM]], members: impl Iterator<Item = usize>) -> Option<[f64; DIM]> {
    let mut sum = [0.0; DIM];
    let mut n = 0usize;
    for i in members {
        for d in 0..DIM {
            sum[d] += points[i][d];
        }
        n += 1;
    }
    (n > 0).then(|| sum.map(|s| s / n as f64))
}

/// Seeded k-means over [`cluster_space`].
///
/// Seeds that name a pair absent from `features` are ignored. The remaining
/// seeds of each verdict start one centroid at their mean and stay pinned to
/// it; other centroids are farthest-point picks (the first one random when
/// nothing is seeded). Each of `params.restarts` further runs starts from
/// k-means++ picks with the same pins, and the run with the lowest inertia
/// wins (ties to the earliest).
pub fn seeded_cluster(
    features: &[LocationFeature],
    seeds: &[SeedLabel],
    params: &ClusterParams,
) -> Result<Clustering, GeoError> {
    let k = params.k;
    if k < 2 {
        return Err(GeoError::K);
    }
    if params.max_iters == 0 || !(params.tol >= 0.0) {
        return Err(GeoError::Iteration);
    }
    if features.len() < k {
        return Err(GeoError::TooFewPoints { points: features.len(), k });
    }
    if !seeds.is_empty() {
        let verdicts: BTreeSet<Verdict> = seeds.iter().map(|s| s.verdict).collect();
        if verdicts.len() < 2 {
            return Err(GeoError::SeedVerdicts);
        }
    }
    let points = cluster_space(features);
    let position: BTreeMap<_, usize> = features.iter().enumerate().map(|(i, f)| (f.key(), i)).collect();

    let mut seed_groups: BTreeMap<Verdict, Vec<usize>> = BTreeMap::new();
    for s in seeds {
        if let Some(&i) = position.get(&(s.class, s.task_type)) {
            seed_groups.entry(s.verdict).or_default().push(i);
        }
    }
    let mut pin: Vec<Option<usize>> = vec![None; points.len()];
    let mut pinned = BTreeMap::new();
    let mut centroids: Vec<[f64; DIM]> = Vec::with_capacity(k);
    for (verdict, members) in &seed_groups {
        let c = centroids.len();
        for &i in members {
            // A pair seeded with both verdicts keeps the first.
            pin[i].get_or_insert(c);
        }
        centroids.push(mean_of(&points, members.iter().copied()).expect("non-empty group"));
        pinned.insert(*verdict, c);
    }
    let mut rng = stream(params.seed, Stream::Cluster);
    if centroids.is_empty() {
        centroids.push(points[rng.random_range(0..points.len())]);
    }
    while centroids.len() < k {
        let mut far = 0;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let d = min_sq_dist(p, &centroids);
            if d > far_d {
                far = i;
                far_d = d;
            }
        }
        centroids.push(points[far]);
    }

    let mut best = lloyd(&points, &pin, centroids, params);
    for _ in 0..params.restarts {
        let run = lloyd(&points, &pin, plus_plus(&points, k, &mut rng), params);
        if run.inertia < best.inertia {
            best = run;
        }
    }
    let degenerate = (0..k).any(|c| !best.assignment.contains(&c));
    Ok(Clustering {
        assignment: best.assignment,
        centroids: best.centroids,
        pinned,
        iterations: best.iterations,
        converged: best.converged,
        degenerate,
    })
}

fn min_sq_dist(p: &[f64; DIM], centroids: &[[f64; DIM]]) -> f64 {
    centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min)
}

fn plus_plus<R: Rng + ?Sized>(points: &[[f64; DIM]], k: usize, rng: &mut R) -> Vec<[f64; DIM]> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| min_sq_dist(p, &centroids)).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            d.iter()
                .position(|&x| {
                    r -= x;
                    r < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick]);
    }
    centroids
}

struct Run {
    assignment: Vec<usize>,
    centroids: Vec<[f64; DIM]>,
    inertia: f64,
    iterations: usize,
    converged: bool,
}

fn lloyd(points: &[[f64; DIM]], pin: &[Option<usize>], mut centroids: Vec<[f64; DIM]>, params: &ClusterParams) -> Run {
    let assign = |centroids: &[[f64; DIM]]| -> Vec<usize> {
        points.iter().zip(pin).map(|(p, pin)| pin.unwrap_or_else(|| nearest(p, centroids))).collect()
    };
    let mut assignment = assign(&centroids);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        iterations += 1;
        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if let Some(m) = mean_of(points, assignment.iter().enumerate().filter(|(_, &a)| a == c).map(|(i, _)| i)) {
                shift = shift.max(libm::sqrt(sq_dist(centroid, &m)));
                *centroid = m;
            }
        }
        let next = assign(&centroids);
        let stable = next == assignment;
        assignment = next;
        if stable || shift <= params.tol {
            converged = true;
            break;
        }
    }
    let inertia = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    Run { assignment, centroids, inertia, iterations, converged }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub accuracy: f64,
    pub prs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { accuracy: 0.7, prs: 0.5 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.accuracy > 0.0 && self.accuracy < 1.0 && self.prs > 0.0 && self.prs.is_finite() {
            Ok(())
        } else {
            Err(GeoError::Threshold)
        }
    }

    /// Signed distance from the efficient region, each axis scaled to
    /// `[-1, 1]`: positive inside, negative outside.
    fn margin(&self, accuracy: f64, prs: f64) -> f64 {
        let m_acc = if accuracy >= self.accuracy {
            (accuracy - self.accuracy) / (1.0 - self.accuracy)
        } else {
            (accuracy - self.accuracy) / self.accuracy
        };
        let m_prs = ((prs - self.prs) / self.prs).clamp(-1.0, 1.0);
        if m_acc >= 0.0 && m_prs >= 0.0 {
            m_acc.min(m_prs)
        } else {
            m_acc.min(0.0).min(m_prs.min(0.0))
        }
    }

    fn efficient(&self, accuracy: f64, prs: f64) -> bool {
        accuracy >= self.accuracy && prs >= self.prs
    }
}

/// One verdict per feature, in feature order.
///
/// A cluster is efficient when the mean raw accuracy and mean raw PRS of its
/// members clear the thresholds. Confidence is how far the member itself sits
/// on its verdict's side of the threshold surface; a member on the other side
/// gets 0.
pub fn label_efficiency(
    clustering: &Clustering,
    features: &[LocationFeature],
    thresholds: &Thresholds,
) -> Result<Vec<EfficiencyPair>, GeoError> {
    thresholds.validate()?;
    let k = clustering.centroids.len();
    let verdicts: Vec<Verdict> = (0..k)
        .map(|c| {
            let members: Vec<&LocationFeature> = clustering.members(c).map(|i| &features[i]).collect();
            let n = members.len() as f64;
            let acc = members.iter().map(|f| f.mean_accuracy).sum::<f64>() / n;
            let prs = members.iter().map(|f| f.mean_prs).sum::<f64>() / n;
            if !members.is_empty() && thresholds.efficient(acc, prs) {
                Verdict::Efficient
            } else {
                Verdict::Inefficient
            }
        })
        .collect();
    Ok(features
        .iter()
        .zip(&clustering.assignment)
        .map(|(f, &c)| {
            let verdict = verdicts[c];
            let s = thresholds.margin(f.mean_accuracy, f.mean_prs);
            let confidence = match verdict {
                Verdict::Efficient => s,
                Verdict::Inefficient => -s,
            }
            .clamp(0.0, 1.0);
            EfficiencyPair { class: f.class, task_type: f.task_type, verdict, confidence, samples: f.sample_count }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeolearnParams {
    pub min_samples: u32,
    pub cluster: ClusterParams,
    pub thresholds: Thresholds,
    pub seeds: Vec<SeedLabel>,
}

impl Default for GeolearnParams {
    fn default() -> Self {
        GeolearnParams {
            min_samples: 20,
            cluster: ClusterParams::default(),
            thresholds: Thresholds::default(),
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub features: Vec<LocationFeature>,
    pub clustering: Clustering,
    pub pairs: Vec<EfficiencyPair>,
}

/// featurize, cluster and label in one pass.
pub fn learn_efficiency(observations: &[Observation], params: &GeolearnParams) -> Result<LearnOutcome, GeoError> {
    params.thresholds.validate()?;
    let features = featurize(observations, params.min_samples)?;
    let clustering = seeded_cluster(&features, &params.seeds, &params.cluster)?;
    let pairs = label_efficiency(&clustering, &features, &params.thresholds)?;
    Ok(LearnOutcome { features, clustering, pairs })
}

/// Pairs judged inefficient, as a dispatch prior.
pub fn inefficient_pairs(pairs: &[EfficiencyPair]) -> BTreeSet<(LocationClassId, TaskTypeId)> {
    pairs.iter().filter(|p| p.verdict == Verdict::Inefficient).map(|p| (p.class, p.task_type)).collect()
}

/// Pairs of `next` that are new or changed verdict since `prev`.
pub fn verdict_churn(prev: &[EfficiencyPair], next: &[EfficiencyPair]) -> usize {
    let before: BTreeMap<_, Verdict> = prev.iter().map(|p| ((p.class, p.task_type), p.verdict)).collect();
    next.iter().filter(|p| before.get(&(p.class, p.task_type)) != Some(&p.verdict)).count()
}
