//! RANSAC grouping of flow vectors into independently translating objects.
//!
//! A hypothesis (epipole and reference time to collision) is fitted to a
//! small sample of flows. Its consensus set holds every flow whose line
//! passes within `eps_dist` pixels of the epipole and whose time to collision
//! agrees with the reference. The largest consensus set is refitted, with the
//! median TTC of its members as the new reference, removed, and the search
//! repeats on the remaining flows. A final pass moves each flow to the
//! cluster it fits best. Clusters need at least three members, since any two
//! non-parallel lines intersect somewhere.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::epipole::{epipole_least_squares, Epipole, FlowVector};
use crate::error::{Error, Result};
use crate::ttc::{estimate_between, Tolerances};

/// TTC agreement threshold: `max(absolute, relative * |reference k|)` frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcTolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl TtcTolerance {
    pub fn fixed(frames: f64) -> Self {
        Self { absolute: frames, relative: 0.0 }
    }

    pub fn threshold(&self, reference_k: f64) -> f64 {
        self.absolute.max(self.relative * reference_k.abs())
    }
}

impl Default for TtcTolerance {
    fn default() -> Self {
        Self { absolute: 1.0, relative: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Largest point-line distance (pixels) for a flow to support an epipole.
    pub eps_dist: f64,
    pub ttc_tolerance: TtcTolerance,
    pub max_iterations: usize,
    pub sample_size: usize,
    pub min_cluster_size: usize,
    pub rng_seed: u64,
    pub tolerances: Tolerances,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            eps_dist: 2.0,
            ttc_tolerance: TtcTolerance::default(),
            max_iterations: 500,
            sample_size: 2,
            min_cluster_size: 3,
            rng_seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

impl ClusteringConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { rng_seed: seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.sample_size < 2 {
            return Err(Error::InvalidInput("sample size must be at least 2".into()));
        }
        if self.min_cluster_size < 3 {
            return Err(Error::InvalidInput("minimum cluster size must be at least 3".into()));
        }
        if !(self.eps_dist > 0.0) || !(self.ttc_tolerance.absolute > 0.0) || self.ttc_tolerance.relative < 0.0 {
            return Err(Error::InvalidInput("clustering thresholds must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionCluster {
    /// Indices into the input flows, ascending.
    pub members: Vec<usize>,
    pub epipole: Epipole,
    /// Per-member time to collision in frames, aligned with `members`.
    pub ttc_values: Vec<f64>,
    pub mean_ttc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<MotionCluster>,
    /// Indices of flows not assigned to any cluster, ascending.
    pub outliers: Vec<usize>,
}

/// Perpendicular distance from the epipole to the flow line, `|n . (e - p)|`.
pub fn line_epipole_distance(flow: &FlowVector, epipole: &Epipole) -> f64 {
    flow.signed_distance(epipole.position).abs()
}

/// Time to collision of a flow w.r.t. an epipole, in frames.
pub fn flow_ttc(flow: &FlowVector, epipole: &Epipole, intrinsics: &CameraIntrinsics, tol: &Tolerances) -> Option<f64> {
    estimate_between(flow.p(), flow.p_prime(), epipole.position, intrinsics, tol)
        .ok()
        .map(|e| e.k * f64::from(flow.frame_gap()))
        .filter(|k| k.is_finite())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Scored consensus set of one epipole hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub epipole: Epipole,
    /// Supporting flow indices, ascending.
    pub inliers: Vec<usize>,
    /// RMS point-line distance of the inliers.
    pub rms_distance: f64,
}

impl Hypothesis {
    fn better_than(&self, other: &Hypothesis) -> bool {
        self.inliers.len() > other.inliers.len()
            || (self.inliers.len() == other.inliers.len() && self.rms_distance < other.rms_distance)
    }
}

/// Consensus of `epipole` among the `active` flows: distance below
/// `eps_dist`, then TTC within tolerance of `reference_k`, or of the median
/// TTC of the close flows when no reference is given.
pub fn consensus(
    flows: &[FlowVector],
    active: &[usize],
    epipole: &Epipole,
    reference_k: Option<f64>,
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Hypothesis {
    let close: Vec<(usize, f64, f64)> = active
        .iter()
        .filter_map(|&i| {
            let d = line_epipole_distance(&flows[i], epipole);
            if d >= config.eps_dist {
                return None;
            }
            flow_ttc(&flows[i], epipole, intrinsics, &config.tolerances).map(|k| (i, d, k))
        })
        .collect();
    let empty = Hypothesis { epipole: *epipole, inliers: Vec::new(), rms_distance: f64::INFINITY };
    if close.is_empty() {
        return empty;
    }
    let reference = reference_k.unwrap_or_else(|| median(&mut close.iter().map(|c| c.2).collect::<Vec<_>>()));
    let limit = config.ttc_tolerance.threshold(reference);
    let kept: Vec<_> = close.into_iter().filter(|c| (c.2 - reference).abs() <= limit).collect();
    if kept.is_empty() {
        return empty;
    }
    let ss = kept.iter().map(|c| c.1 * c.1).sum::<f64>();
    Hypothesis {
        epipole: *epipole,
        inliers: kept.iter().map(|c| c.0).collect(),
        rms_distance: (ss / kept.len() as f64).sqrt(),
    }
}

/// Hypothesis of a minimal sample: least-squares epipole plus the median TTC
/// of the sampled flows. Samples whose flows disagree on TTC are rejected.
pub fn sample_hypothesis(
    sample: &[FlowVector],
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Option<(Epipole, f64)> {
    let epipole = epipole_least_squares(sample, &config.tolerances).ok()?;
    let mut ks =
        sample.iter().map(|f| flow_ttc(f, &epipole, intrinsics, &config.tolerances)).collect::<Option<Vec<f64>>>()?;
    let reference = median(&mut ks);
    let limit = config.ttc_tolerance.threshold(reference);
    ks.iter().all(|k| (k - reference).abs() <= limit).then_some((epipole, reference))
}

fn pair_count(n: usize) -> usize {
    n.saturating_mul(n.saturating_sub(1)) / 2
}

/// Best-scoring hypothesis over the `active` flows.
///
/// With sample size two and no more distinct pairs than `max_iterations`,
/// every pair is tried in lexicographic order; otherwise `max_iterations`
/// random samples are drawn from `rng`.
pub fn best_hypothesis(
    flows: &[FlowVector],
    active: &[usize],
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Hypothesis> {
    let mut best: Option<Hypothesis> = None;
    let mut consider = |sample: &[FlowVector]| {
        let Some((epipole, reference)) = sample_hypothesis(sample, intrinsics, config) else {
            return;
        };
        let h = consensus(flows, active, &epipole, Some(reference), intrinsics, config);
        if best.as_ref().is_none_or(|b| h.better_than(b)) {
            best = Some(h);
        }
    };

    if config.sample_size == 2 && pair_count(active.len()) <= config.max_iterations {
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                consider(&[flows[i], flows[j]]);
            }
        }
    } else if active.len() >= config.sample_size {
        for _ in 0..config.max_iterations {
            let picked: Vec<FlowVector> =
                sample(rng, active.len(), config.sample_size).iter().map(|s| flows[active[s]]).collect();
            consider(&picked);
        }
    }
    best
}

/// Refits the epipole on the consensus set until membership settles, then
/// trims members until every one satisfies the distance bound and lies within
/// the TTC tolerance of the cluster mean.
fn refine(
    flows: &[FlowVector],
    active: &[usize],
    start: Hypothesis,
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Option<MotionCluster> {
    let mut current = start;
    for _ in 0..10 {
        let subset: Vec<FlowVector> = current.inliers.iter().map(|&i| flows[i]).collect();
        let Ok(epipole) = epipole_least_squares(&subset, &config.tolerances) else {
            break;
        };
        let mut ks: Vec<f64> =
            subset.iter().filter_map(|f| flow_ttc(f, &epipole, intrinsics, &config.tolerances)).collect();
        if ks.is_empty() {
            break;
        }
        let next = consensus(flows, active, &epipole, Some(median(&mut ks)), intrinsics, config);
        if next.inliers.len() < config.min_cluster_size || next.inliers == current.inliers {
            if next.inliers == current.inliers {
                current = next;
            }
            break;
        }
        current = next;
    }

    settle(flows, &current.inliers, current.epipole, intrinsics, config)
}

/// Drops members of a candidate cluster until every one satisfies the
/// distance bound and lies within the TTC tolerance of the cluster mean.
fn settle(
    flows: &[FlowVector],
    candidates: &[usize],
    epipole: Epipole,
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Option<MotionCluster> {
    let mut members: Vec<(usize, f64)> = candidates
        .iter()
        .filter(|&&i| line_epipole_distance(&flows[i], &epipole) < config.eps_dist)
        .filter_map(|&i| flow_ttc(&flows[i], &epipole, intrinsics, &config.tolerances).map(|k| (i, k)))
        .collect();
    loop {
        if members.len() < config.min_cluster_size {
            return None;
        }
        let mean = members.iter().map(|m| m.1).sum::<f64>() / members.len() as f64;
        let limit = config.ttc_tolerance.threshold(mean);
        let (worst, dev) =
            members.iter().enumerate().map(|(idx, m)| (idx, (m.1 - mean).abs())).max_by(|a, b| a.1.total_cmp(&b.1))?;
        if dev <= limit {
            let n = members.len() as f64;
            let ss: f64 = members.iter().map(|m| line_epipole_distance(&flows[m.0], &epipole).powi(2)).sum();
            let epipole = Epipole { residual: (ss / n).sqrt(), ..epipole };
            return Some(MotionCluster {
                members: members.iter().map(|m| m.0).collect(),
                ttc_values: members.iter().map(|m| m.1).collect(),
                mean_ttc: mean,
                epipole,
            });
        }
        members.remove(worst);
    }
}

/// Moves every flow to the cluster it fits best (closest epipole among the
/// clusters whose constraints it satisfies), then refits. Greedy extraction
/// can hand a flow to an earlier, wrong cluster or leave it out entirely.
fn reassign(
    flows: &[FlowVector],
    clusters: Vec<MotionCluster>,
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Vec<MotionCluster> {
    let mut current = clusters;
    for _ in 0..10 {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); current.len()];
        for (i, flow) in flows.iter().enumerate() {
            let best = current
                .iter()
                .enumerate()
                .filter_map(|(c, cluster)| {
                    let d = line_epipole_distance(flow, &cluster.epipole);
                    let k = flow_ttc(flow, &cluster.epipole, intrinsics, &config.tolerances)?;
                    let fits = d < config.eps_dist
                        && (k - cluster.mean_ttc).abs() <= config.ttc_tolerance.threshold(cluster.mean_ttc);
                    fits.then_some((c, d))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((c, _)) = best {
                groups[c].push(i);
            }
        }
        let next: Vec<MotionCluster> = groups
            .iter()
            .zip(&current)
            .filter_map(|(members, old)| {
                let subset: Vec<FlowVector> = members.iter().map(|&i| flows[i]).collect();
                let epipole = epipole_least_squares(&subset, &config.tolerances).unwrap_or(old.epipole);
                settle(flows, members, epipole, intrinsics, config)
            })
            .collect();
        if next.len() == current.len() && next.iter().zip(&current).all(|(a, b)| a.members == b.members) {
            return next;
        }
        current = next;
    }
    current
}

/// Segments flows into clusters of common epipole and consistent TTC.
/// Deterministic for a given `config.rng_seed`.
pub fn cluster_flows(
    flows: &[FlowVector],
    intrinsics: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Result<Clustering> {
    config.validate()?;
    if flows.len() < config.min_cluster_size {
        return Err(Error::InsufficientData { needed: config.min_cluster_size, got: flows.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut active: Vec<usize> = (0..flows.len()).collect();
    let mut clusters = Vec::new();

    while active.len() >= config.min_cluster_size {
        let Some(best) = best_hypothesis(flows, &active, intrinsics, config, &mut rng) else {
            break;
        };
        if best.inliers.len() < config.min_cluster_size {
            break;
        }
        let Some(cluster) = refine(flows, &active, best, intrinsics, config) else {
            break;
        };
        active.retain(|i| !cluster.members.contains(i));
        clusters.push(cluster);
    }

    let clusters = reassign(flows, clusters, intrinsics, config);
    let outliers = (0..flows.len()).filter(|i| !clusters.iter().any(|c| c.members.contains(i))).collect();
    Ok(Clustering { clusters, outliers })
}
