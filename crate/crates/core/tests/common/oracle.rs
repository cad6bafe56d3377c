//! Independent clustering oracles: pairwise line intersections scored by
//! exhaustive enumeration, plus membership checks against simulator labels.
#![allow(dead_code)]

use std::collections::BTreeSet;

use collision_plane::simulator::Simulation;
use collision_plane::{CameraIntrinsics, Clustering, ClusteringConfig, FlowVector};
use nalgebra::{Matrix2, Vector2, Vector3};

pub fn flows(sim: &Simulation) -> Vec<FlowVector> {
    sim.tracks.iter().map(|t| FlowVector::fitted(t).unwrap()).collect()
}

/// Object id of every flow, in flow order.
pub fn labels(sim: &Simulation) -> Vec<u32> {
    sim.tracks.iter().map(|t| sim.truth.get(t.track_id()).unwrap().object_id).collect()
}

pub fn exact_membership(out: &Clustering, labels: &[u32]) -> bool {
    let truth: BTreeSet<BTreeSet<usize>> = labels
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|id| (0..labels.len()).filter(|&i| labels[i] == *id).collect())
        .collect();
    let found: BTreeSet<BTreeSet<usize>> = out.clusters.iter().map(|c| c.members.iter().copied().collect()).collect();
    out.outliers.is_empty() && found == truth
}

/// Intersection of the two flow lines by Cramer's rule.
pub fn intersect(a: &FlowVector, b: &FlowVector) -> Option<Vector2<f64>> {
    let m = Matrix2::new(a.t().y, -a.t().x, b.t().y, -b.t().x);
    let rhs = Vector2::new(a.t().y * a.p().u - a.t().x * a.p().v, b.t().y * b.p().u - b.t().x * b.p().v);
    m.try_inverse().map(|inv| inv * rhs)
}

/// Frames to collision from the angles between the epipole ray and the two point rays.
pub fn oracle_ttc(f: &FlowVector, e: Vector2<f64>, intr: &CameraIntrinsics) -> f64 {
    let c = intr.principal_point();
    let ray = |u: f64, v: f64| Vector3::new(u - c.u, v - c.v, intr.focal_px());
    let re = ray(e.x, e.y);
    let signed_tan = |u: f64, v: f64| {
        let r = ray(u, v);
        let t = re.cross(&r).norm() / re.dot(&r);
        let along = (Vector2::new(u, v) - e).dot(&f.t());
        if along < 0.0 {
            -t
        } else {
            t
        }
    };
    let ta = signed_tan(f.p().u, f.p().v);
    let tb = signed_tan(f.p_prime().u, f.p_prime().v);
    tb / (tb - ta) * f64::from(f.frame_gap())
}

/// Largest consensus set over every pair hypothesis, scored as the library
/// scores: inlier count, then lower RMS distance.
pub fn brute_force(
    flows: &[FlowVector],
    intr: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Option<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let sin_min = config.tolerances.eps_parallel.radians().sin();
    for i in 0..flows.len() {
        for j in i + 1..flows.len() {
            let (a, b) = (flows[i].direction(), flows[j].direction());
            if (a.x * b.y - a.y * b.x).abs() < sin_min {
                continue;
            }
            let Some(e) = intersect(&flows[i], &flows[j]) else { continue };
            let (ki, kj) = (oracle_ttc(&flows[i], e, intr), oracle_ttc(&flows[j], e, intr));
            let reference = 0.5 * (ki + kj);
            let limit = config.ttc_tolerance.threshold(reference);
            if (ki - reference).abs() > limit || (kj - reference).abs() > limit {
                continue;
            }
            let mut inliers = Vec::new();
            let mut ss = 0.0;
            for (n, f) in flows.iter().enumerate() {
                let normal = Vector2::new(-f.t().y, f.t().x).normalize();
                let d = normal.dot(&(e - Vector2::new(f.p().u, f.p().v))).abs();
                if d < config.eps_dist && (oracle_ttc(f, e, intr) - reference).abs() <= limit {
                    inliers.push(n);
                    ss += d * d;
                }
            }
            let rms = (ss / inliers.len().max(1) as f64).sqrt();
            let better = best
                .as_ref()
                .is_none_or(|(bi, br)| inliers.len() > bi.len() || (inliers.len() == bi.len() && rms < *br));
            if better {
                best = Some((inliers, rms));
            }
        }
    }
    best
}
