//! Synthetic constant-velocity scenes with analytic collision-plane truth.
//!
//! The camera is held fixed and every point moves with its relative velocity
//! `v_g = v_object - v_camera`. For a point starting at `P0` the analytic
//! truth is
//!
//! * epipole: image of the direction `v_g`,
//! * `k = -(P0 . v_g) / |v_g|^2` frames until the collision plane reaches the focal point,
//! * `H = |P0 x v_g| / |v_g|^2`, the miss distance in per-frame displacements.

mod collision_map;
mod stereo;

pub use collision_map::{collision_map, CollisionCell, CollisionMap, GridAxis, GridSpec};
pub use stereo::{orientation_error_sweep, stereo_depth_error, StereoErrorModel, SweepParams, SweepRow};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraIntrinsics, PixelPoint, ScenePoint};
use crate::error::{Error, Result};
use crate::ttc::{MotionClass, TrackObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    #[serde(deserialize_with = "points_in_front")]
    pub points: Vec<ScenePoint>,
    /// Displacement per frame in the camera frame.
    pub velocity: [f64; 3],
}

// Field-level checks run inside the JSON parser, so their errors carry a position.
fn points_in_front<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<ScenePoint>, D::Error> {
    let points = Vec::<ScenePoint>::deserialize(d)?;
    if let Some(p) = points.iter().find(|p| !(p.z > 0.0)) {
        return Err(serde::de::Error::custom(format!("points: Z must be positive, got {}", p.z)));
    }
    Ok(points)
}

fn frame_count_at_least_two<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<usize, D::Error> {
    let n = usize::deserialize(d)?;
    if n < 2 {
        return Err(serde::de::Error::custom(format!("frame_count must be at least 2, got {n}")));
    }
    Ok(n)
}

fn nonnegative_sigma<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let s = f64::deserialize(d)?;
    if !(s >= 0.0) {
        return Err(serde::de::Error::custom(format!("pixel_noise_sigma must be nonnegative, got {s}")));
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    pub intrinsics: CameraIntrinsics,
    pub objects: Vec<SceneObject>,
    /// Camera displacement per frame.
    pub camera_velocity: [f64; 3],
    pub frame_count: usize,
    #[serde(default)]
    pub pixel_noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Deserialize)]
struct RawScenario {
    intrinsics: CameraIntrinsics,
    objects: Vec<SceneObject>,
    camera_velocity: [f64; 3],
    #[serde(deserialize_with = "frame_count_at_least_two")]
    frame_count: usize,
    #[serde(default, deserialize_with = "nonnegative_sigma")]
    pixel_noise_sigma: f64,
    #[serde(default)]
    rng_seed: u64,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(r: RawScenario) -> Result<Self> {
        let s = Scenario {
            intrinsics: r.intrinsics,
            objects: r.objects,
            camera_velocity: r.camera_velocity,
            frame_count: r.frame_count,
            pixel_noise_sigma: r.pixel_noise_sigma,
            rng_seed: r.rng_seed,
        };
        s.validate()?;
        Ok(s)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(Error::InvalidInput(format!("frame_count must be at least 2, got {}", self.frame_count)));
        }
        if !(self.pixel_noise_sigma >= 0.0 && self.pixel_noise_sigma.is_finite()) {
            return Err(Error::InvalidInput("pixel_noise_sigma must be a finite nonnegative number".into()));
        }
        let finite = |v: &[f64; 3]| v.iter().all(|c| c.is_finite());
        if !finite(&self.camera_velocity) {
            return Err(Error::InvalidInput("camera_velocity must be finite".into()));
        }
        for obj in &self.objects {
            if !finite(&obj.velocity) {
                return Err(Error::InvalidInput(format!("object {}: velocity must be finite", obj.id)));
            }
            for p in &obj.points {
                if !(p.x.is_finite() && p.y.is_finite() && p.z > 0.0 && p.z.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "object {}: point ({}, {}, {}) must be finite with Z > 0",
                        obj.id, p.x, p.y, p.z
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same scene with the camera moving `delta` faster.
    pub fn with_camera_delta(&self, delta: [f64; 3]) -> Scenario {
        let mut s = self.clone();
        for (c, d) in s.camera_velocity.iter_mut().zip(delta) {
            *c += d;
        }
        s
    }

    pub fn point_count(&self) -> usize {
        self.objects.iter().map(|o| o.points.len()).sum()
    }
}

/// Analytic collision-plane quantities of one point at frame 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneTruth {
    pub k: f64,
    pub h: f64,
    /// Metric miss distance `h * |v_g|`.
    pub miss_distance: f64,
}

/// `None` when the relative velocity vanishes.
pub fn plane_truth(start: &Vector3<f64>, relative_velocity: &Vector3<f64>) -> Option<PlaneTruth> {
    let speed_sq = relative_velocity.norm_squared();
    if !(speed_sq > 0.0) {
        return None;
    }
    let k = -start.dot(relative_velocity) / speed_sq;
    let miss_distance = start.cross(relative_velocity).norm() / speed_sq.sqrt();
    Some(PlaneTruth { k, h: miss_distance / speed_sq.sqrt(), miss_distance })
}

/// Ground truth for one simulated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTruth {
    pub track_id: u32,
    pub object_id: u32,
    pub relative_velocity: [f64; 3],
    /// `None` for zero relative velocity or motion parallel to the image plane.
    pub epipole: Option<PixelPoint>,
    /// Collision time counted from frame 0; `k(t) = k - t`.
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub miss_distance: Option<f64>,
    pub label: MotionClass,
    /// Frames before the point left the `Z > 0` half-space.
    pub valid_frames: usize,
    pub truncated: bool,
}

impl PointTruth {
    pub fn k_at(&self, frame: usize) -> Option<f64> {
        self.k.map(|k| k - frame as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub points: Vec<PointTruth>,
}

impl GroundTruth {
    pub fn get(&self, track_id: u32) -> Option<&PointTruth> {
        self.points.iter().find(|p| p.track_id == track_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Tracks with at least two valid frames, ordered by track id.
    pub tracks: Vec<TrackObservation>,
    pub truth: GroundTruth,
}

impl Simulation {
    pub fn track(&self, track_id: u32) -> Option<&TrackObservation> {
        self.tracks.iter().find(|t| t.track_id() == track_id)
    }
}

/// Projects every point over `frame_count` frames. Track ids enumerate points
/// object by object in scenario order.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    scenario.validate()?;
    let intr = &scenario.intrinsics;
    let camera = Vector3::from(scenario.camera_velocity);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let noise = (scenario.pixel_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, scenario.pixel_noise_sigma))
        .transpose()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut tracks = Vec::new();
    let mut truth = Vec::new();
    let mut track_id = 0u32;
    for obj in &scenario.objects {
        let v_g = Vector3::from(obj.velocity) - camera;
        for start in &obj.points {
            let p0 = start.to_vector();
            let mut positions = Vec::with_capacity(scenario.frame_count);
            for t in 0..scenario.frame_count {
                let p = ScenePoint::from_vector(p0 + v_g * t as f64);
                let Ok(mut px) = project(&p, intr) else {
                    break;
                };
                if let Some(n) = &noise {
                    px.u += n.sample(&mut rng);
                    px.v += n.sample(&mut rng);
                }
                positions.push(px);
            }
            let valid_frames = positions.len();

            let plane = plane_truth(&p0, &v_g);
            let label = match plane {
                None => MotionClass::ConstantBearing,
                Some(_) if p0.cross(&v_g).norm() <= 1e-12 * p0.norm() * v_g.norm() => MotionClass::ConstantBearing,
                Some(pt) if pt.k > 0.0 => MotionClass::Approaching,
                Some(_) => MotionClass::Receding,
            };
            truth.push(PointTruth {
                track_id,
                object_id: obj.id,
                relative_velocity: v_g.into(),
                epipole: plane.and_then(|_| intr.project_direction(&v_g)),
                k: plane.map(|p| p.k),
                h: plane.map(|p| p.h),
                miss_distance: plane.map(|p| p.miss_distance),
                label,
                valid_frames,
                truncated: valid_frames < scenario.frame_count,
            });
            if valid_frames >= 2 {
                tracks.push(TrackObservation::from_positions(track_id, 0, positions)?);
            }
            track_id += 1;
        }
    }
    Ok(Simulation { tracks, truth: GroundTruth { points: truth } })
}
