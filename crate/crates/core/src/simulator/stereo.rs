//! Binocular stereo error propagation versus the collision-plane estimate of
//! motion direction, for a point approaching on the ground plane.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::plane_truth;
use crate::camera::{Angle, CameraIntrinsics, PixelPoint};
use crate::epipole::{planar_epipole, FlowVector, HorizonLine};
use crate::error::{Error, Result};
use crate::ttc::{estimate_between, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoErrorModel {
    pub baseline_m: f64,
    pub focal_px: f64,
    pub detection_error_px: f64,
}

impl StereoErrorModel {
    fn validate(&self) -> Result<()> {
        if !(self.baseline_m > 0.0 && self.focal_px > 0.0 && self.detection_error_px >= 0.0) {
            return Err(Error::InvalidInput("stereo model needs B > 0, f > 0 and detection error >= 0".into()));
        }
        Ok(())
    }
}

/// First-order depth error of a disparity error `dp` at depth `z`:
/// `dZ = Z^2 dp / (B f)`, from `Z = B f / d`.
pub fn stereo_depth_error(model: &StereoErrorModel, z: f64) -> Result<f64> {
    model.validate()?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidInput(format!("depth must be positive, got {z}")));
    }
    Ok(z * z * model.detection_error_px / (model.baseline_m * model.focal_px))
}

/// Monte-Carlo comparison of heading errors at a range of depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub stereo: StereoErrorModel,
    pub speed_kmh: f64,
    /// Angle between the motion direction and the optical axis, in the ground plane.
    pub heading_deg: f64,
    pub frame_rate_hz: f64,
    /// Vertical distance of the tracked point from the camera's horizontal plane.
    pub point_height_m: f64,
    pub lateral_offset_m: f64,
    /// Frames between the two observations of each trial.
    pub frame_gap: u32,
    pub depths_m: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepParams {
    /// 15 cm baseline, 0.2 px detection error, 50 km/h at 45 degrees, 12 Hz.
    pub fn highway_approach(focal_px: f64) -> Self {
        Self {
            stereo: StereoErrorModel { baseline_m: 0.15, focal_px, detection_error_px: 0.2 },
            speed_kmh: 50.0,
            heading_deg: 45.0,
            frame_rate_hz: 12.0,
            point_height_m: 1.5,
            lateral_offset_m: 0.0,
            frame_gap: 6,
            depths_m: (1..=20).map(|i| 10.0 * f64::from(i)).collect(),
            trials: 400,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.stereo.validate()?;
        if !(self.speed_kmh > 0.0 && self.frame_rate_hz > 0.0) {
            return Err(Error::InvalidInput("speed and frame rate must be positive".into()));
        }
        if self.frame_gap == 0 || self.trials == 0 {
            return Err(Error::InvalidInput("frame gap and trial count must be positive".into()));
        }
        if self.depths_m.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::InvalidInput("depths must be positive".into()));
        }
        Ok(())
    }

    /// Relative displacement per frame.
    pub fn velocity(&self) -> Vector3<f64> {
        let per_frame = self.speed_kmh / 3.6 / self.frame_rate_hz;
        let h = self.heading_deg.to_radians();
        Vector3::new(h.sin(), 0.0, -h.cos()) * per_frame
    }
}

/// One depth of the sweep. Errors are medians over non-degenerate trials,
/// `None` when every trial was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub z: f64,
    pub stereo_depth_error: f64,
    pub stereo_heading_error_deg: Option<f64>,
    pub plane_heading_error_deg: Option<f64>,
    pub ttc_error_frames: Option<f64>,
    pub degenerate_trials: usize,
}

fn heading_of(v: &Vector3<f64>) -> f64 {
    v.x.atan2(-v.z)
}

fn wrapped(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    r.abs()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

struct Trial {
    stereo: Option<f64>,
    plane: Option<(f64, f64)>,
}

/// Per-row table of stereo versus collision-plane heading errors.
///
/// Each trial perturbs the left and right detections of the point at two
/// instants `frame_gap` frames apart with Gaussian noise of standard deviation
/// `detection_error_px`. Stereo triangulates both positions and takes the
/// heading of their difference. The collision-plane route intersects the
/// left-image flow line with the level horizon and reads the heading off the
/// epipole; its TTC error is measured against the analytic truth.
pub fn orientation_error_sweep(params: &SweepParams) -> Result<Vec<SweepRow>> {
    params.validate()?;
    let f = params.stereo.focal_px;
    let b = params.stereo.baseline_m;
    let dp = params.stereo.detection_error_px;
    let intr = CameraIntrinsics::off_center(f, PixelPoint::new(0.0, 0.0), (1, 1))?;
    let horizon = HorizonLine::level(0.0);
    // Distant points flow almost along the horizon; keep their intersections.
    let tol = Tolerances { eps_parallel: Angle::from_radians(1e-9), ..Tolerances::default() };
    let velocity = params.velocity();
    let gap = f64::from(params.frame_gap);
    let true_heading = heading_of(&velocity);
    let noise = Normal::new(0.0, dp).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut rows = Vec::with_capacity(params.depths_m.len());
    for (row, &z) in params.depths_m.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let p0 = Vector3::new(params.lateral_offset_m, params.point_height_m, z);
        let p1 = p0 + velocity * gap;
        let truth_k = plane_truth(&p0, &velocity).map(|t| t.k);

        let mut trials = Vec::with_capacity(params.trials);
        for _ in 0..params.trials {
            let mut jitter = || if dp > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            // Left camera at the origin, right camera at (B, 0, 0).
            let observe = |p: &Vector3<f64>, j: [f64; 3]| {
                let ul = f * p.x / p.z + j[0];
                let ur = f * (p.x - b) / p.z + j[1];
                let vl = f * p.y / p.z + j[2];
                (ul, ur, vl)
            };
            let o0 = observe(&p0, [jitter(), jitter(), jitter()]);
            let o1 = observe(&p1, [jitter(), jitter(), jitter()]);

            let triangulate = |(ul, ur, vl): (f64, f64, f64)| {
                let d = ul - ur;
                (d > 0.0).then(|| {
                    let zz = f * b / d;
                    Vector3::new(ul * zz / f, vl * zz / f, zz)
                })
            };
            let stereo = match (triangulate(o0), triangulate(o1)) {
                (Some(a), Some(c)) => Some(wrapped(heading_of(&(c - a)) - true_heading)),
                _ => None,
            };

            let l0 = PixelPoint::new(o0.0, o0.2);
            let l1 = PixelPoint::new(o1.0, o1.2);
            let plane = FlowVector::with_gap(l0, l1, params.frame_gap).ok().and_then(|flow| {
                let e = planar_epipole(&flow, &horizon, &tol).ok()?.position;
                let ray = intr.ray(e);
                // Moving away from the epipole: the motion points opposite the epipole ray.
                let away = l1.distance(&e) > l0.distance(&e);
                let dir = if away { -ray } else { ray };
                let heading_err = wrapped(heading_of(&dir) - true_heading);
                let k = estimate_between(l0, l1, e, &intr, &tol).ok()?.k * gap;
                let ttc_err = truth_k.map_or(f64::NAN, |t| (k - t).abs());
                Some((heading_err, ttc_err))
            });
            trials.push(Trial { stereo, plane });
        }

        let degenerate_trials = trials.iter().filter(|t| t.stereo.is_none() || t.plane.is_none()).count();
        rows.push(SweepRow {
            z,
            stereo_depth_error: stereo_depth_error(&params.stereo, z)?,
            stereo_heading_error_deg: median(trials.iter().filter_map(|t| t.stereo).collect()).map(f64::to_degrees),
            plane_heading_error_deg: median(trials.iter().filter_map(|t| t.plane.map(|p| p.0)).collect())
                .map(f64::to_degrees),
            ttc_error_frames: median(
                trials.iter().filter_map(|t| t.plane.map(|p| p.1)).filter(|e| e.is_finite()).collect(),
            ),
            degenerate_trials,
        });
    }
    Ok(rows)
}
