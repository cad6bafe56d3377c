//! Time to collision and collision-plane decomposition for one tracked point.
//!
//! Given the epipole of a point's relative motion, the angles `alpha` and
//! `beta` between the epipole ray and the point's rays in two consecutive
//! frames satisfy `tan(alpha) = H / k` and `tan(beta) = H / (k - 1)`, which
//! yields `k = tan(beta) / (tan(beta) - tan(alpha))`. `k` is counted from the
//! first frame of the pair.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{ray_angle, Angle, CameraIntrinsics, PixelPoint};
use crate::error::{Error, Result};

/// Numerical thresholds used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Smallest `|tan(beta) - tan(alpha)|` that still yields a finite TTC.
    pub eps_tan: f64,
    /// Pixel motion below which a point counts as constant bearing.
    pub eps_px: f64,
    /// Smallest angle between two image lines for their intersection to be used.
    pub eps_parallel: Angle,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eps_tan: 1e-12, eps_px: 0.05, eps_parallel: Angle::from_degrees(0.5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionClass {
    Approaching,
    Receding,
    ConstantBearing,
}

impl MotionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionClass::Approaching => "approaching",
            MotionClass::Receding => "receding",
            MotionClass::ConstantBearing => "constant_bearing",
        }
    }
}

/// Pixel observations of one point in consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackObservation {
    track_id: u32,
    first_frame: i64,
    positions: Vec<PixelPoint>,
}

impl TrackObservation {
    /// Builds a track from `(frame, position)` pairs. Frames must increase by
    /// exactly one; constant-velocity reasoning needs uniform sampling.
    pub fn new(track_id: u32, frames: Vec<(i64, PixelPoint)>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: frames.len() });
        }
        for w in frames.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::InvalidInput(format!(
                    "track {track_id}: frame {} follows frame {}; frames must be consecutive",
                    w[1].0, w[0].0
                )));
            }
        }
        if frames.iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("track {track_id}: non-finite pixel position")));
        }
        let first_frame = frames[0].0;
        Ok(Self { track_id, first_frame, positions: frames.into_iter().map(|(_, p)| p).collect() })
    }

    pub fn from_positions(track_id: u32, first_frame: i64, positions: Vec<PixelPoint>) -> Result<Self> {
        let frames = positions.into_iter().enumerate().map(|(i, p)| (first_frame + i as i64, p)).collect();
        Self::new(track_id, frames)
    }

    pub fn track_id(&self) -> u32 {
        self.track_id
    }

    pub fn first_frame(&self) -> i64 {
        self.first_frame
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[PixelPoint] {
        &self.positions
    }

    pub fn frames(&self) -> impl Iterator<Item = (i64, PixelPoint)> + '_ {
        self.positions.iter().enumerate().map(|(i, p)| (self.first_frame + i as i64, *p))
    }

    /// Same observations played backwards in time.
    pub fn reversed(&self) -> Self {
        let mut positions = self.positions.clone();
        positions.reverse();
        Self { positions, ..self.clone() }
    }

    /// Sub-track of `len` frames starting at offset `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len < 2 || start + len > self.positions.len() {
            return Err(Error::InsufficientData { needed: start + len.max(2), got: self.positions.len() });
        }
        Ok(Self {
            track_id: self.track_id,
            first_frame: self.first_frame + start as i64,
            positions: self.positions[start..start + len].to_vec(),
        })
    }
}

/// Collision-plane description of a tracked point.
///
/// `k` counts frames from the first observation until the collision plane
/// sweeps through the focal point (negative once it has passed). `h` is the
/// miss distance in units of the per-frame relative displacement. The
/// reconstructed position is `k * v_g_dir + h * v_h_dir`, i.e. the scene point
/// scaled by `1 / |v_g|` for points approaching in depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEstimate {
    pub k: f64,
    pub h: f64,
    pub v_g_dir: Vector3<f64>,
    pub v_h_dir: Vector3<f64>,
    pub reconstructed: Vector3<f64>,
    pub alpha: Angle,
    pub beta: Angle,
}

impl CollisionEstimate {
    /// Rescales an estimate computed over a `gap`-frame pair to single frames.
    pub fn per_frame(mut self, gap: u32) -> Self {
        let g = f64::from(gap);
        self.k *= g;
        self.h *= g;
        self.reconstructed *= g;
        self
    }
}

pub fn ttc_from_angles(alpha: Angle, beta: Angle, eps_tan: f64) -> Result<f64> {
    let (ta, tb) = (alpha.tan(), beta.tan());
    let denom = tb - ta;
    if !(denom.abs() >= eps_tan) {
        return Err(Error::StationaryPoint);
    }
    Ok(tb / denom)
}

/// Collision estimate from the first two frames of `track`.
pub fn collision_estimate(
    track: &TrackObservation,
    epipole: PixelPoint,
    intrinsics: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<CollisionEstimate> {
    let p = track.positions();
    estimate_between(p[0], p[1], epipole, intrinsics, tol)
}

/// Collision estimate from a point observed at `a` and one frame later at `b`.
///
/// `alpha` and `beta` are the angles between the epipole ray and the two
/// point rays, signed by the side of the epipole each point lies on along the
/// flow direction.
pub fn estimate_between(
    a: PixelPoint,
    b: PixelPoint,
    epipole: PixelPoint,
    intrinsics: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<CollisionEstimate> {
    if !(a.is_finite() && b.is_finite() && epipole.is_finite()) {
        return Err(Error::InvalidInput("non-finite pixel position".into()));
    }
    let flow = b.to_vector() - a.to_vector();
    let scale = 1e-12 * (1.0 + a.u.abs().max(a.v.abs()));
    if flow.norm() <= scale {
        return Err(Error::StationaryPoint);
    }
    let scale = 1e-9 * (1.0 + a.u.abs().max(a.v.abs()));
    if epipole.distance(&a) <= scale || epipole.distance(&b) <= scale {
        return Err(Error::DegenerateGeometry("epipole coincides with a track point"));
    }

    let e = epipole.to_vector();
    let side = |p: PixelPoint| if (p.to_vector() - e).dot(&flow) < 0.0 { -1.0 } else { 1.0 };
    let alpha = Angle::from_radians(side(a) * ray_angle(epipole, a, intrinsics).radians());
    let beta = Angle::from_radians(side(b) * ray_angle(epipole, b, intrinsics).radians());
    let k = ttc_from_angles(alpha, beta, tol.eps_tan)?;
    let h = (k * alpha.tan()).abs();

    let v_g_dir = intrinsics.ray(epipole).normalize();
    let ray = intrinsics.ray(a);
    let lateral = v_g_dir.cross(&ray).cross(&v_g_dir);
    let v_h_dir = lateral.normalize();
    let reconstructed = v_g_dir * k + v_h_dir * h;

    Ok(CollisionEstimate { k, h, v_g_dir, v_h_dir, reconstructed, alpha, beta })
}

/// Approaching if the point moves away from the epipole by more than
/// `eps_px` between the first and last frame, receding if it moves towards it.
pub fn classify_motion(track: &TrackObservation, epipole: PixelPoint, eps_px: f64) -> MotionClass {
    let p = track.positions();
    let first = p[0].distance(&epipole);
    let last = p[p.len() - 1].distance(&epipole);
    let change = last - first;
    if change > eps_px {
        MotionClass::Approaching
    } else if change < -eps_px {
        MotionClass::Receding
    } else {
        MotionClass::ConstantBearing
    }
}

/// `k(0,1) - k(1,2)` over the first three frames. Equals one for a constant
/// velocity track measured against its true epipole.
pub fn ttc_three_frame_consistency(
    track: &TrackObservation,
    epipole: PixelPoint,
    intrinsics: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<f64> {
    let p = track.positions();
    if p.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: p.len() });
    }
    let k01 = estimate_between(p[0], p[1], epipole, intrinsics, tol)?.k;
    let k12 = estimate_between(p[1], p[2], epipole, intrinsics, tol)?.k;
    Ok(k01 - k12)
}
