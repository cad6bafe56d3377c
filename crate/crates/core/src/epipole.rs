//! Epipole estimation for translational relative motion.
//!
//! Four routes are provided:
//! * [`planar_epipole`]: intersect one flow line with a known horizon line
//!   (motion confined to the ground plane);
//! * [`epipole_least_squares`]: common intersection of the flow lines of
//!   several points sharing one translation;
//! * [`epipole_offset_three_frames`]: arbitrary translation of a single point
//!   tracked over three frames, as an angular correction to the horizon
//!   intersection;
//! * [`calibrate_horizon`]: horizon line through epipoles of several planar
//!   motions.
//!
//! None of them handle rotation between frames; flow lines of a rotating
//! object do not share an intersection. The planar route is applied as-is
//! to rotating objects on the ground plane, without a guarantee.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::camera::{Angle, CameraIntrinsics, PixelPoint, ViewingLine};
use crate::error::{Error, Result};
use crate::ttc::{ttc_three_frame_consistency, Tolerances, TrackObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpipoleMethod {
    HorizonIntersection,
    LeastSquares,
    ThreeFrameOffset,
    /// Supplied by the caller or by ground truth.
    Given,
}

impl EpipoleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EpipoleMethod::HorizonIntersection => "horizon_intersection",
            EpipoleMethod::LeastSquares => "least_squares",
            EpipoleMethod::ThreeFrameOffset => "three_frame_offset",
            EpipoleMethod::Given => "given",
        }
    }
}

/// Image of the relative translation direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epipole {
    pub position: PixelPoint,
    pub method: EpipoleMethod,
    /// Method-specific fit residual in pixels (frames for the three-frame route).
    pub residual: f64,
}

impl Epipole {
    pub fn at(position: PixelPoint) -> Self {
        Self { position, method: EpipoleMethod::Given, residual: 0.0 }
    }
}

/// Displacement of one tracked point between two images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    p: PixelPoint,
    p_prime: PixelPoint,
    t: Vector2<f64>,
    n: Vector2<f64>,
    frame_gap: u32,
}

impl FlowVector {
    pub fn new(p: PixelPoint, p_prime: PixelPoint) -> Result<Self> {
        Self::with_gap(p, p_prime, 1)
    }

    /// Flow between observations `frame_gap` frames apart.
    pub fn with_gap(p: PixelPoint, p_prime: PixelPoint, frame_gap: u32) -> Result<Self> {
        if !(p.is_finite() && p_prime.is_finite()) {
            return Err(Error::InvalidInput("flow endpoints must be finite".into()));
        }
        if frame_gap == 0 {
            return Err(Error::InvalidInput("frame gap must be at least one".into()));
        }
        let t = p_prime.to_vector() - p.to_vector();
        let len = t.norm();
        if len == 0.0 {
            return Err(Error::DegenerateFlow);
        }
        let n = Vector2::new(-t.y, t.x) / len;
        Ok(Self { p, p_prime, t, n, frame_gap })
    }

    /// Flow between the first and last observation of a track.
    pub fn from_track(track: &TrackObservation) -> Result<Self> {
        let p = track.positions();
        Self::with_gap(p[0], p[p.len() - 1], (p.len() - 1) as u32)
    }

    /// Flow along the total-least-squares line through every observation of
    /// a track, from the first to the last position projected onto that line.
    /// Under constant velocity the track is a straight image line, so noise on
    /// the line direction shrinks with track length.
    pub fn fitted(track: &TrackObservation) -> Result<Self> {
        let p = track.positions();
        let pts: Vec<Vector2<f64>> = p.iter().map(|q| q.to_vector()).collect();
        let (mean, dir) = principal_line(&pts).ok_or(Error::DegenerateFlow)?;
        let on_line = |q: &Vector2<f64>| PixelPoint::from_vector(mean + dir * dir.dot(&(q - mean)));
        Self::with_gap(on_line(&pts[0]), on_line(&pts[pts.len() - 1]), (p.len() - 1) as u32)
    }

    pub fn p(&self) -> PixelPoint {
        self.p
    }

    pub fn p_prime(&self) -> PixelPoint {
        self.p_prime
    }

    pub fn t(&self) -> Vector2<f64> {
        self.t
    }

    /// Unit normal `(-t_y, t_x) / |t|`.
    pub fn normal(&self) -> Vector2<f64> {
        self.n
    }

    pub fn frame_gap(&self) -> u32 {
        self.frame_gap
    }

    pub fn direction(&self) -> Vector2<f64> {
        self.t / self.t.norm()
    }

    /// Signed distance `n . (q - p)` of `q` from the flow line.
    pub fn signed_distance(&self, q: PixelPoint) -> f64 {
        self.n.dot(&(q.to_vector() - self.p.to_vector()))
    }
}

/// An image line, typically the horizon `v = a u + b` of the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonLine {
    point: PixelPoint,
    direction: [f64; 2],
    /// RMS perpendicular distance of the points the line was fitted to.
    pub residual: f64,
}

impl HorizonLine {
    pub fn new(point: PixelPoint, direction: Vector2<f64>) -> Result<Self> {
        let norm = direction.norm();
        if !(point.is_finite() && norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("horizon needs a finite point and nonzero direction".into()));
        }
        let mut d = direction / norm;
        if d.x < 0.0 || (d.x == 0.0 && d.y < 0.0) {
            d = -d;
        }
        Ok(Self { point, direction: [d.x, d.y], residual: 0.0 })
    }

    /// The image row `v = v0`, horizon of a level camera.
    pub fn level(v0: f64) -> Self {
        Self { point: PixelPoint::new(0.0, v0), direction: [1.0, 0.0], residual: 0.0 }
    }

    /// The line `v = slope * u + intercept`.
    pub fn from_slope_intercept(slope: f64, intercept: f64) -> Result<Self> {
        Self::new(PixelPoint::new(0.0, intercept), Vector2::new(1.0, slope))
    }

    pub fn point(&self) -> PixelPoint {
        self.point
    }

    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(self.direction[0], self.direction[1])
    }

    /// `(slope, intercept)` of `v = slope * u + intercept`; `None` for vertical lines.
    pub fn slope_intercept(&self) -> Option<(f64, f64)> {
        let d = self.direction();
        if d.x.abs() < 1e-12 {
            return None;
        }
        let slope = d.y / d.x;
        Some((slope, self.point.v - slope * self.point.u))
    }

    pub fn distance(&self, q: PixelPoint) -> f64 {
        let d = self.direction();
        let r = q.to_vector() - self.point.to_vector();
        (r.x * d.y - r.y * d.x).abs()
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Intersection of the flow line with the horizon.
pub fn planar_epipole(flow: &FlowVector, horizon: &HorizonLine, tol: &Tolerances) -> Result<Epipole> {
    let t = flow.direction();
    let h = horizon.direction();
    let sin = cross(&t, &h);
    if sin.abs() < tol.eps_parallel.radians().sin() {
        return Err(Error::ParallelToHorizon);
    }
    let r = horizon.point().to_vector() - flow.p().to_vector();
    let s = cross(&r, &h) / sin;
    let position = PixelPoint::from_vector(flow.p().to_vector() + t * s);
    Ok(Epipole { position, method: EpipoleMethod::HorizonIntersection, residual: 0.0 })
}

fn has_non_parallel_pair(flows: &[FlowVector], eps: Angle) -> bool {
    let sin_eps = eps.radians().sin();
    let dirs: Vec<_> = flows.iter().map(FlowVector::direction).collect();
    dirs.iter().enumerate().any(|(i, a)| dirs[i + 1..].iter().any(|b| cross(a, b).abs() >= sin_eps))
}

/// Least-squares intersection of the flow lines: minimizes the summed squared
/// perpendicular distances `n_i . (e - p_i)` via a QR solve of the stacked
/// normals. Residual is the RMS point-line distance.
pub fn epipole_least_squares(flows: &[FlowVector], tol: &Tolerances) -> Result<Epipole> {
    if flows.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: flows.len() });
    }
    if !has_non_parallel_pair(flows, tol.eps_parallel) {
        return Err(Error::SingularGeometry("all flow lines are parallel"));
    }
    // Centering keeps the system well scaled for large pixel coordinates.
    let n = flows.len() as f64;
    let center = flows.iter().map(|f| f.p().to_vector()).sum::<Vector2<f64>>() / n;
    let a = DMatrix::from_fn(flows.len(), 2, |r, c| flows[r].normal()[c]);
    let b = DVector::from_iterator(flows.len(), flows.iter().map(|f| f.normal().dot(&(f.p().to_vector() - center))));
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let x = qr.r().solve_upper_triangular(&qtb).ok_or(Error::SingularGeometry("rank-deficient flow normals"))?;
    let position = PixelPoint::new(x[0] + center.x, x[1] + center.y);
    let residual = (flows.iter().map(|f| f.signed_distance(position).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Epipole { position, method: EpipoleMethod::LeastSquares, residual })
}

/// Epipole of an arbitrary translation from a point tracked over three frames.
///
/// The angles `alpha, beta, gamma` of the three observations are measured
/// along the flow line from its intersection with the horizon. The true
/// epipole lies on the same line, offset by an angle `x` such that the
/// frame-shifted collision times differ by exactly one frame:
///
/// `tan x = (ta tb - 2 ta tc + tb tc) / (ta - 2 tb + tc)`.
///
/// Returns `x` and the corrected epipole, whose in-plane angle is the horizon
/// intersection's angle minus `x`. The residual is `|k01 - k12 - 1|` after
/// correction. Motion must be constant over the three frames.
pub fn epipole_offset_three_frames(
    track: &TrackObservation,
    horizon: &HorizonLine,
    intrinsics: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<(Angle, Epipole)> {
    let p = track.positions();
    if p.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: p.len() });
    }
    let line = ViewingLine::through(p[0], p[2], intrinsics)
        .map_err(|_| Error::DegenerateConfiguration("point does not move over three frames"))?;
    let flow = FlowVector::new(p[0], p[2]).map_err(|_| Error::DegenerateConfiguration("zero flow"))?;
    let on_horizon = planar_epipole(&flow, horizon, tol)?.position;

    let gamma_h = line.angle_of(on_horizon);
    let ta = (line.angle_of(p[0]) - gamma_h).tan();
    let tb = (line.angle_of(p[1]) - gamma_h).tan();
    let tc = (line.angle_of(p[2]) - gamma_h).tan();
    let denom = ta - 2.0 * tb + tc;
    if !(denom.abs() > tol.eps_tan) {
        return Err(Error::DegenerateConfiguration("angles do not change curvature over three frames"));
    }
    let numer = ta * tb - 2.0 * ta * tc + tb * tc;
    // tan fixes x only modulo pi; take the branch that lands on the image plane.
    let along = (gamma_h.radians() - (numer / denom).atan() + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    let x = Angle::from_radians(gamma_h.radians() - along);

    let position = line
        .point_at_angle(Angle::from_radians(along))
        .ok_or(Error::DegenerateConfiguration("corrected epipole at infinity"))?;
    let residual = (ttc_three_frame_consistency(track, position, intrinsics, tol)? - 1.0).abs();
    Ok((x, Epipole { position, method: EpipoleMethod::ThreeFrameOffset, residual }))
}

/// Centroid and unit direction of the total-least-squares line through
/// `pts`; `None` when the points coincide.
fn principal_line(pts: &[Vector2<f64>]) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let mean = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    if !((sxx + syy).sqrt() > 1e-9 * (1.0 + mean.norm())) {
        return None;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some((mean, Vector2::new(theta.cos(), theta.sin())))
}

/// Total-least-squares line through epipoles of different planar motions.
pub fn calibrate_horizon(epipoles: &[Epipole]) -> Result<HorizonLine> {
    if epipoles.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: epipoles.len() });
    }
    let n = epipoles.len() as f64;
    let pts: Vec<Vector2<f64>> = epipoles.iter().map(|e| e.position.to_vector()).collect();
    let (mean, dir) = principal_line(&pts).ok_or(Error::SingularGeometry("epipoles coincide"))?;
    let mut line = HorizonLine::new(PixelPoint::from_vector(mean), dir)?;
    let ss: f64 = epipoles.iter().map(|e| line.distance(e.position).powi(2)).sum();
    line.residual = (ss / n).sqrt();
    Ok(line)
}
