//! Pinhole camera conventions and pixel/angle conversions.
//!
//! Camera frame: `+Z` forward along the optical axis, `+X` right, `+Y` down.
//! Image frame: origin top-left, `u` right, `v` down. A level camera therefore
//! sees the horizon as the row `v = v0`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intrinsic parameters of an ideal pinhole camera. The focal length is
/// always expressed in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    focal_px: f64,
    principal_point: PixelPoint,
    image_size: (u32, u32),
    off_center: bool,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    focal_px: f64,
    principal_point: [f64; 2],
    image_size: [u32; 2],
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_off_center: bool,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = Error;

    fn try_from(raw: RawIntrinsics) -> Result<Self> {
        let pp = PixelPoint::new(raw.principal_point[0], raw.principal_point[1]);
        let size = (raw.image_size[0], raw.image_size[1]);
        if raw.allow_off_center {
            Self::off_center(raw.focal_px, pp, size)
        } else {
            Self::new(raw.focal_px, pp, size)
        }
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics {
            focal_px: c.focal_px,
            principal_point: [c.principal_point.u, c.principal_point.v],
            image_size: [c.image_size.0, c.image_size.1],
            allow_off_center: c.off_center,
        }
    }
}

impl CameraIntrinsics {
    /// Intrinsics with the principal point inside the image rectangle.
    pub fn new(focal_px: f64, principal_point: PixelPoint, image_size: (u32, u32)) -> Result<Self> {
        let cam = Self::off_center(focal_px, principal_point, image_size)?;
        let (w, h) = image_size;
        let PixelPoint { u, v } = principal_point;
        if !(0.0..=f64::from(w)).contains(&u) || !(0.0..=f64::from(h)).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "principal point ({u}, {v}) outside the {w}x{h} image; use off_center to allow it"
            )));
        }
        Ok(Self { off_center: false, ..cam })
    }

    /// Intrinsics whose principal point may lie anywhere, e.g. a cropped
    /// sensor or synthetic setups with the origin at the optical axis.
    pub fn off_center(focal_px: f64, principal_point: PixelPoint, image_size: (u32, u32)) -> Result<Self> {
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(Error::InvalidInput(format!("focal length must be positive, got {focal_px}")));
        }
        if !principal_point.is_finite() {
            return Err(Error::InvalidInput("principal point must be finite".into()));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::InvalidInput("image size must be positive".into()));
        }
        Ok(Self { focal_px, principal_point, image_size, off_center: true })
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    pub fn principal_point(&self) -> PixelPoint {
        self.principal_point
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    pub fn is_off_center(&self) -> bool {
        self.off_center
    }

    /// Viewing ray `(u - u0, v - v0, f)` of a pixel, not normalized.
    pub fn ray(&self, p: PixelPoint) -> Vector3<f64> {
        let pp = self.principal_point;
        Vector3::new(p.u - pp.u, p.v - pp.v, self.focal_px)
    }

    /// Pixel where the line through the focal point along `direction` meets
    /// the image plane. `None` for directions parallel to the image plane.
    pub fn project_direction(&self, direction: &Vector3<f64>) -> Option<PixelPoint> {
        if direction.z.abs() <= f64::EPSILON * direction.norm() {
            return None;
        }
        let pp = self.principal_point;
        Some(PixelPoint::new(
            pp.u + self.focal_px * direction.x / direction.z,
            pp.v + self.focal_px * direction.y / direction.z,
        ))
    }
}

/// Image coordinates in pixels. May lie outside the image bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// A point in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ScenePoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// An angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const fn from_radians(radians: f64) -> Self {
        Self(radians)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        Self(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    pub fn tan(self) -> f64 {
        self.0.tan()
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;

    fn sub(self, rhs: Angle) -> Angle {
        Angle(self.0 - rhs.0)
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;

    fn add(self, rhs: Angle) -> Angle {
        Angle(self.0 + rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Angle between the optical axis and the ray through `coord`, measured in
/// the plane of one image axis.
pub fn angle_from_pixel(coord: f64, intrinsics: &CameraIntrinsics, axis: Axis) -> Result<Angle> {
    if !coord.is_finite() {
        return Err(Error::InvalidInput(format!("pixel coordinate must be finite, got {coord}")));
    }
    let center = match axis {
        Axis::Horizontal => intrinsics.principal_point.u,
        Axis::Vertical => intrinsics.principal_point.v,
    };
    Ok(Angle((coord - center).atan2(intrinsics.focal_px)))
}

pub fn project(point: &ScenePoint, intrinsics: &CameraIntrinsics) -> Result<PixelPoint> {
    if !(point.z > 0.0) {
        return Err(Error::BehindCamera(point.z));
    }
    let pp = intrinsics.principal_point;
    let f = intrinsics.focal_px;
    Ok(PixelPoint::new(pp.u + f * point.x / point.z, pp.v + f * point.y / point.z))
}

/// Unsigned 3D angle between the viewing rays of two pixels.
pub fn ray_angle(a: PixelPoint, b: PixelPoint, intrinsics: &CameraIntrinsics) -> Angle {
    let (ra, rb) = (intrinsics.ray(a), intrinsics.ray(b));
    Angle(ra.cross(&rb).norm().atan2(ra.dot(&rb)))
}

/// Signed angle from `b` to `a` measured along the image line through both
/// points. The line is oriented towards increasing `u` (increasing `v` for
/// vertical lines), so the result is antisymmetric in its arguments and its
/// magnitude equals the 3D angle between the two viewing rays.
pub fn angular_separation(a: PixelPoint, b: PixelPoint, intrinsics: &CameraIntrinsics) -> Result<Angle> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput("pixel coordinates must be finite".into()));
    }
    let line = ViewingLine::through(b, a, intrinsics)?.canonical();
    Ok(line.angle_of(a) - line.angle_of(b))
}

/// An image line together with the plane it spans with the focal point.
///
/// Angles of points on the line are measured inside that plane, so two points
/// on the line are separated by exactly the 3D angle between their rays. The
/// parameter `s` is the signed pixel distance from the foot of the
/// perpendicular dropped from the principal point onto the line; the focal
/// point sits at distance `sqrt(f^2 + d^2)` from that foot, where `d` is the
/// principal point's distance to the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewingLine {
    principal_point: Vector2<f64>,
    foot_offset: Vector2<f64>,
    direction: Vector2<f64>,
    plane_focal: f64,
}

const COINCIDENT_PX: f64 = 1e-12;

impl ViewingLine {
    /// Line through `from` towards `to`.
    pub fn through(from: PixelPoint, to: PixelPoint, intrinsics: &CameraIntrinsics) -> Result<Self> {
        let d = to.to_vector() - from.to_vector();
        let scale = 1.0 + from.u.abs().max(from.v.abs());
        if d.norm() <= COINCIDENT_PX * scale {
            return Err(Error::DegenerateGeometry("coincident points do not define a line"));
        }
        Self::new(from, d, intrinsics)
    }

    pub fn new(point: PixelPoint, direction: Vector2<f64>, intrinsics: &CameraIntrinsics) -> Result<Self> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 0.0) || !point.is_finite() {
            return Err(Error::DegenerateGeometry("line needs a finite point and a nonzero direction"));
        }
        let direction = direction / norm;
        let principal_point = intrinsics.principal_point().to_vector();
        let rel = point.to_vector() - principal_point;
        let foot_offset = rel - direction * rel.dot(&direction);
        let plane_focal = intrinsics.focal_px().hypot(foot_offset.norm());
        Ok(Self { principal_point, foot_offset, direction, plane_focal })
    }

    /// Same line, oriented towards increasing `u` (or `v` if vertical).
    pub fn canonical(self) -> Self {
        let flip = self.direction.x < 0.0 || (self.direction.x == 0.0 && self.direction.y < 0.0);
        if flip {
            Self { direction: -self.direction, ..self }
        } else {
            self
        }
    }

    pub fn direction(&self) -> Vector2<f64> {
        self.direction
    }

    /// Signed parameter of the orthogonal projection of `p` onto the line.
    pub fn parameter(&self, p: PixelPoint) -> f64 {
        (p.to_vector() - self.principal_point).dot(&self.direction)
    }

    pub fn point_at(&self, s: f64) -> PixelPoint {
        PixelPoint::from_vector(self.principal_point + self.foot_offset + self.direction * s)
    }

    /// Orthogonal projection of `p` onto the line.
    pub fn project_point(&self, p: PixelPoint) -> PixelPoint {
        self.point_at(self.parameter(p))
    }

    /// Perpendicular pixel distance of `p` from the line.
    pub fn distance(&self, p: PixelPoint) -> f64 {
        p.distance(&self.project_point(p))
    }

    /// In-plane angle of the ray through the projection of `p`.
    pub fn angle_of(&self, p: PixelPoint) -> Angle {
        Angle(self.parameter(p).atan2(self.plane_focal))
    }

    /// Point on the line whose ray makes `angle` with the foot ray.
    /// `None` when the ray is parallel to the image plane.
    pub fn point_at_angle(&self, angle: Angle) -> Option<PixelPoint> {
        let r = angle.radians();
        if !(r.abs() < std::f64::consts::FRAC_PI_2) {
            return None;
        }
        let s = self.plane_focal * r.tan();
        s.is_finite().then(|| self.point_at(s))
    }
}
