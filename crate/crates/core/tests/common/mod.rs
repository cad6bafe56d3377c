//! Random scenes for closure and clustering tests.
#![allow(dead_code)]

pub mod oracle;

use collision_plane::simulator::{Scenario, SceneObject};
use collision_plane::{CameraIntrinsics, PixelPoint, ScenePoint};
use nalgebra::Vector3;
use rand::Rng;

pub fn camera<R: Rng>(rng: &mut R) -> CameraIntrinsics {
    let f = rng.random_range(400.0..2000.0);
    let pp = PixelPoint::new(rng.random_range(-300.0..300.0), rng.random_range(-200.0..200.0));
    CameraIntrinsics::off_center(f, pp, (1280, 960)).unwrap()
}

/// Approaching relative velocity inside a cone around -Z, so the epipole stays
/// within about one focal length of the principal point.
pub fn velocity<R: Rng>(rng: &mut R, planar: bool) -> Vector3<f64> {
    let vz = -rng.random_range(0.2..2.0);
    let vx = vz * rng.random_range(-0.8..0.8);
    let vy = if planar { 0.0 } else { vz * rng.random_range(-0.5..0.5) };
    Vector3::new(vx, vy, vz)
}

/// A point that stays in front of the camera for `frames` frames and is not
/// within ~1 degree of the motion line through the focal point.
pub fn point<R: Rng>(rng: &mut R, v_g: &Vector3<f64>, frames: usize, planar: bool) -> ScenePoint {
    loop {
        let z = rng.random_range(10.0..60.0);
        let x = rng.random_range(-0.6..0.6) * z;
        let mut y: f64 = rng.random_range(-0.4..0.4) * z;
        if planar && y.abs() < 0.5 {
            y = 0.5_f64.copysign(y) + y;
        }
        let p = Vector3::new(x, y, z);
        let last = p + v_g * (frames as f64 - 1.0);
        let sin = p.cross(v_g).norm() / (p.norm() * v_g.norm());
        if last.z > 1.0 && sin > 0.02 {
            return ScenePoint::new(x, y, z);
        }
    }
}

pub fn object<R: Rng>(rng: &mut R, id: u32, v_g: &Vector3<f64>, n: usize, frames: usize, planar: bool) -> SceneObject {
    SceneObject { id, points: (0..n).map(|_| point(rng, v_g, frames, planar)).collect(), velocity: (*v_g).into() }
}

/// One object with `n` points seen from a static camera.
pub fn scene<R: Rng>(rng: &mut R, n: usize, frames: usize, planar: bool) -> (Scenario, Vector3<f64>) {
    let v_g = velocity(rng, planar);
    let scenario = Scenario {
        intrinsics: camera(rng),
        objects: vec![object(rng, 0, &v_g, n, frames, planar)],
        camera_velocity: [0.0; 3],
        frame_count: frames,
        pixel_noise_sigma: 0.0,
        rng_seed: 0,
    };
    (scenario, v_g)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Several rigid objects with distinct epipoles at least `min_separation`
/// pixels apart, `points` points each, seen by a static 640x480 camera.
/// Objects are 2 m wide and tall and `depth` m deep.
pub fn multi_object<R: Rng>(
    rng: &mut R,
    objects: usize,
    points: usize,
    frames: usize,
    min_separation: f64,
    sigma: f64,
    depth: f64,
) -> Scenario {
    let intrinsics = CameraIntrinsics::new(800.0, PixelPoint::new(320.0, 240.0), (640, 480)).unwrap();
    let mut epipoles: Vec<PixelPoint> = Vec::new();
    let mut list = Vec::new();
    while list.len() < objects {
        let v_g = velocity(rng, false);
        let e = intrinsics.project_direction(&v_g).unwrap();
        if epipoles.iter().any(|q| q.distance(&e) < min_separation) {
            continue;
        }
        let center =
            Vector3::new(rng.random_range(-4.0..4.0), rng.random_range(-2.0..2.0), rng.random_range(15.0..30.0));
        let pts: Vec<ScenePoint> = (0..points)
            .map(|_| {
                let offset = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    depth * rng.random_range(-0.5..0.5),
                );
                ScenePoint::from_vector(center + offset)
            })
            .collect();
        let last_z = center.z - depth + v_g.z * (frames as f64 - 1.0);
        if last_z < 2.0 {
            continue;
        }
        epipoles.push(e);
        list.push(SceneObject { id: list.len() as u32, points: pts, velocity: v_g.into() });
    }
    Scenario {
        intrinsics,
        objects: list,
        camera_velocity: [0.0; 3],
        frame_count: frames,
        pixel_noise_sigma: sigma,
        rng_seed: rng.random(),
    }
}
