//! Simulator-to-estimator closure on noise-free scenes.

mod common;

use collision_plane::simulator::{plane_truth, simulate, Scenario};
use collision_plane::{
    collision_estimate, epipole_least_squares, epipole_offset_three_frames, planar_epipole,
    ttc_three_frame_consistency, CameraIntrinsics, FlowVector, HorizonLine, PixelPoint, Tolerances, ViewingLine,
};
use common::rel_err;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn level(intr: &CameraIntrinsics) -> HorizonLine {
    HorizonLine::level(intr.principal_point().v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn estimate_recovers_truth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, 1, 2, false);
        let sim = simulate(&scenario).unwrap();
        let truth = &sim.truth.points[0];
        let est = collision_estimate(&sim.tracks[0], truth.epipole.unwrap(), &scenario.intrinsics, &Tolerances::default()).unwrap();
        prop_assert!(rel_err(est.k, truth.k.unwrap()) < 1e-6, "k {} vs {}", est.k, truth.k.unwrap());
        prop_assert!(rel_err(est.h, truth.h.unwrap()) < 1e-6, "h {} vs {}", est.h, truth.h.unwrap());
    }

    #[test]
    fn reconstruction_matches_start_point_in_per_frame_units(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, v_g) = common::scene(&mut rng, 1, 2, false);
        let sim = simulate(&scenario).unwrap();
        let truth = &sim.truth.points[0];
        let est = collision_estimate(&sim.tracks[0], truth.epipole.unwrap(), &scenario.intrinsics, &Tolerances::default()).unwrap();
        // The motion runs towards -epipole ray for approaching points, so the
        // start point is -k v_g_dir + h v_h in units of |v_g|.
        let p0 = scenario.objects[0].points[0].to_vector() / v_g.norm();
        let along = -est.v_g_dir.dot(&p0);
        prop_assert!(rel_err(along.abs(), est.k.abs()) < 1e-6);
        let across = (p0 - est.v_g_dir * est.v_g_dir.dot(&p0)).norm();
        prop_assert!(rel_err(across, est.h) < 1e-6);
    }

    #[test]
    fn least_squares_epipole_is_exact(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, n, 2, false);
        let sim = simulate(&scenario).unwrap();
        let flows: Vec<_> = sim.tracks.iter().map(|t| FlowVector::from_track(t).unwrap()).collect();
        // Lines within the parallel tolerance of each other are rejected by design.
        let spread = flows.iter().flat_map(|a| flows.iter().map(move |b| cross(a, b))).fold(0.0, f64::max);
        prop_assume!(spread > 1.0_f64.to_radians().sin());
        let e = epipole_least_squares(&flows, &Tolerances::default()).unwrap();
        let truth = sim.truth.points[0].epipole.unwrap();
        prop_assert!(e.position.distance(&truth) < 1e-6, "{:?} vs {:?}", e.position, truth);
    }

    #[test]
    fn planar_epipole_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, 1, 2, true);
        let sim = simulate(&scenario).unwrap();
        let flow = FlowVector::from_track(&sim.tracks[0]).unwrap();
        prop_assume!(flow.direction().y.abs() > 1.0_f64.to_radians().sin());
        let e = planar_epipole(&flow, &level(&scenario.intrinsics), &Tolerances::default()).unwrap();
        let truth = sim.truth.points[0].epipole.unwrap();
        prop_assert!(e.position.distance(&truth) < 1e-6);
    }

    #[test]
    fn three_frame_offset_recovers_epipole(seed in any::<u64>(), planar in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, 1, 3, planar);
        let intr = scenario.intrinsics;
        let sim = simulate(&scenario).unwrap();
        let track = &sim.tracks[0];
        let truth = sim.truth.points[0].epipole.unwrap();
        let horizon = level(&intr);
        let p = track.positions();
        let flow = FlowVector::new(p[0], p[2]).unwrap();
        // The horizon intersection is the reference; it must exist.
        prop_assume!(planar_epipole(&flow, &horizon, &Tolerances::default()).is_ok());
        let (x, e) = epipole_offset_three_frames(track, &horizon, &intr, &Tolerances::default()).unwrap();

        let line = ViewingLine::through(p[0], p[2], &intr).unwrap();
        let on_horizon = planar_epipole(&flow, &horizon, &Tolerances::default()).unwrap().position;
        let true_x = (line.angle_of(on_horizon) - line.angle_of(truth)).radians();
        if planar {
            prop_assert!(x.radians().abs() < 1e-9, "x = {}", x.radians());
        } else {
            prop_assert!((x.radians() - true_x).abs() < 1e-6, "x {} vs {}", x.radians(), true_x);
        }
        prop_assert!(e.position.distance(&truth) < 1e-6 * (1.0 + truth.distance(&intr.principal_point()) / intr.focal_px()));
    }

    #[test]
    fn consecutive_estimates_differ_by_one_frame(seed in any::<u64>(), frames in 3usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, 1, frames, false);
        let sim = simulate(&scenario).unwrap();
        let track = &sim.tracks[0];
        let e = sim.truth.points[0].epipole.unwrap();
        for start in 0..track.len() - 2 {
            let w = track.window(start, 3).unwrap();
            let d = ttc_three_frame_consistency(&w, e, &scenario.intrinsics, &Tolerances::default()).unwrap();
            prop_assert!((d - 1.0).abs() < 1e-9, "window {start}: {d}");
        }
    }

    #[test]
    fn truth_decreases_by_one_per_frame(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, v_g) = common::scene(&mut rng, 1, 2, false);
        let p0 = scenario.objects[0].points[0].to_vector();
        let k0 = plane_truth(&p0, &v_g).unwrap().k;
        for t in 1..5 {
            let kt = plane_truth(&(p0 + v_g * t as f64), &v_g).unwrap().k;
            prop_assert!((k0 - kt - t as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn k_is_invariant_to_scene_scale_and_focal_length(seed in any::<u64>(), scale in 0.1f64..10.0, focal in 200.0f64..4000.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenario, _) = common::scene(&mut rng, 1, 2, false);
        let base = estimate(&scenario);

        let mut scaled = scenario.clone();
        for p in &mut scaled.objects[0].points {
            *p = collision_plane::ScenePoint::from_vector(p.to_vector() * scale);
        }
        scaled.objects[0].velocity = scaled.objects[0].velocity.map(|c| c * scale);
        let s = estimate(&scaled);
        prop_assert!(rel_err(s.0, base.0) < 1e-6 && rel_err(s.1, base.1) < 1e-6);

        let mut refocused = scenario.clone();
        refocused.intrinsics = CameraIntrinsics::off_center(focal, scenario.intrinsics.principal_point(), (1280, 960)).unwrap();
        let r = estimate(&refocused);
        prop_assert!(rel_err(r.0, base.0) < 1e-6 && rel_err(r.1, base.1) < 1e-6);
    }

    #[test]
    fn relative_motion_equivalence(seed in any::<u64>(), cam in prop::array::uniform3(-1.0f64..1.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (relative, _) = common::scene(&mut rng, 3, 3, false);
        let mut absolute = relative.clone();
        absolute.camera_velocity = cam;
        let v = relative.objects[0].velocity;
        absolute.objects[0].velocity = [v[0] + cam[0], v[1] + cam[1], v[2] + cam[2]];
        let a = simulate(&absolute).unwrap();
        let r = simulate(&relative).unwrap();
        prop_assert_eq!(a.tracks.len(), r.tracks.len());
        for (ta, tr) in a.tracks.iter().zip(&r.tracks) {
            for (pa, pr) in ta.positions().iter().zip(tr.positions()) {
                prop_assert!(pa.distance(pr) < 1e-9 * (1.0 + pr.u.abs() + pr.v.abs()));
            }
        }
    }

    #[test]
    fn constant_bearing_has_zero_miss(seed in any::<u64>(), speed in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut scenario, _) = common::scene(&mut rng, 1, 4, false);
        let p = scenario.objects[0].points[0].to_vector();
        let v = -p.normalize() * speed;
        scenario.objects[0].velocity = v.into();
        let sim = simulate(&scenario).unwrap();
        let truth = &sim.truth.points[0];
        prop_assert!(truth.h.unwrap() < 1e-9);
        let track = &sim.tracks[0];
        let first = track.positions()[0];
        prop_assert!(track.positions().iter().all(|q| q.distance(&first) < 1e-6));
    }
}

fn cross(a: &FlowVector, b: &FlowVector) -> f64 {
    let (da, db) = (a.direction(), b.direction());
    (da.x * db.y - da.y * db.x).abs()
}

fn estimate(s: &Scenario) -> (f64, f64) {
    let sim = simulate(s).unwrap();
    let e = sim.truth.points[0].epipole.unwrap();
    let est = collision_estimate(&sim.tracks[0], e, &s.intrinsics, &Tolerances::default()).unwrap();
    (est.k, est.h)
}

#[test]
fn anchor_through_the_pipeline() {
    let intr = CameraIntrinsics::off_center(800.0, PixelPoint::new(0.0, 0.0), (640, 480)).unwrap();
    let scenario = Scenario {
        intrinsics: intr,
        objects: vec![collision_plane::simulator::SceneObject {
            id: 0,
            points: vec![collision_plane::ScenePoint::new(1.0, 0.0, 10.0)],
            velocity: [0.0, 0.0, -1.0],
        }],
        camera_velocity: [0.0; 3],
        frame_count: 2,
        pixel_noise_sigma: 0.0,
        rng_seed: 0,
    };
    let sim = simulate(&scenario).unwrap();
    let p = sim.tracks[0].positions();
    assert_eq!(p[0], PixelPoint::new(80.0, 0.0));
    assert!((p[1].u - 800.0 / 9.0).abs() < 1e-12);
    let est = collision_estimate(&sim.tracks[0], sim.truth.points[0].epipole.unwrap(), &intr, &Tolerances::default())
        .unwrap();
    assert!((est.k - 10.0).abs() < 1e-9);
    assert!((est.h - 1.0).abs() < 1e-9);
}
