use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use collision_plane::formats::{
    finite, read_scenario, read_tracks, write_tracks, ClusterRecord, EpipoleRecord, EstimateRecord, HorizonRecord,
    ResultDocument, TruthDocument, SCHEMA_VERSION,
};
use collision_plane::simulator::{
    collision_map as build_map, orientation_error_sweep, simulate as run, GridAxis, GridSpec, SweepParams,
};
use collision_plane::{
    calibrate_horizon, classify_motion, cluster_flows, epipole_offset_three_frames, estimate_between, planar_epipole,
    CameraIntrinsics, Clustering, ClusteringConfig, CollisionEstimate, Epipole, Error, FlowVector, HorizonLine,
    PixelPoint, Tolerances, TrackObservation, TtcTolerance,
};
use serde_json::{json, Value};

use crate::{ClusterArgs, CollisionMapArgs, EstimateArgs, Failure, Mode, Preset, SensitivityArgs, SimulateArgs};

type Outcome = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_tracks(path: &Path) -> Result<Vec<TrackObservation>, Failure> {
    read_tracks(open(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

/// Writes to `out`, or to standard output when no path is given.
fn emit(out: Option<&PathBuf>, contents: &str) -> Outcome {
    match out {
        Some(path) => write_file(path, contents.as_bytes()),
        None => io::stdout().write_all(contents.as_bytes()).map_err(|e| Failure::Internal(e.to_string())),
    }
}

fn intrinsics(f_u0_v0: [f64; 3]) -> Result<CameraIntrinsics, Failure> {
    let [f, u0, v0] = f_u0_v0;
    // Image size only bounds scenario projections; track files carry no size.
    CameraIntrinsics::off_center(f, PixelPoint::new(u0, v0), (1, 1)).map_err(usage)
}

/// Snake-case tag of a per-track failure.
fn status_of(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::BehindCamera(_) => "behind_camera",
        Error::DegenerateGeometry(_) => "degenerate_geometry",
        Error::StationaryPoint => "stationary_point",
        Error::ParallelToHorizon => "parallel_to_horizon",
        Error::InsufficientData { .. } => "insufficient_data",
        Error::SingularGeometry(_) => "singular_geometry",
        Error::DegenerateConfiguration(_) => "degenerate_configuration",
        Error::DegenerateFlow => "degenerate_flow",
    }
}

fn failed(track: &TrackObservation, e: &Error) -> EstimateRecord {
    EstimateRecord::failed(track.track_id(), status_of(e), e.to_string())
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let path = &args.scenario;
    let mut scenario = read_scenario(open(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(seed) = args.seed {
        scenario.rng_seed = seed;
    }
    if let Some(sigma) = args.noise_sigma {
        scenario.pixel_noise_sigma = sigma;
    }
    scenario.validate().map_err(usage)?;
    let sim = run(&scenario).map_err(|e| match e {
        Error::InvalidInput(_) => usage(&e),
        _ => Failure::Internal(e.to_string()),
    })?;

    let mut csv = Vec::new();
    write_tracks(&mut csv, &sim.tracks).map_err(|e| Failure::Internal(e.to_string()))?;
    write_file(&args.out_tracks, &csv)?;

    let doc = TruthDocument {
        schema: SCHEMA_VERSION,
        seed: scenario.rng_seed,
        pixel_noise_sigma: scenario.pixel_noise_sigma,
        truth: sim.truth,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Internal(e.to_string()))?;
    text.push('\n');
    write_file(&args.out_truth, text.as_bytes())
}

fn horizon_record(line: &HorizonLine, source: &str) -> HorizonRecord {
    let p = line.point();
    let d = line.direction();
    let si = line.slope_intercept();
    HorizonRecord {
        point: [p.u, p.v],
        direction: [d.x, d.y],
        slope: si.map(|s| s.0),
        intercept: si.map(|s| s.1),
        residual: line.residual,
        source: source.to_owned(),
    }
}

fn epipole_record(label: String, e: &Epipole) -> EpipoleRecord {
    EpipoleRecord {
        label,
        u: e.position.u,
        v: e.position.v,
        method: e.method.as_str().to_owned(),
        residual: e.residual,
    }
}

/// Flows of the tracks that have one, paired with the track index.
fn track_flows(tracks: &[TrackObservation]) -> (Vec<usize>, Vec<FlowVector>) {
    tracks.iter().enumerate().filter_map(|(i, t)| FlowVector::fitted(t).ok().map(|f| (i, f))).unzip()
}

fn run_clustering(
    tracks: &[TrackObservation],
    intr: &CameraIntrinsics,
    config: &ClusteringConfig,
) -> Result<(Vec<usize>, Clustering), Error> {
    let (owners, flows) = track_flows(tracks);
    let clustering = cluster_flows(&flows, intr, config)?;
    Ok((owners, clustering))
}

/// Estimate over the track's fitted flow, rescaled to single frames.
fn estimate_on_flow(
    flow: &FlowVector,
    epipole: PixelPoint,
    intr: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<CollisionEstimate, Error> {
    Ok(estimate_between(flow.p(), flow.p_prime(), epipole, intr, tol)?.per_frame(flow.frame_gap()))
}

fn success(track: &TrackObservation, est: &CollisionEstimate, epipole: PixelPoint, tol: &Tolerances) -> EstimateRecord {
    EstimateRecord {
        track_id: track.track_id(),
        status: "ok".into(),
        k: finite(est.k),
        h: finite(est.h),
        classification: Some(classify_motion(track, epipole, tol.eps_px).as_str().to_owned()),
        epipole: Some([epipole.u, epipole.v]),
        offset_angle: None,
        three_frame_residual: None,
        message: None,
    }
}

/// Positions 0, m and 2m of a track with `m = (len - 1) / 2`; spreading the
/// three samples over the track keeps the angle differences well above noise.
fn three_samples(track: &TrackObservation) -> Result<(TrackObservation, u32), Error> {
    let p = track.positions();
    if p.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: p.len() });
    }
    let m = (p.len() - 1) / 2;
    let sub = TrackObservation::from_positions(track.track_id(), track.first_frame(), vec![p[0], p[m], p[2 * m]])?;
    Ok((sub, m as u32))
}

fn three_frame_record(
    track: &TrackObservation,
    horizon: &HorizonLine,
    intr: &CameraIntrinsics,
    tol: &Tolerances,
) -> Result<(EstimateRecord, Epipole), Error> {
    let (sub, m) = three_samples(track)?;
    let (x, epipole) = epipole_offset_three_frames(&sub, horizon, intr, tol)?;
    let p = sub.positions();
    let est = estimate_between(p[0], p[1], epipole.position, intr, tol)?.per_frame(m);
    let mut record = success(track, &est, epipole.position, tol);
    record.offset_angle = Some(x.radians());
    record.three_frame_residual = finite(epipole.residual);
    Ok((record, epipole))
}

fn clustering_config(seed: u64, eps_dist: f64, tol: Tolerances) -> ClusteringConfig {
    ClusteringConfig { eps_dist, rng_seed: seed, tolerances: tol, ..ClusteringConfig::default() }
}

pub fn estimate(args: &EstimateArgs) -> Outcome {
    let intr = intrinsics(args.intrinsics)?;
    let tracks = load_tracks(&args.tracks)?;
    let tol = Tolerances { eps_px: args.eps_px, ..Tolerances::default() };
    if !(args.eps_px >= 0.0 && args.eps_dist > 0.0) {
        return Err(usage("--eps-px must be >= 0 and --eps-dist > 0"));
    }
    let config = clustering_config(args.seed, args.eps_dist, tol);

    let mut doc = ResultDocument::new("estimate");
    doc.seed = Some(args.seed);
    doc.config.insert("mode".into(), json!(args.mode.as_str()));
    doc.config.insert("intrinsics".into(), json!(args.intrinsics));
    doc.config.insert("eps_dist".into(), json!(args.eps_dist));
    doc.config.insert("eps_px".into(), json!(args.eps_px));

    let (horizon, source) = if args.calibrate {
        let (_, clustering) =
            run_clustering(&tracks, &intr, &config).map_err(|e| usage(format!("--calibrate: {e}")))?;
        let epipoles: Vec<Epipole> = clustering.clusters.iter().map(|c| c.epipole).collect();
        let line = calibrate_horizon(&epipoles)
            .map_err(|e| usage(format!("--calibrate needs at least two distinct motion clusters: {e}")))?;
        (line, "calibrated")
    } else if let Some([a, b]) = args.horizon {
        (HorizonLine::from_slope_intercept(a, b).map_err(usage)?, "given")
    } else {
        (HorizonLine::level(args.intrinsics[2]), "level")
    };
    if args.mode != Mode::LeastSquares || args.calibrate || args.horizon.is_some() {
        doc.horizon = Some(horizon_record(&horizon, source));
        doc.residuals.insert("horizon".into(), horizon.residual);
    }

    match args.mode {
        Mode::Planar => {
            for track in &tracks {
                let result = FlowVector::fitted(track).and_then(|flow| {
                    let e = planar_epipole(&flow, &horizon, &tol)?;
                    let est = estimate_on_flow(&flow, e.position, &intr, &tol)?;
                    Ok((e, est))
                });
                match result {
                    Ok((e, est)) => {
                        doc.epipoles.push(epipole_record(format!("track:{}", track.track_id()), &e));
                        doc.estimates.push(success(track, &est, e.position, &tol));
                    }
                    Err(e) => doc.estimates.push(failed(track, &e)),
                }
            }
        }
        Mode::ThreeFrame => {
            let mut worst: f64 = 0.0;
            for track in &tracks {
                match three_frame_record(track, &horizon, &intr, &tol) {
                    Ok((record, e)) => {
                        worst = worst.max(e.residual);
                        doc.epipoles.push(epipole_record(format!("track:{}", track.track_id()), &e));
                        doc.estimates.push(record);
                    }
                    Err(e) => doc.estimates.push(failed(track, &e)),
                }
            }
            doc.residuals.insert("max_three_frame_residual".into(), worst);
        }
        Mode::LeastSquares => match run_clustering(&tracks, &intr, &config) {
            Ok((owners, clustering)) => {
                let (_, flows) = track_flows(&tracks);
                let mut assigned: BTreeMap<usize, (usize, &FlowVector)> = BTreeMap::new();
                for (c, cluster) in clustering.clusters.iter().enumerate() {
                    doc.epipoles.push(epipole_record(format!("cluster:{c}"), &cluster.epipole));
                    doc.residuals.insert(format!("cluster:{c}"), cluster.epipole.residual);
                    doc.clusters.push(cluster_record(c, cluster, &owners, &tracks));
                    for &m in &cluster.members {
                        assigned.insert(owners[m], (c, &flows[m]));
                    }
                }
                for (i, track) in tracks.iter().enumerate() {
                    let Some(&(c, flow)) = assigned.get(&i) else {
                        doc.outliers.push(track.track_id());
                        doc.estimates.push(EstimateRecord::failed(
                            track.track_id(),
                            "outlier",
                            "track belongs to no motion cluster".into(),
                        ));
                        continue;
                    };
                    let e = clustering.clusters[c].epipole.position;
                    match estimate_on_flow(flow, e, &intr, &tol) {
                        Ok(est) => doc.estimates.push(success(track, &est, e, &tol)),
                        Err(err) => doc.estimates.push(failed(track, &err)),
                    }
                }
            }
            Err(e @ Error::InsufficientData { .. }) => {
                doc.estimates.extend(tracks.iter().map(|t| failed(t, &e)));
            }
            Err(e) => return Err(usage(e)),
        },
    }

    emit(args.out.as_ref(), &doc.to_json().map_err(|e| Failure::Internal(e.to_string()))?)
}

fn cluster_record(
    id: usize,
    cluster: &collision_plane::MotionCluster,
    owners: &[usize],
    tracks: &[TrackObservation],
) -> ClusterRecord {
    ClusterRecord {
        id,
        track_ids: cluster.members.iter().map(|&m| tracks[owners[m]].track_id()).collect(),
        epipole: [cluster.epipole.position.u, cluster.epipole.position.v],
        epipole_residual: cluster.epipole.residual,
        ttc_values: cluster.ttc_values.clone(),
        mean_ttc: cluster.mean_ttc,
    }
}

pub fn cluster(args: &ClusterArgs) -> Outcome {
    let intr = intrinsics(args.intrinsics)?;
    let tracks = load_tracks(&args.tracks)?;
    if tracks.len() < args.min_size {
        return Err(usage(format!("need at least {} tracks, got {}", args.min_size, tracks.len())));
    }
    let ttc_tolerance = match args.eps_ttc {
        Some(frames) => TtcTolerance::fixed(frames),
        None => TtcTolerance::default(),
    };
    let config = ClusteringConfig {
        eps_dist: args.eps_dist,
        ttc_tolerance,
        max_iterations: args.max_iterations,
        min_cluster_size: args.min_size,
        rng_seed: args.seed,
        ..ClusteringConfig::default()
    };

    let (owners, flows) = track_flows(&tracks);
    let clustering = cluster_flows(&flows, &intr, &config).map_err(usage)?;

    let mut doc = ResultDocument::new("cluster");
    doc.seed = Some(args.seed);
    doc.config.insert("intrinsics".into(), json!(args.intrinsics));
    doc.config.insert("eps_dist".into(), json!(args.eps_dist));
    doc.config.insert("eps_ttc".into(), serde_json::to_value(ttc_tolerance).unwrap_or(Value::Null));
    doc.config.insert("min_size".into(), json!(args.min_size));
    doc.config.insert("max_iterations".into(), json!(args.max_iterations));
    for (c, cl) in clustering.clusters.iter().enumerate() {
        doc.epipoles.push(epipole_record(format!("cluster:{c}"), &cl.epipole));
        doc.residuals.insert(format!("cluster:{c}"), cl.epipole.residual);
        doc.clusters.push(cluster_record(c, cl, &owners, &tracks));
    }
    let clustered: Vec<usize> = clustering.clusters.iter().flat_map(|c| c.members.iter().map(|&m| owners[m])).collect();
    doc.outliers = (0..tracks.len()).filter(|i| !clustered.contains(i)).map(|i| tracks[i].track_id()).collect();

    emit(args.out.as_ref(), &doc.to_json().map_err(|e| Failure::Internal(e.to_string()))?)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn collision_map(args: &CollisionMapArgs) -> Outcome {
    let path = &args.scenario;
    let scenario = read_scenario(open(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let (ef, el, nf, nl) = args.grid;
    let grid = GridSpec { forward: GridAxis::symmetric(ef, nf), lateral: GridAxis::symmetric(el, nl) };
    let map = build_map(&scenario, &grid, args.radius).map_err(usage)?;

    let mut out = String::from("forward_dv,lateral_dv,min_ttc,h,miss_distance,collision\n");
    for c in &map.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.forward_dv,
            c.lateral_dv,
            cell(c.min_ttc),
            cell(c.h),
            cell(c.miss_distance),
            c.collision
        );
    }
    emit(args.out.as_ref(), &out)
}

fn focal_px(args: &SensitivityArgs) -> Result<f64, Failure> {
    if let Some(f) = args.focal_px {
        return Ok(f);
    }
    let preset_mm = args.preset.map(|Preset::HighwayApproach| 8.0);
    let Some(mm) = args.focal_mm.or(preset_mm) else {
        return Err(usage("a focal length is required: --focal-px, or --focal-mm with --pixel-pitch-um"));
    };
    let Some(pitch_um) = args.pixel_pitch_um else {
        return Err(usage("a metric focal length needs --pixel-pitch-um; no default sensor is assumed"));
    };
    if !(mm > 0.0 && pitch_um > 0.0) {
        return Err(usage("focal length and pixel pitch must be positive"));
    }
    Ok(mm * 1000.0 / pitch_um)
}

fn depth_range([min, max, step]: [f64; 3]) -> Result<Vec<f64>, Failure> {
    if !(min > 0.0 && max >= min && step > 0.0) || (max - min) / step > 1e6 {
        return Err(usage("--depths needs 0 < min <= max and a step > 0"));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + step * i as f64).collect())
}

pub fn sensitivity(args: &SensitivityArgs) -> Outcome {
    let mut params = SweepParams::highway_approach(focal_px(args)?);
    params.seed = args.seed;
    if let Some(b) = args.baseline_m {
        params.stereo.baseline_m = b;
    }
    if let Some(dp) = args.detection_error_px {
        params.stereo.detection_error_px = dp;
    }
    if let Some(v) = args.speed_kmh {
        params.speed_kmh = v;
    }
    if let Some(h) = args.heading_deg {
        params.heading_deg = h;
    }
    if let Some(r) = args.frame_rate_hz {
        params.frame_rate_hz = r;
    }
    if let Some(g) = args.frame_gap {
        params.frame_gap = g;
    }
    if let Some(y) = args.point_height_m {
        params.point_height_m = y;
    }
    if let Some(d) = args.depths {
        params.depths_m = depth_range(d)?;
    }
    if let Some(n) = args.trials {
        params.trials = n;
    }
    let rows = orientation_error_sweep(&params).map_err(usage)?;

    let mut out = String::from(
        "z_m,stereo_depth_error_m,stereo_heading_error_deg,plane_heading_error_deg,ttc_error_frames,degenerate_trials\n",
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.z,
            r.stereo_depth_error,
            cell(r.stereo_heading_error_deg),
            cell(r.plane_heading_error_deg),
            cell(r.ttc_error_frames),
            r.degenerate_trials
        );
    }
    emit(args.out.as_ref(), &out)
}
