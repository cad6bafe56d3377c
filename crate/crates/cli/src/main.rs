//! `collision-plane`: simulate scenes, estimate time to collision from point
//! tracks, cluster independent motions, and compute collision maps and the
//! stereo sensitivity table.
//!
//! Exit codes: 0 success, 2 usage or input validation error, 1 internal error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "COLLISION_PLANE_SEED";

#[derive(Debug, Parser)]
#[command(name = "collision-plane", version, about = "Monocular collision-plane estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario file into a track CSV and a ground-truth JSON.
    Simulate(SimulateArgs),
    /// Estimate epipoles, time to collision and miss distance per track.
    Estimate(EstimateArgs),
    /// Group tracks into independently moving objects.
    Cluster(ClusterArgs),
    /// Collision state over a grid of ego-velocity changes, as CSV.
    CollisionMap(CollisionMapArgs),
    /// Stereo versus collision-plane heading error over depth, as CSV.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_tracks: PathBuf,
    #[arg(long)]
    pub out_truth: PathBuf,
    /// Noise seed; overrides the scenario's `rng_seed`.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Pixel noise standard deviation; overrides the scenario's value.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Epipole where each track's flow line meets the horizon.
    Planar,
    /// Horizon intersection corrected by the three-frame offset angle.
    ThreeFrame,
    /// Least-squares epipole per motion cluster.
    LeastSquares,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Planar => "planar",
            Mode::ThreeFrame => "three-frame",
            Mode::LeastSquares => "least-squares",
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub tracks: PathBuf,
    /// Focal length and principal point in pixels: `f,u0,v0`.
    #[arg(long, value_parser = parse_triple)]
    pub intrinsics: [f64; 3],
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Horizon line `v = a*u + b` as `a,b`. Defaults to the level horizon `v = v0`.
    #[arg(long, value_parser = parse_pair, conflicts_with = "calibrate")]
    pub horizon: Option<[f64; 2]>,
    /// Fit the horizon through the epipoles of the clustered motions.
    #[arg(long)]
    pub calibrate: bool,
    /// Seed for clustering (least-squares mode and --calibrate).
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub eps_dist: f64,
    /// Pixel motion below which a track counts as constant bearing.
    #[arg(long, default_value_t = 0.05)]
    pub eps_px: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    pub tracks: PathBuf,
    #[arg(long, value_parser = parse_triple)]
    pub intrinsics: [f64; 3],
    /// Largest flow-line distance to a cluster epipole, in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub eps_dist: f64,
    /// Fixed TTC tolerance in frames. Default: max(1 frame, 10% of the cluster TTC).
    #[arg(long)]
    pub eps_ttc: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub min_size: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollisionMapArgs {
    pub scenario: PathBuf,
    /// `forward_extent,lateral_extent,forward_count,lateral_count`; each axis
    /// spans `[-extent, extent]` in per-frame velocity units.
    #[arg(long, value_parser = parse_grid)]
    pub grid: (f64, f64, usize, usize),
    /// Miss distance below which a pass counts as a collision.
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 15 cm baseline, 8 mm lens, 0.2 px detection error, 50 km/h at 45 degrees.
    HighwayApproach,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Focal length in millimetres; needs --pixel-pitch-um.
    #[arg(long, conflicts_with = "focal_px")]
    pub focal_mm: Option<f64>,
    /// Sensor pixel pitch in micrometres.
    #[arg(long)]
    pub pixel_pitch_um: Option<f64>,
    /// Focal length in pixels.
    #[arg(long)]
    pub focal_px: Option<f64>,
    #[arg(long)]
    pub baseline_m: Option<f64>,
    #[arg(long)]
    pub detection_error_px: Option<f64>,
    #[arg(long)]
    pub speed_kmh: Option<f64>,
    #[arg(long)]
    pub heading_deg: Option<f64>,
    #[arg(long)]
    pub frame_rate_hz: Option<f64>,
    #[arg(long)]
    pub frame_gap: Option<u32>,
    #[arg(long)]
    pub point_height_m: Option<f64>,
    /// Depths as `min,max,step` in metres.
    #[arg(long, value_parser = parse_triple)]
    pub depths: Option<[f64; 3]>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        let x: f64 = part.parse().map_err(|_| format!("not a number: {part:?}"))?;
        if !x.is_finite() {
            return Err(format!("not finite: {part:?}"));
        }
        *slot = x;
    }
    Ok(out)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [ef, el, nf, nl] = parts[..] else {
        return Err(format!("expected forward_extent,lateral_extent,forward_count,lateral_count, got {s:?}"));
    };
    let extent = |p: &str| p.parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0);
    let count = |p: &str| p.parse::<usize>().ok().filter(|n| *n >= 1);
    match (extent(ef), extent(el), count(nf), count(nl)) {
        (Some(ef), Some(el), Some(nf), Some(nl)) => Ok((ef, el, nf, nl)),
        _ => Err(format!("grid needs nonnegative extents and counts >= 1, got {s:?}")),
    }
}

/// Failure of a command, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or invalid input files.
    Usage(String),
    /// Anything else, e.g. an output file that cannot be written.
    Internal(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::CollisionMap(a) => commands::collision_map(a),
        Command::Sensitivity(a) => commands::sensitivity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
