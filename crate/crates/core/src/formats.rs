//! File formats: track CSV, scenario and ground-truth JSON, result documents.
//!
//! Track files are CSV with the header `track_id,frame,u,v` and one row per
//! observation. Rows of one track must appear with consecutive frame numbers;
//! tracks may be interleaved. Result documents are JSON tagged `schema: 1`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::PixelPoint;
use crate::simulator::{GroundTruth, Scenario};
use crate::ttc::TrackObservation;

pub const SCHEMA_VERSION: u32 = 1;
pub const TRACK_HEADER: [&str; 4] = ["track_id", "frame", "u", "v"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    track_id: u32,
    frame: i64,
    u: f64,
    v: f64,
}

/// Reads a track CSV. Tracks are returned ordered by id.
pub fn read_tracks<R: Read>(reader: R) -> Result<Vec<TrackObservation>, FormatError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRACK_HEADER {
        return Err(FormatError::Invalid { line: 1, message: format!("expected header {}", TRACK_HEADER.join(",")) });
    }
    let mut grouped: BTreeMap<u32, (u64, Vec<(i64, PixelPoint)>)> = BTreeMap::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TrackRow = record.deserialize(Some(&header))?;
        if !(row.u.is_finite() && row.v.is_finite()) {
            return Err(FormatError::Invalid { line, message: "pixel coordinates must be finite".into() });
        }
        let entry = grouped.entry(row.track_id).or_insert_with(|| (line, Vec::new()));
        if let Some(&(prev, _)) = entry.1.last() {
            if row.frame != prev + 1 {
                return Err(FormatError::Invalid {
                    line,
                    message: format!("track {}: frame {} does not follow frame {prev}", row.track_id, row.frame),
                });
            }
        }
        entry.1.push((row.frame, PixelPoint::new(row.u, row.v)));
    }
    grouped
        .into_iter()
        .map(|(id, (line, frames))| {
            TrackObservation::new(id, frames).map_err(|e| FormatError::Invalid { line, message: e.to_string() })
        })
        .collect()
}

pub fn write_tracks<W: Write>(writer: W, tracks: &[TrackObservation]) -> Result<(), FormatError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TRACK_HEADER)?;
    for track in tracks {
        for (frame, p) in track.frames() {
            csv.write_record([track.track_id().to_string(), frame.to_string(), p.u.to_string(), p.v.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Parses and validates a scenario; errors carry the JSON line and column.
pub fn read_scenario<R: Read>(reader: R) -> Result<Scenario, FormatError> {
    Ok(serde_json::from_reader(reader)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema: u32,
    pub seed: u64,
    pub pixel_noise_sigma: f64,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRecord {
    pub point: [f64; 2],
    pub direction: [f64; 2],
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: f64,
    /// `given`, `level` or `calibrated`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpipoleRecord {
    /// What the epipole belongs to, e.g. `track:4`, `cluster:0`, `all`.
    pub label: String,
    pub u: f64,
    pub v: f64,
    pub method: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub track_ids: Vec<u32>,
    pub epipole: [f64; 2],
    pub epipole_residual: f64,
    pub ttc_values: Vec<f64>,
    pub mean_ttc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub track_id: u32,
    /// `ok` or a snake_case failure kind such as `stationary_point`.
    pub status: String,
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub classification: Option<String>,
    pub epipole: Option<[f64; 2]>,
    pub offset_angle: Option<f64>,
    pub three_frame_residual: Option<f64>,
    pub message: Option<String>,
}

impl EstimateRecord {
    pub fn failed(track_id: u32, status: &str, message: String) -> Self {
        Self {
            track_id,
            status: status.to_owned(),
            k: None,
            h: None,
            classification: None,
            epipole: None,
            offset_angle: None,
            three_frame_residual: None,
            message: Some(message),
        }
    }
}

/// Structured output of the estimation and clustering commands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: u32,
    pub command: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, serde_json::Value>,
    pub horizon: Option<HorizonRecord>,
    pub epipoles: Vec<EpipoleRecord>,
    pub clusters: Vec<ClusterRecord>,
    pub outliers: Vec<u32>,
    pub estimates: Vec<EstimateRecord>,
    pub residuals: BTreeMap<String, f64>,
}

impl ResultDocument {
    pub fn new(command: &str) -> Self {
        Self { schema: SCHEMA_VERSION, command: command.to_owned(), ..Self::default() }
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        let doc: Self = serde_json::from_str(s)?;
        if doc.schema != SCHEMA_VERSION {
            return Err(FormatError::Invalid { line: 1, message: format!("unsupported schema {}", doc.schema) });
        }
        Ok(doc)
    }
}

/// Maps a float to `None` when it cannot be represented in JSON.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
