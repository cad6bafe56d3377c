use serde::{Deserialize, Serialize};

use super::{simulate, Scenario};
use crate::error::{Error, Result};

/// Evenly spaced samples over `[min, max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    /// `count` samples over `[-extent, extent]`.
    pub fn symmetric(extent: f64, count: usize) -> Self {
        Self { min: -extent, max: extent, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            return 0.5 * (self.min + self.max);
        }
        // Mirror around the midpoint so symmetric axes hit zero exactly.
        let t = i as f64 / (self.count - 1) as f64;
        if t <= 0.5 {
            self.min + (self.max - self.min) * t
        } else {
            self.max - (self.max - self.min) * (1.0 - t)
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(Error::InvalidInput(format!("{name} axis needs count >= 1 and finite min <= max")));
        }
        Ok(())
    }
}

/// Ego-velocity perturbations: forward is added to the camera's Z velocity,
/// lateral to its X velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub forward: GridAxis,
    pub lateral: GridAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionCell {
    pub forward_dv: f64,
    pub lateral_dv: f64,
    /// Smallest positive collision time over all points, in frames.
    pub min_ttc: Option<f64>,
    /// Miss distance of that point in per-frame displacements.
    pub h: Option<f64>,
    /// Metric miss distance of that point.
    pub miss_distance: Option<f64>,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionMap {
    pub grid: GridSpec,
    pub collision_radius: f64,
    /// Row-major: forward index outer, lateral index inner.
    pub cells: Vec<CollisionCell>,
}

impl CollisionMap {
    pub fn cell(&self, forward_index: usize, lateral_index: usize) -> &CollisionCell {
        &self.cells[forward_index * self.grid.lateral.count + lateral_index]
    }
}

/// Collision state for every ego-velocity change on the grid.
///
/// A cell flags a collision when some point's collision plane reaches the
/// focal point within the scenario's `frame_count` frames (`0 < k <= frames`)
/// and passes it closer than `collision_radius`.
pub fn collision_map(scenario: &Scenario, grid: &GridSpec, collision_radius: f64) -> Result<CollisionMap> {
    grid.forward.validate("forward")?;
    grid.lateral.validate("lateral")?;
    if !(collision_radius > 0.0 && collision_radius.is_finite()) {
        return Err(Error::InvalidInput("collision radius must be positive".into()));
    }
    scenario.validate()?;
    let horizon = scenario.frame_count as f64;

    let mut cells = Vec::with_capacity(grid.forward.count * grid.lateral.count);
    for forward_dv in grid.forward.values() {
        for lateral_dv in grid.lateral.values() {
            let shifted =
                Scenario { pixel_noise_sigma: 0.0, ..scenario.with_camera_delta([lateral_dv, 0.0, forward_dv]) };
            let truth = simulate(&shifted)?.truth;
            let mut cell =
                CollisionCell { forward_dv, lateral_dv, min_ttc: None, h: None, miss_distance: None, collision: false };
            for p in &truth.points {
                let (Some(k), Some(h), Some(miss)) = (p.k, p.h, p.miss_distance) else {
                    continue;
                };
                if !(k > 0.0) {
                    continue;
                }
                if cell.min_ttc.is_none_or(|m| k < m) {
                    cell.min_ttc = Some(k);
                    cell.h = Some(h);
                    cell.miss_distance = Some(miss);
                }
                if k <= horizon && miss < collision_radius {
                    cell.collision = true;
                }
            }
            cells.push(cell);
        }
    }
    Ok(CollisionMap { grid: *grid, collision_radius, cells })
}
