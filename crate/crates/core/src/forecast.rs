//! Per-class temporal confidence maps and their argmax semantic masks.
//!
//! Two forecasters are provided: a one-hot oracle that forwards rendered
//! future observations, and a constant-velocity persistence heuristic.
//! Anything implementing [`Forecaster`] can be plugged in instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridSpec};
use crate::sim::{ObservationRaster, SemanticClass};

const N_CLASSES: usize = 4;

/// Confidences per timestep, per class, per cell. Channel order follows
/// [`SemanticClass::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMaps {
    pub spec: GridSpec,
    pub horizon: usize,
    values: Vec<f32>,
}

impl ConfidenceMaps {
    pub fn zeros(spec: GridSpec, horizon: usize) -> Self {
        Self { spec, horizon, values: vec![0.0; horizon * N_CLASSES * spec.len()] }
    }

    pub fn from_values(spec: GridSpec, horizon: usize, values: Vec<f32>) -> Result<Self> {
        let expected = horizon * N_CLASSES * spec.len();
        if values.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: values.len() });
        }
        Ok(Self { spec, horizon, values })
    }

    /// Timestep index `t` is zero-based: plane 0 is the first future step.
    pub fn plane(&self, t: usize, class: SemanticClass) -> &[f32] {
        let n = self.spec.len();
        let start = (t * N_CLASSES + class.channel()) * n;
        &self.values[start..start + n]
    }

    pub fn plane_mut(&mut self, t: usize, class: SemanticClass) -> &mut [f32] {
        let n = self.spec.len();
        let start = (t * N_CLASSES + class.channel()) * n;
        &mut self.values[start..start + n]
    }

    pub fn get(&self, t: usize, class: SemanticClass, idx: usize) -> f32 {
        self.plane(t, class)[idx]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Writes the same class distribution to one cell.
    fn set_cell(&mut self, t: usize, idx: usize, dist: [f32; N_CLASSES]) {
        for class in SemanticClass::ALL {
            self.plane_mut(t, class)[idx] = dist[class.channel()];
        }
    }

    /// Largest deviation of a per-cell class sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        let n = self.spec.len();
        let mut worst = 0.0f64;
        for t in 0..self.horizon {
            for idx in 0..n {
                let s: f64 = SemanticClass::ALL.iter().map(|&c| self.get(t, c, idx) as f64).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// Argmax labels per timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMasks {
    pub spec: GridSpec,
    pub horizon: usize,
    pub cells: Vec<SemanticClass>,
}

impl SemanticMasks {
    pub fn plane(&self, t: usize) -> &[SemanticClass] {
        let n = self.spec.len();
        &self.cells[t * n..(t + 1) * n]
    }

    pub fn binary(&self, t: usize, class: SemanticClass) -> Vec<bool> {
        self.plane(t).iter().map(|&c| c == class).collect()
    }
}

pub trait Forecaster: Send + Sync {
    /// Forecasts the planning horizon from an aligned observation history.
    fn forecast(&self, history: &[ObservationRaster]) -> Result<ConfidenceMaps>;
}

fn shared_spec(rasters: &[ObservationRaster]) -> Result<GridSpec> {
    let first = rasters
        .first()
        .ok_or_else(|| Error::InvalidInput("empty observation list".into()))?;
    if rasters.iter().any(|r| r.spec != first.spec) {
        return Err(Error::GridMismatch);
    }
    Ok(first.spec)
}

fn one_hot(class: SemanticClass) -> [f32; N_CLASSES] {
    let mut d = [0.0; N_CLASSES];
    d[class.channel()] = 1.0;
    d
}

/// One-hot confidences reproducing `truth` (rasters for future steps
/// `1..=T+`, rendered from the same viewer).
pub fn forecast_oracle(truth: &[ObservationRaster]) -> Result<ConfidenceMaps> {
    let spec = shared_spec(truth)?;
    let mut maps = ConfidenceMaps::zeros(spec, truth.len());
    for (t, raster) in truth.iter().enumerate() {
        for (idx, &class) in raster.cells.iter().enumerate() {
            maps.set_cell(t, idx, one_hot(class));
        }
    }
    Ok(maps)
}

/// Deterministic argmax; ties resolve occupied > shadow > empty > outOfRange.
pub fn to_masks(maps: &ConfidenceMaps) -> SemanticMasks {
    const PRIORITY: [SemanticClass; 4] =
        [SemanticClass::Occupied, SemanticClass::Shadow, SemanticClass::Empty, SemanticClass::OutOfRange];
    let n = maps.spec.len();
    let mut cells = Vec::with_capacity(maps.horizon * n);
    for t in 0..maps.horizon {
        let planes = PRIORITY.map(|c| maps.plane(t, c));
        cells.extend((0..n).map(|idx| {
            let best = (1..PRIORITY.len()).fold(0, |b, k| if planes[k][idx] > planes[b][idx] { k } else { b });
            PRIORITY[best]
        }));
    }
    SemanticMasks { spec: maps.spec, horizon: maps.horizon, cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceConfig {
    pub horizon: usize,
    /// Confidence on occupied for propagated cells.
    pub occupied: f32,
    /// Confidence kept on shadow / outOfRange carried over from the last frame.
    pub persisted: f32,
    /// Confidence on empty everywhere else.
    pub empty: f32,
    /// Largest centroid displacement (cells) accepted as the same object.
    pub max_match_cells: f64,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        Self { horizon: 10, occupied: 0.9, persisted: 0.8, empty: 0.9, max_match_cells: 10.0 }
    }
}

/// Constant-velocity propagation of occupied components.
#[derive(Debug, Clone, Default)]
pub struct Persistence {
    pub config: PersistenceConfig,
}

struct Component {
    cells: Vec<Cell>,
    centroid: (f64, f64),
}

/// 8-connected components of `mask`, in row-major order of their first cell.
fn components(spec: &GridSpec, mask: &[bool]) -> Vec<Component> {
    let mut label = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        label[start] = true;
        stack.push(start);
        let mut cells = Vec::new();
        while let Some(i) = stack.pop() {
            let c = spec.cell_of_index(i);
            cells.push(c);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (r, cc) = (c.row as i64 + dr, c.col as i64 + dc);
                    if r < 0 || cc < 0 || r >= spec.height as i64 || cc >= spec.width as i64 {
                        continue;
                    }
                    let j = r as usize * spec.width + cc as usize;
                    if mask[j] && !label[j] {
                        label[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        cells.sort();
        let n = cells.len() as f64;
        let centroid = (
            cells.iter().map(|c| c.row as f64).sum::<f64>() / n,
            cells.iter().map(|c| c.col as f64).sum::<f64>() / n,
        );
        out.push(Component { cells, centroid });
    }
    out
}

impl Forecaster for Persistence {
    fn forecast(&self, history: &[ObservationRaster]) -> Result<ConfidenceMaps> {
        if history.len() < 2 {
            return Err(Error::InsufficientHistory { needed: 2, got: history.len() });
        }
        let spec = shared_spec(history)?;
        let cfg = &self.config;
        let last = &history[history.len() - 1];
        let prev = &history[history.len() - 2];
        let now = components(&spec, &last.mask(SemanticClass::Occupied));
        let before = components(&spec, &prev.mask(SemanticClass::Occupied));

        // velocity in cells/frame, from the nearest previous centroid
        let velocities: Vec<(f64, f64)> = now
            .iter()
            .map(|comp| {
                before
                    .iter()
                    .map(|b| (comp.centroid.0 - b.centroid.0, comp.centroid.1 - b.centroid.1))
                    .filter(|d| d.0.hypot(d.1) <= cfg.max_match_cells)
                    .min_by(|a, b| a.0.hypot(a.1).total_cmp(&b.0.hypot(b.1)))
                    .unwrap_or((0.0, 0.0))
            })
            .collect();

        let spread = |main: f32| (1.0 - main) / 3.0;
        let dist = |class: SemanticClass, main: f32| {
            let mut d = [spread(main); N_CLASSES];
            d[class.channel()] = main;
            d
        };
        let occupied = dist(SemanticClass::Occupied, cfg.occupied);
        let empty = dist(SemanticClass::Empty, cfg.empty);
        let shadow = dist(SemanticClass::Shadow, cfg.persisted);
        let out_of_range = dist(SemanticClass::OutOfRange, cfg.persisted);

        let mut maps = ConfidenceMaps::zeros(spec, cfg.horizon);
        for t in 0..cfg.horizon {
            for (idx, &class) in last.cells.iter().enumerate() {
                let d = match class {
                    SemanticClass::Shadow => shadow,
                    SemanticClass::OutOfRange => out_of_range,
                    _ => empty,
                };
                maps.set_cell(t, idx, d);
            }
            let steps = (t + 1) as f64;
            for (comp, v) in now.iter().zip(&velocities) {
                let (dr, dc) = ((steps * v.0).round() as i64, (steps * v.1).round() as i64);
                for c in &comp.cells {
                    let (r, cc) = (c.row as i64 + dr, c.col as i64 + dc);
                    if r < 0 || cc < 0 || r >= spec.height as i64 || cc >= spec.width as i64 {
                        continue;
                    }
                    maps.set_cell(t, r as usize * spec.width + cc as usize, occupied);
                }
            }
        }
        Ok(maps)
    }
}
