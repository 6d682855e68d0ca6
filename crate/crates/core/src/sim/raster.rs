//! Semantic BEV observation rasters rendered from a viewer's perspective.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridSpec, Pose2};
use crate::sim::lidar::{raycast, slab_interval, LidarScan, Obstacle};
use crate::sim::tracks::{ActorState, TrackSet};
use crate::ActorId;

/// The four per-cell labels. The discriminant is the on-disk byte value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
#[repr(u8)]
pub enum SemanticClass {
    Empty = 0,
    Occupied = 1,
    Shadow = 2,
    OutOfRange = 3,
}

impl SemanticClass {
    /// Canonical channel order used by confidence maps and exports.
    pub const ALL: [SemanticClass; 4] =
        [SemanticClass::Empty, SemanticClass::Occupied, SemanticClass::Shadow, SemanticClass::OutOfRange];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Empty => "empty",
            SemanticClass::Occupied => "occupied",
            SemanticClass::Shadow => "shadow",
            SemanticClass::OutOfRange => "outOfRange",
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { n_rays: 360, max_range: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRaster {
    pub spec: GridSpec,
    pub cells: Vec<SemanticClass>,
}

impl ObservationRaster {
    pub fn filled(spec: GridSpec, class: SemanticClass) -> Self {
        Self { spec, cells: vec![class; spec.len()] }
    }

    pub fn get(&self, cell: Cell) -> SemanticClass {
        self.cells[self.spec.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, class: SemanticClass) {
        let i = self.spec.index(cell);
        self.cells[i] = class;
    }

    /// Number of cells per class, in [`SemanticClass::ALL`] order.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for c in &self.cells {
            counts[c.channel()] += 1;
        }
        counts
    }

    pub fn mask(&self, class: SemanticClass) -> Vec<bool> {
        self.cells.iter().map(|&c| c == class).collect()
    }

    /// Binary PGM with max value 3, one byte per cell holding the class
    /// value; the first image row is the grid's top row (largest y).
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut out = format!("P5\n{w} {h}\n3\n").into_bytes();
        for row in (0..h).rev() {
            out.extend(self.cells[row * w..(row + 1) * w].iter().map(|&c| c as u8));
        }
        out
    }

    pub fn from_pgm(spec: GridSpec, bytes: &[u8]) -> Result<Self> {
        let header = format!("P5\n{} {}\n3\n", spec.width, spec.height);
        let body = bytes
            .strip_prefix(header.as_bytes())
            .ok_or_else(|| Error::InvalidInput("PGM header does not match grid".into()))?;
        if body.len() != spec.len() {
            return Err(Error::LengthMismatch { expected: spec.len(), actual: body.len() });
        }
        let mut cells = vec![SemanticClass::Empty; spec.len()];
        for (i, row) in body.chunks(spec.width).enumerate() {
            let r = spec.height - 1 - i;
            for (col, &b) in row.iter().enumerate() {
                cells[r * spec.width + col] = SemanticClass::from_u8(b)
                    .ok_or_else(|| Error::InvalidInput(format!("bad class byte {b}")))?;
            }
        }
        Ok(Self { spec, cells })
    }
}

/// Rectangles of every actor in `frame` except `viewer`.
pub fn obstacles_excluding(frame: &[ActorState], viewer: ActorId) -> Vec<Obstacle> {
    frame
        .iter()
        .filter(|a| a.actor_id != viewer)
        .map(|a| Obstacle { id: a.actor_id, pose: a.pose, footprint: a.footprint })
        .collect()
}

pub fn scan_frame(viewer: &ActorState, frame: &[ActorState], sensor: &SensorConfig) -> LidarScan {
    raycast(&viewer.pose, &obstacles_excluding(frame, viewer.actor_id), sensor.n_rays, sensor.max_range)
}

/// Options beyond the plain viewer-relative rendering.
#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Actors whose footprint cells are labeled empty, like the viewer's own.
    /// They still block line of sight.
    pub transparent: Vec<ActorId>,
    /// Ignore occlusion and range: every actor is seen.
    pub omniscient: bool,
}

/// Labels each cell as outOfRange (center beyond sensor range), occupied
/// (inside a non-viewer actor and in line of sight), shadow (line of sight
/// blocked by another actor before the cell) or empty.
pub fn render_observation(
    viewer: &ActorState,
    frame: &[ActorState],
    scan: &LidarScan,
    spec: &GridSpec,
) -> ObservationRaster {
    render_observation_with(viewer, frame, scan, spec, &RenderOptions::default())
}

pub fn render_observation_with(
    viewer: &ActorState,
    frame: &[ActorState],
    scan: &LidarScan,
    spec: &GridSpec,
    opts: &RenderOptions,
) -> ObservationRaster {
    let origin = scan.origin;
    let max_range = scan.max_range;
    let obstacles = obstacles_excluding(frame, viewer.actor_id);
    let self_shapes: Vec<&ActorState> = frame
        .iter()
        .filter(|a| a.actor_id == viewer.actor_id || opts.transparent.contains(&a.actor_id))
        .collect();
    let radii: Vec<f64> = obstacles.iter().map(|o| o.footprint.circumradius()).collect();

    let mut cells = Vec::with_capacity(spec.len());
    let mut containing: Vec<usize> = Vec::with_capacity(4);
    for cell in spec.cells() {
        let (cx, cy) = spec.cell_center(cell);
        let (vx, vy) = (cx - origin.x, cy - origin.y);
        let dist = vx.hypot(vy);
        if !opts.omniscient && dist > max_range {
            cells.push(SemanticClass::OutOfRange);
            continue;
        }
        if self_shapes.iter().any(|a| a.footprint.contains(&a.pose, cx, cy)) {
            cells.push(SemanticClass::Empty);
            continue;
        }
        containing.clear();
        for (j, o) in obstacles.iter().enumerate() {
            if (cx - o.pose.x).abs() <= radii[j]
                && (cy - o.pose.y).abs() <= radii[j]
                && o.footprint.contains(&o.pose, cx, cy)
            {
                containing.push(j);
            }
        }
        if opts.omniscient {
            cells.push(if containing.is_empty() { SemanticClass::Empty } else { SemanticClass::Occupied });
            continue;
        }
        let occluded = dist > 0.0 && {
            let (ux, uy) = (vx / dist, vy / dist);
            obstacles.iter().enumerate().any(|(j, o)| {
                if containing.contains(&j) {
                    return false;
                }
                // distance from obstacle center to the segment, for culling
                let (px, py) = (o.pose.x - origin.x, o.pose.y - origin.y);
                let t = (px * ux + py * uy).clamp(0.0, dist);
                if (px - t * ux).hypot(py - t * uy) > radii[j] {
                    return false;
                }
                match slab_interval(origin.x, origin.y, ux, uy, &o.pose, &o.footprint) {
                    Some((t0, t1)) => t1 >= 0.0 && t0.max(0.0) < dist,
                    None => false,
                }
            })
        };
        cells.push(match (containing.is_empty(), occluded) {
            (false, false) => SemanticClass::Occupied,
            (_, true) => SemanticClass::Shadow,
            (true, false) => SemanticClass::Empty,
        });
    }
    ObservationRaster { spec: *spec, cells }
}

fn viewer_in(tracks: &TrackSet, viewer_id: ActorId, k: usize) -> Result<&ActorState> {
    tracks.actor(k, viewer_id).ok_or(Error::ViewerAbsent { actor: viewer_id, frame: k })
}

/// One raster per frame in `k0..=k1`, all sharing `spec`.
pub fn observation_sequence(
    tracks: &TrackSet,
    viewer_id: ActorId,
    k0: usize,
    k1: usize,
    spec: &GridSpec,
    sensor: &SensorConfig,
) -> Result<Vec<ObservationRaster>> {
    observation_sequence_with(tracks, viewer_id, k0, k1, spec, sensor, &RenderOptions::default())
}

pub fn observation_sequence_with(
    tracks: &TrackSet,
    viewer_id: ActorId,
    k0: usize,
    k1: usize,
    spec: &GridSpec,
    sensor: &SensorConfig,
    opts: &RenderOptions,
) -> Result<Vec<ObservationRaster>> {
    (k0..=k1)
        .map(|k| {
            let viewer = viewer_in(tracks, viewer_id, k)?;
            let frame = tracks.frame(k);
            let scan = scan_frame(viewer, frame, sensor);
            Ok(render_observation_with(viewer, frame, &scan, spec, opts))
        })
        .collect()
}

/// Actors other than the viewer returning at least one lidar ray in at
/// least one frame of `k0..=k1`.
pub fn visible_actor_ids(
    tracks: &TrackSet,
    viewer_id: ActorId,
    k0: usize,
    k1: usize,
    sensor: &SensorConfig,
) -> Result<BTreeSet<ActorId>> {
    let mut seen = BTreeSet::new();
    for k in k0..=k1 {
        let viewer = viewer_in(tracks, viewer_id, k)?;
        let scan = scan_frame(viewer, tracks.frame(k), sensor);
        seen.extend(scan.hits.iter().flatten().copied());
    }
    Ok(seen)
}

/// Anchor for a viewer's raster stack: the viewer position at `k`, with
/// axes aligned to the global frame.
pub fn anchor_spec(tracks: &TrackSet, viewer_id: ActorId, k: usize, template: &GridSpec) -> Result<GridSpec> {
    let v = viewer_in(tracks, viewer_id, k)?;
    Ok(template.with_center(Pose2::new(v.pose.x, v.pose.y, 0.0)))
}
