//! Signed distance costmaps built from occupied masks, and the
//! per-trajectory statistics extracted from them.
//!
//! Distances are exact Euclidean distances between cell centers computed
//! with a separable lower-envelope transform (one pass per axis).
//! Convention: free cells are positive, occupied cells negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ConfidenceMaps, SemanticMasks};
use crate::geometry::{footprint_cells_into, Cell, Footprint, GridSpec, Pose2};
use crate::sim::SemanticClass;

pub const DEFAULT_CAP: f64 = 10.0;

/// Squared distance (in cells) to the nearest site along a 1D line.
fn edt_1d_binary(sites: impl Iterator<Item = bool> + Clone, n: usize, out: &mut [f64]) {
    let mut last: Option<usize> = None;
    for (i, s) in sites.clone().enumerate() {
        if s {
            last = Some(i);
        }
        out[i] = last.map_or(f64::INFINITY, |j| ((i - j) * (i - j)) as f64);
    }
    let flags: Vec<bool> = sites.collect();
    let mut next: Option<usize> = None;
    for i in (0..n).rev() {
        if flags[i] {
            next = Some(i);
        }
        if let Some(j) = next {
            out[i] = out[i].min(((j - i) * (j - i)) as f64);
        }
    }
}

/// Lower envelope of parabolas `g[q] + (p - q)^2` over finite `g` entries.
fn edt_1d_envelope(g: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &gq) in g.iter().enumerate() {
        if !gq.is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((gq + qf * qf) - (g[p] + pf * pf)) / (2.0 * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while k + 1 < v.len() && z[k + 1] < pf {
            k += 1;
        }
        let d = pf - v[k] as f64;
        *o = g[v[k]] + d * d;
    }
}

/// Exact squared Euclidean distance (in cell units) from every cell to the
/// nearest cell where `site` is true; infinite when there is none.
pub fn squared_edt(site: &[bool], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(site.len(), width * height);
    let mut cols = vec![0.0; width * height];
    let mut line = vec![0.0; height];
    for c in 0..width {
        edt_1d_binary((0..height).map(|r| site[r * width + c]), height, &mut line);
        for r in 0..height {
            cols[r * width + c] = line[r];
        }
    }
    let mut out = vec![0.0; width * height];
    let (mut v, mut z) = (Vec::with_capacity(width), Vec::with_capacity(width));
    for r in 0..height {
        let row = &cols[r * width..(r + 1) * width];
        edt_1d_envelope(row, &mut out[r * width..(r + 1) * width], &mut v, &mut z);
    }
    out
}

/// Unclamped signed distance in meters: `+d` to the nearest occupied cell
/// center for free cells, `-d` to the nearest free cell center for occupied
/// cells. Infinite when the opposite kind does not exist.
pub fn signed_distance(occupied: &[bool], width: usize, height: usize, resolution: f64) -> Vec<f64> {
    let free: Vec<bool> = occupied.iter().map(|o| !o).collect();
    let to_occupied = squared_edt(occupied, width, height);
    let to_free = squared_edt(&free, width, height);
    occupied
        .iter()
        .enumerate()
        .map(|(i, &occ)| {
            if occ {
                -to_free[i].sqrt() * resolution
            } else {
                to_occupied[i].sqrt() * resolution
            }
        })
        .collect()
}

/// Signed distance field clamped to `[-cap, cap]`.
pub fn sdf(occupied: &[bool], width: usize, height: usize, resolution: f64, cap: f64) -> Vec<f64> {
    let mut d = signed_distance(occupied, width, height, resolution);
    d.iter_mut().for_each(|v| *v = v.clamp(-cap, cap));
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extraction {
    Min,
    Max,
    Avg,
}

/// Reduces `plane` over `cells`. `None` when the footprint missed the grid;
/// each call site decides the neutral value.
pub fn extract<T: Copy + Into<f64>>(plane: &[T], spec: &GridSpec, cells: &[Cell], strategy: Extraction) -> Option<f64> {
    if cells.is_empty() {
        return None;
    }
    let values = cells.iter().map(|&c| plane[spec.index(c)].into());
    Some(match strategy {
        Extraction::Min => values.fold(f64::INFINITY, f64::min),
        Extraction::Max => values.fold(f64::NEG_INFINITY, f64::max),
        Extraction::Avg => values.sum::<f64>() / cells.len() as f64,
    })
}

/// Per-timestep SDF planes over a forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costmap {
    pub spec: GridSpec,
    pub horizon: usize,
    pub cap: f64,
    planes: Vec<f64>,
}

impl Costmap {
    pub fn from_masks(masks: &SemanticMasks, cap: f64) -> Self {
        let spec = masks.spec;
        let mut planes = Vec::with_capacity(masks.horizon * spec.len());
        for t in 0..masks.horizon {
            let occ = masks.binary(t, SemanticClass::Occupied);
            planes.extend(sdf(&occ, spec.width, spec.height, spec.resolution, cap));
        }
        Self { spec, horizon: masks.horizon, cap, planes }
    }

    pub fn plane(&self, t: usize) -> &[f64] {
        let n = self.spec.len();
        &self.planes[t * n..(t + 1) * n]
    }
}

/// Scalars one agent reports per candidate trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// `min_t` of the footprint-reduced SDF.
    pub score: f64,
    /// `max_t` of the footprint-average occupied mask.
    pub f_o: f64,
    /// `sum_t` of the footprint-average occupied confidence.
    pub p_o: f64,
    /// `sum_t` of the footprint-average shadow mask.
    pub f_s: f64,
    /// `sum_t` of the footprint-average shadow confidence.
    pub p_s: f64,
}

impl TrajectoryStats {
    pub const WIRE_SCALARS: usize = 5;
}

struct IndicatorPlane<'a>(&'a [SemanticClass], SemanticClass);

impl IndicatorPlane<'_> {
    fn avg(&self, spec: &GridSpec, cells: &[Cell]) -> f64 {
        if cells.is_empty() {
            return 0.0;
        }
        let hits = cells.iter().filter(|&&c| self.0[spec.index(c)] == self.1).count();
        hits as f64 / cells.len() as f64
    }
}

/// Scores one trajectory given in the costmap's anchor frame, using min
/// extraction for the SDF.
pub fn score_trajectory(
    cost: &Costmap,
    masks: &SemanticMasks,
    maps: &ConfidenceMaps,
    traj: &[Pose2],
    fp: &Footprint,
) -> Result<TrajectoryStats> {
    score_trajectory_with(cost, masks, maps, traj, fp, Extraction::Min)
}

pub fn score_trajectory_with(
    cost: &Costmap,
    masks: &SemanticMasks,
    maps: &ConfidenceMaps,
    traj: &[Pose2],
    fp: &Footprint,
    strategy: Extraction,
) -> Result<TrajectoryStats> {
    if traj.len() != cost.horizon {
        return Err(Error::LengthMismatch { expected: cost.horizon, actual: traj.len() });
    }
    if masks.horizon != cost.horizon || maps.horizon != cost.horizon {
        return Err(Error::LengthMismatch { expected: cost.horizon, actual: masks.horizon.min(maps.horizon) });
    }
    if masks.spec != cost.spec || maps.spec != cost.spec {
        return Err(Error::GridMismatch);
    }
    let spec = &cost.spec;
    let mut stats = TrajectoryStats { score: f64::INFINITY, f_o: 0.0, p_o: 0.0, f_s: 0.0, p_s: 0.0 };
    let mut cells = Vec::new();
    for (t, local) in traj.iter().enumerate() {
        footprint_cells_into(spec, &spec.center.compose(local), fp, &mut cells);
        // off-grid footprints are not penalized by the SDF
        let c_t = extract(cost.plane(t), spec, &cells, strategy).unwrap_or(cost.cap);
        stats.score = stats.score.min(c_t);
        let labels = masks.plane(t);
        stats.f_o = stats.f_o.max(IndicatorPlane(labels, SemanticClass::Occupied).avg(spec, &cells));
        stats.f_s += IndicatorPlane(labels, SemanticClass::Shadow).avg(spec, &cells);
        stats.p_o += extract(maps.plane(t, SemanticClass::Occupied), spec, &cells, Extraction::Avg).unwrap_or(0.0);
        stats.p_s += extract(maps.plane(t, SemanticClass::Shadow), spec, &cells, Extraction::Avg).unwrap_or(0.0);
    }
    if traj.is_empty() {
        stats.score = cost.cap;
    }
    Ok(stats)
}
