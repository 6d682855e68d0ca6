//! Planar geometry shared by every other module: poses, grid indexing,
//! footprint rasterization and oriented-rectangle overlap.
//!
//! All functions here are pure and allocation-light so they can be called
//! from any thread.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2*pi for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// A planar pose: position in meters and heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    /// `b` expressed through frame `self`: rotate by `self.theta`, then
    /// translate by `(self.x, self.y)`.
    pub fn compose(&self, b: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * b.x - s * b.y,
            self.y + s * b.x + c * b.y,
            self.theta + b.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// Pose of `b` relative to `self`, i.e. `self⁻¹ ∘ b`.
    pub fn relative(&self, b: &Pose2) -> Pose2 {
        self.inverse().compose(b)
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Maps a point from the parent frame into this pose's local frame.
    pub fn inverse_transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (px - self.x, py - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn distance_to(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Rectangular vehicle or pedestrian footprint, centered on its pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// Extent along the heading.
    pub length: f64,
    /// Extent across the heading.
    pub width: f64,
}

impl Footprint {
    pub const VEHICLE: Footprint = Footprint { length: 4.5, width: 2.0 };
    pub const PEDESTRIAN: Footprint = Footprint { length: 0.6, width: 0.6 };

    pub fn new(length: f64, width: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "footprint dimensions must be positive, got {length}x{width}"
            )));
        }
        Ok(Self { length, width })
    }

    /// Membership test for a point already expressed in the footprint frame.
    ///
    /// Intervals are half-open (`[-l/2, l/2)`) so that a grid of cell
    /// centers is partitioned without double counting shared boundaries.
    #[inline]
    pub fn contains_local(&self, lx: f64, ly: f64) -> bool {
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        lx >= -hl && lx < hl && ly >= -hw && ly < hw
    }

    pub fn contains(&self, pose: &Pose2, px: f64, py: f64) -> bool {
        let (lx, ly) = pose.inverse_transform_point(px, py);
        self.contains_local(lx, ly)
    }

    /// Corners in counter-clockwise order, in the parent frame of `pose`.
    pub fn corners(&self, pose: &Pose2) -> [(f64, f64); 4] {
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [
            pose.transform_point(hl, hw),
            pose.transform_point(-hl, hw),
            pose.transform_point(-hl, -hw),
            pose.transform_point(hl, -hw),
        ]
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

/// Integer cell coordinate; `col` grows with local x, `row` with local y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

/// Discretization of a square-celled raster anchored at `center`.
///
/// The grid is axis-aligned with the anchor frame; scenario rasters use an
/// anchor with `theta = 0` so their axes follow the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: Pose2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(center: Pose2, resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "grid needs positive resolution and size, got {resolution} m, {width}x{height}"
            )));
        }
        Ok(Self { center, resolution, width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_of_index(&self, idx: usize) -> Cell {
        Cell { row: idx / self.width, col: idx % self.width }
    }

    /// Cell center in the anchor-local frame.
    #[inline]
    pub fn cell_center_local(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.col as f64 + 0.5 - 0.5 * self.width as f64) * self.resolution,
            (cell.row as f64 + 0.5 - 0.5 * self.height as f64) * self.resolution,
        )
    }

    /// Cell center in the world frame.
    #[inline]
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        let (lx, ly) = self.cell_center_local(cell);
        self.center.transform_point(lx, ly)
    }

    /// Fractional cell coordinates `(col, row)` of a local point.
    #[inline]
    fn local_to_fractional(&self, lx: f64, ly: f64) -> (f64, f64) {
        (
            lx / self.resolution + 0.5 * self.width as f64,
            ly / self.resolution + 0.5 * self.height as f64,
        )
    }

    pub fn local_to_cell(&self, lx: f64, ly: f64) -> Option<Cell> {
        let (fc, fr) = self.local_to_fractional(lx, ly);
        if fc < 0.0 || fr < 0.0 {
            return None;
        }
        let (col, row) = (fc.floor() as usize, fr.floor() as usize);
        (col < self.width && row < self.height).then_some(Cell { row, col })
    }

    /// The cell containing a world point, if in bounds.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<Cell> {
        let (lx, ly) = self.center.inverse_transform_point(x, y);
        self.local_to_cell(lx, ly)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| Cell { row, col }))
    }

    /// Re-anchors the same raster geometry on a new center.
    pub fn with_center(&self, center: Pose2) -> GridSpec {
        GridSpec { center, ..*self }
    }
}

/// In-bounds cells whose centers fall inside the footprint rectangle placed
/// at `pose` (world frame), in row-major order.
pub fn footprint_cells(spec: &GridSpec, pose: &Pose2, fp: &Footprint) -> Vec<Cell> {
    let mut out = Vec::new();
    footprint_cells_into(spec, pose, fp, &mut out);
    out
}

/// Buffer-reusing variant of [`footprint_cells`].
pub fn footprint_cells_into(spec: &GridSpec, pose: &Pose2, fp: &Footprint, out: &mut Vec<Cell>) {
    out.clear();
    // Work in the grid's local frame; the footprint pose there is:
    let local = spec.center.relative(pose);
    let corners = fp.corners(&local);
    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (cx, cy) in corners {
        min_x = min_x.min(cx);
        max_x = max_x.max(cx);
        min_y = min_y.min(cy);
        max_y = max_y.max(cy);
    }
    let (c0, r0) = spec.local_to_fractional(min_x, min_y);
    let (c1, r1) = spec.local_to_fractional(max_x, max_y);
    // pad by one cell to stay clear of rounding at the box edges
    let col_lo = (c0.floor() - 1.0).max(0.0);
    let row_lo = (r0.floor() - 1.0).max(0.0);
    let col_hi = (c1.ceil() + 1.0).min(spec.width as f64);
    let row_hi = (r1.ceil() + 1.0).min(spec.height as f64);
    if col_lo >= col_hi || row_lo >= row_hi {
        return;
    }
    let (s, c) = local.theta.sin_cos();
    for row in row_lo as usize..row_hi as usize {
        for col in col_lo as usize..col_hi as usize {
            let cell = Cell { row, col };
            let (px, py) = spec.cell_center_local(cell);
            let (dx, dy) = (px - local.x, py - local.y);
            if fp.contains_local(c * dx + s * dy, -s * dx + c * dy) {
                out.push(cell);
            }
        }
    }
}

fn project(corners: &[(f64, f64); 4], ax: f64, ay: f64) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
        let p = x * ax + y * ay;
        (lo.min(p), hi.max(p))
    })
}

/// Separating-axis test for two oriented rectangles. Touching boundaries
/// count as overlap.
pub fn rectangles_overlap(pose_a: &Pose2, fp_a: &Footprint, pose_b: &Pose2, fp_b: &Footprint) -> bool {
    let reach = fp_a.circumradius() + fp_b.circumradius();
    if pose_a.distance_to(pose_b) > reach + 1e-9 {
        return false;
    }
    let ca = fp_a.corners(pose_a);
    let cb = fp_b.corners(pose_b);
    let axes = [pose_a.theta, pose_a.theta + 0.5 * PI, pose_b.theta, pose_b.theta + 0.5 * PI];
    for angle in axes {
        let (ay, ax) = angle.sin_cos();
        let (alo, ahi) = project(&ca, ax, ay);
        let (blo, bhi) = project(&cb, ax, ay);
        // small slack keeps exact edge contact from flipping on rounding
        if ahi < blo - 1e-9 || bhi < alo - 1e-9 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_pose_eq(a: Pose2, b: Pose2, tol: f64) {
        assert_abs_diff_eq!(a.x, b.x, epsilon = tol);
        assert_abs_diff_eq!(a.y, b.y, epsilon = tol);
        assert_abs_diff_eq!(normalize_angle(a.theta - b.theta), 0.0, epsilon = tol);
    }

    /// 3x3 homogeneous-matrix oracle for composition.
    fn homogeneous(p: &Pose2) -> [[f64; 3]; 3] {
        let (s, c) = p.theta.sin_cos();
        [[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]]
    }

    fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn pose_of(m: [[f64; 3]; 3]) -> Pose2 {
        Pose2::new(m[0][2], m[1][2], m[1][0].atan2(m[0][0]))
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-0.5), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normalize_angle(7.0), 7.0 - 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn compose_examples() {
        let id = Pose2::IDENTITY;
        assert_pose_eq(id.compose(&Pose2::new(3.0, 4.0, 0.5)), Pose2::new(3.0, 4.0, 0.5), 1e-12);
        let r = Pose2::new(2.0, 3.0, PI / 2.0).compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_pose_eq(r, Pose2::new(2.0, 4.0, PI / 2.0), 1e-12);

        let a = Pose2::new(1.0, 1.0, PI / 4.0);
        let b = Pose2::new(2f64.sqrt(), 0.0, PI / 4.0);
        let oracle = pose_of(matmul(homogeneous(&a), homogeneous(&b)));
        assert_pose_eq(oracle, Pose2::new(2.0, 2.0, PI / 2.0), 1e-12);
        assert_pose_eq(a.compose(&b), oracle, 1e-12);
    }

    #[test]
    fn axis_aligned_footprint_covers_two_cells() {
        let spec = GridSpec::new(Pose2::IDENTITY, 1.0, 10, 10).unwrap();
        let (cx, cy) = spec.cell_center(Cell { row: 4, col: 4 });
        let cells = footprint_cells(&spec, &Pose2::new(cx, cy, 0.0), &Footprint::new(2.0, 1.0).unwrap());
        assert_eq!(cells.len(), 2);
        assert_eq!(cells, vec![Cell { row: 4, col: 3 }, Cell { row: 4, col: 4 }]);
    }

    #[test]
    fn footprint_outside_grid_is_empty() {
        let spec = GridSpec::new(Pose2::IDENTITY, 1.0, 10, 10).unwrap();
        let cells = footprint_cells(&spec, &Pose2::new(100.0, -40.0, 0.3), &Footprint::VEHICLE);
        assert!(cells.is_empty());
    }

    fn brute_force_cells(spec: &GridSpec, pose: &Pose2, fp: &Footprint) -> Vec<Cell> {
        spec.cells()
            .filter(|&c| {
                let (x, y) = spec.cell_center(c);
                fp.contains(pose, x, y)
            })
            .collect()
    }

    #[test]
    fn rotated_footprint_matches_exhaustive_scan() {
        let spec = GridSpec::new(Pose2::new(1.0, -2.0, 0.0), 0.5, 40, 30).unwrap();
        let pose = Pose2::new(2.3, -1.1, 30f64.to_radians());
        let fp = Footprint::VEHICLE;
        let cells = footprint_cells(&spec, &pose, &fp);
        assert!(!cells.is_empty());
        assert_eq!(cells, brute_force_cells(&spec, &pose, &fp));
    }

    #[test]
    fn overlap_examples() {
        let fp = Footprint::new(2.0, 2.0).unwrap();
        let p = Pose2::new(1.0, 2.0, 0.4);
        assert!(rectangles_overlap(&p, &fp, &p, &fp));
        assert!(!rectangles_overlap(&p, &fp, &Pose2::new(101.0, 2.0, 0.0), &fp));
        // edge contact
        let a = Pose2::new(0.0, 0.0, 0.0);
        let b = Pose2::new(2.0, 0.0, 0.0);
        assert!(rectangles_overlap(&a, &fp, &b, &fp));
        assert!(sampled_overlap(&a, &fp, &b, &fp));
        let c = Pose2::new(2.01, 0.0, 0.0);
        assert!(!rectangles_overlap(&a, &fp, &c, &fp));
        assert!(!sampled_overlap(&a, &fp, &c, &fp));
    }

    /// Dense point sampling of rectangle `a` (boundary included), each
    /// tested against closed rectangle `b`.
    fn sampled_overlap(pa: &Pose2, fa: &Footprint, pb: &Pose2, fb: &Footprint) -> bool {
        let n = 200;
        for i in 0..=n {
            for j in 0..=n {
                let lx = fa.length * (i as f64 / n as f64 - 0.5);
                let ly = fa.width * (j as f64 / n as f64 - 0.5);
                let (x, y) = pa.transform_point(lx, ly);
                let (bx, by) = pb.inverse_transform_point(x, y);
                if bx.abs() <= 0.5 * fb.length + 1e-9 && by.abs() <= 0.5 * fb.width + 1e-9 {
                    return true;
                }
            }
        }
        false
    }

    fn pose_strategy() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn identity_is_neutral(p in pose_strategy()) {
            assert_pose_eq(Pose2::IDENTITY.compose(&p), p, 1e-12);
            assert_pose_eq(p.compose(&Pose2::IDENTITY), p, 1e-12);
        }

        #[test]
        fn compose_with_inverse_is_identity(p in pose_strategy()) {
            assert_pose_eq(p.compose(&p.inverse()), Pose2::IDENTITY, 1e-9);
            assert_pose_eq(p.inverse().compose(&p), Pose2::IDENTITY, 1e-9);
        }

        #[test]
        fn compose_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            assert_pose_eq(a.compose(&b).compose(&c), a.compose(&b.compose(&c)), 1e-9);
        }

        #[test]
        fn theta_is_normalized(a in pose_strategy(), b in pose_strategy()) {
            let t = a.compose(&b).theta;
            prop_assert!(t > -PI && t <= PI);
        }

        #[test]
        fn footprint_cells_match_bruteforce(p in pose_strategy(), l in 0.3..6.0f64, w in 0.3..3.0f64) {
            let spec = GridSpec::new(Pose2::new(-3.0, 4.0, 0.0), 0.7, 60, 50).unwrap();
            let pose = Pose2::new(p.x * 0.5, p.y * 0.5, p.theta);
            let fp = Footprint::new(l, w).unwrap();
            prop_assert_eq!(footprint_cells(&spec, &pose, &fp), brute_force_cells(&spec, &pose, &fp));
        }

        #[test]
        fn footprint_cells_periodic_in_theta(p in pose_strategy()) {
            let spec = GridSpec::new(Pose2::IDENTITY, 0.5, 64, 64).unwrap();
            let pose = Pose2::new(p.x * 0.2, p.y * 0.2, p.theta);
            let shifted = Pose2 { theta: pose.theta + 2.0 * PI, ..pose };
            prop_assert_eq!(
                footprint_cells(&spec, &pose, &Footprint::VEHICLE),
                footprint_cells(&spec, &shifted, &Footprint::VEHICLE)
            );
        }

        #[test]
        fn overlap_is_symmetric(a in pose_strategy(), b in pose_strategy(), l in 0.5..6.0f64, w in 0.5..3.0f64) {
            let fa = Footprint::new(l, w).unwrap();
            let fb = Footprint::VEHICLE;
            let b = Pose2::new(a.x + b.x * 0.1, a.y + b.y * 0.1, b.theta);
            prop_assert_eq!(rectangles_overlap(&a, &fa, &b, &fb), rectangles_overlap(&b, &fb, &a, &fa));
        }

        #[test]
        fn world_cell_round_trip(cx in -20.0..20.0f64, cy in -20.0..20.0f64, res in 0.05..2.0f64,
                                 w in 1usize..40, h in 1usize..40) {
            let spec = GridSpec::new(Pose2::new(cx, cy, 0.0), res, w, h).unwrap();
            for cell in spec.cells() {
                let (x, y) = spec.cell_center(cell);
                prop_assert_eq!(spec.world_to_cell(x, y), Some(cell));
            }
        }
    }
}
