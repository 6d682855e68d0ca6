//! 2D lidar raycasting against oriented rectangles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{Footprint, Pose2};
use crate::ActorId;

/// An actor's rectangle as seen by the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub id: ActorId,
    pub pose: Pose2,
    pub footprint: Footprint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub origin: Pose2,
    pub n_rays: usize,
    pub max_range: f64,
    /// One range per ray; `max_range` means no return.
    pub ranges: Vec<f64>,
    /// Which obstacle produced each return.
    pub hits: Vec<Option<ActorId>>,
}

impl LidarScan {
    pub fn bearing(&self, i: usize) -> f64 {
        ray_bearing(&self.origin, i, self.n_rays)
    }
}

pub fn ray_bearing(origin: &Pose2, i: usize, n_rays: usize) -> f64 {
    origin.theta + 2.0 * PI * i as f64 / n_rays as f64
}

/// Parametric interval `[t_enter, t_exit]` along `origin + t * dir` that lies
/// inside the closed rectangle, or `None` if the line misses it.
#[inline]
pub fn slab_interval(ox: f64, oy: f64, dx: f64, dy: f64, pose: &Pose2, fp: &Footprint) -> Option<(f64, f64)> {
    let (lo_x, lo_y) = pose.inverse_transform_point(ox, oy);
    let (s, c) = pose.theta.sin_cos();
    let ld_x = c * dx + s * dy;
    let ld_y = -s * dx + c * dy;
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for (o, d, h) in [(lo_x, ld_x, 0.5 * fp.length), (lo_y, ld_y, 0.5 * fp.width)] {
        if d == 0.0 {
            if o < -h || o > h {
                return None;
            }
            continue;
        }
        let (mut t1, mut t2) = ((-h - o) / d, (h - o) / d);
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        t_min = t_min.max(t1);
        t_max = t_max.min(t2);
        if t_min > t_max {
            return None;
        }
    }
    Some((t_min, t_max))
}

/// Distance along a unit-direction ray to the first rectangle boundary
/// crossing with positive parameter.
#[inline]
pub fn ray_rect_distance(ox: f64, oy: f64, dx: f64, dy: f64, pose: &Pose2, fp: &Footprint) -> Option<f64> {
    let (t0, t1) = slab_interval(ox, oy, dx, dy, pose, fp)?;
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

/// Casts `n_rays` evenly spaced rays starting at the sensor heading.
/// The caller is responsible for excluding the sensing actor.
pub fn raycast(origin: &Pose2, obstacles: &[Obstacle], n_rays: usize, max_range: f64) -> LidarScan {
    assert!(n_rays >= 1 && max_range > 0.0);
    // cull obstacles that cannot be reached
    let near: Vec<&Obstacle> = obstacles
        .iter()
        .filter(|o| origin.distance_to(&o.pose) <= max_range + o.footprint.circumradius())
        .collect();
    let mut ranges = Vec::with_capacity(n_rays);
    let mut hits = Vec::with_capacity(n_rays);
    for i in 0..n_rays {
        let (dy, dx) = ray_bearing(origin, i, n_rays).sin_cos();
        let mut best = max_range;
        let mut hit = None;
        for o in &near {
            if let Some(t) = ray_rect_distance(origin.x, origin.y, dx, dy, &o.pose, &o.footprint) {
                if t <= best && (hit.is_none() || t < best) {
                    best = t;
                    hit = Some(o.id);
                }
            }
        }
        ranges.push(best);
        hits.push(hit);
    }
    LidarScan { origin: *origin, n_rays, max_range, ranges, hits }
}
