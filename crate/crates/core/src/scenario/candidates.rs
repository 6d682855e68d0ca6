//! The shared library of local trajectory candidates.
//!
//! Each candidate integrates a unicycle with constant linear acceleration
//! and yaw rate from the ego's current speed. Poses are in the ego-local
//! frame at `t = 0`; step `t` (1-based) is stored at index `t - 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub n: usize,
    pub accel_range: (f64, f64),
    pub yaw_rate_range: (f64, f64),
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { n: 64, accel_range: (-4.0, 2.0), yaw_rate_range: (-0.5, 0.5) }
    }
}

impl CandidateConfig {
    /// Side length of the square (acceleration x yaw rate) grid.
    pub fn side(&self) -> Result<usize> {
        let side = (self.n as f64).sqrt().round() as usize;
        if side == 0 || side * side != self.n {
            return Err(Error::InvalidInput(format!("candidate count {} is not a perfect square", self.n)));
        }
        let (a0, a1) = self.accel_range;
        let (w0, w1) = self.yaw_rate_range;
        if !(a0 <= a1 && w0 <= w1) {
            return Err(Error::InvalidInput("candidate ranges must be ordered (lo, hi)".into()));
        }
        Ok(side)
    }

    /// Largest per-step speed change allowed by the acceleration range.
    pub fn max_speed_step(&self, dt: f64) -> f64 {
        self.accel_range.0.abs().max(self.accel_range.1.abs()) * dt
    }

    pub fn max_heading_step(&self, dt: f64) -> f64 {
        self.yaw_rate_range.0.abs().max(self.yaw_rate_range.1.abs()) * dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub accel: f64,
    pub yaw_rate: f64,
    pub poses: Vec<Pose2>,
    /// Speed at each step, aligned with `poses`.
    pub speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub dt: f64,
    pub initial_speed: f64,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.candidates.first().map_or(0, |c| c.poses.len())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["candidate_id", "step", "x", "y", "theta"])?;
        for (id, c) in self.candidates.iter().enumerate() {
            for (i, p) in c.poses.iter().enumerate() {
                w.write_record([
                    id.to_string(),
                    (i + 1).to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.theta.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Forward-integrates one candidate. Speed is clamped at zero; the distance
/// of each step is exact for piecewise-constant acceleration and is laid
/// along the mid-step heading.
pub fn rollout(initial_speed: f64, accel: f64, yaw_rate: f64, dt: f64, horizon: usize) -> Candidate {
    let mut pose = Pose2::IDENTITY;
    let mut v = initial_speed.max(0.0);
    let mut poses = Vec::with_capacity(horizon);
    let mut speeds = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let v_next = v + accel * dt;
        let dist = if v_next >= 0.0 { v * dt + 0.5 * accel * dt * dt } else { v * v / (2.0 * -accel) };
        let mid = pose.theta + 0.5 * yaw_rate * dt;
        pose = Pose2::new(pose.x + dist * mid.cos(), pose.y + dist * mid.sin(), pose.theta + yaw_rate * dt);
        v = v_next.max(0.0);
        poses.push(pose);
        speeds.push(v);
    }
    Candidate { accel, yaw_rate, poses, speeds }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// The full grid of candidates; candidate `i * side + j` uses the `i`-th
/// acceleration and the `j`-th yaw rate.
pub fn generate_candidates(initial_speed: f64, dt: f64, horizon: usize, cfg: &CandidateConfig) -> Result<CandidateSet> {
    if !(initial_speed >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("bad speed {initial_speed} or dt {dt}")));
    }
    let side = cfg.side()?;
    let accels = linspace(cfg.accel_range.0, cfg.accel_range.1, side);
    let yaws = linspace(cfg.yaw_rate_range.0, cfg.yaw_rate_range.1, side);
    let candidates = accels
        .iter()
        .flat_map(|&a| yaws.iter().map(move |&w| rollout(initial_speed, a, w, dt, horizon)))
        .collect();
    Ok(CandidateSet { dt, initial_speed, candidates })
}
