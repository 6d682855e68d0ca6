//! Synthetic seed traffic on an open plane.
//!
//! Tracks are produced in independent episodes laid back to back in time so
//! that one episode maps onto one scenario window. Vehicles drive straight or
//! along constant-curvature arcs; pedestrians walk straight lines.

use cobev_core::geometry::rectangles_overlap;
use cobev_core::scenario::stream_rng;
use cobev_core::sim::{ActorKind, ActorState, TrackSet};
use cobev_core::{ActorId, Pose2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dt: f64,
    pub episodes: usize,
    /// Length of each episode in seconds.
    pub duration_s: f64,
    pub vehicles: (usize, usize),
    pub pedestrians: (usize, usize),
    pub vehicle_speed: (f64, f64),
    pub pedestrian_speed: (f64, f64),
    /// Heading range for vehicles, radians.
    pub heading: (f64, f64),
    /// Yaw-rate range applied to turning vehicles, rad/s.
    pub yaw_rate: (f64, f64),
    /// Probability that a vehicle turns instead of driving straight.
    pub turning_fraction: f64,
    /// Spawn positions are uniform in `[-half_extent, half_extent]^2`.
    pub half_extent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            episodes: 1,
            duration_s: 4.0,
            vehicles: (6, 12),
            pedestrians: (0, 4),
            vehicle_speed: (2.0, 12.0),
            pedestrian_speed: (0.5, 1.8),
            heading: (-std::f64::consts::PI, std::f64::consts::PI),
            yaw_rate: (-0.3, 0.3),
            turning_fraction: 0.3,
            half_extent: 30.0,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: (T, T), lo: T) -> Result<()> {
    if r.0 > r.1 || r.0 < lo {
        return Err(HarnessError::Config(format!("synth.{name}: invalid range {r:?}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration_s >= self.dt) {
            return Err(HarnessError::Config(format!(
                "synth: dt {} and duration {} must be positive",
                self.dt, self.duration_s
            )));
        }
        check_range("vehicles", self.vehicles, 0)?;
        check_range("pedestrians", self.pedestrians, 0)?;
        check_range("vehicle_speed", self.vehicle_speed, 0.0)?;
        check_range("pedestrian_speed", self.pedestrian_speed, 0.0)?;
        check_range("heading", self.heading, f64::NEG_INFINITY)?;
        check_range("yaw_rate", self.yaw_rate, f64::NEG_INFINITY)?;
        if !(0.0..=1.0).contains(&self.turning_fraction) || !(self.half_extent >= 0.0) {
            return Err(HarnessError::Config("synth: turning_fraction or half_extent out of range".into()));
        }
        Ok(())
    }

    pub fn frames_per_episode(&self) -> usize {
        (self.duration_s / self.dt).round() as usize
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.gen_range(r.0..r.1)
    }
}

/// Constant speed and yaw rate, integrated exactly along the arc.
fn drive(id: ActorId, kind: ActorKind, start: Pose2, speed: f64, yaw_rate: f64, dt: f64, frames: usize) -> Vec<ActorState> {
    let footprint = kind.default_footprint();
    (0..frames)
        .map(|k| {
            let t = k as f64 * dt;
            let pose = if yaw_rate.abs() < 1e-12 {
                Pose2::new(start.x + speed * t * start.theta.cos(), start.y + speed * t * start.theta.sin(), start.theta)
            } else {
                let r = speed / yaw_rate;
                let th = start.theta + yaw_rate * t;
                Pose2::new(start.x + r * (th.sin() - start.theta.sin()), start.y - r * (th.cos() - start.theta.cos()), th)
            };
            ActorState { actor_id: id, kind, pose, footprint, speed }
        })
        .collect()
}

fn count(rng: &mut ChaCha8Rng, r: (usize, usize)) -> usize {
    rng.gen_range(r.0..=r.1)
}

/// Generates `cfg.episodes` independent episodes. Spawns overlapping an
/// already placed actor at the first frame are redrawn a few times and
/// dropped if they still collide.
pub fn synth_tracks(cfg: &SynthConfig, seed: u64) -> Result<TrackSet> {
    cfg.validate()?;
    let len = cfg.frames_per_episode();
    let mut frames: Vec<Vec<ActorState>> = vec![Vec::new(); len * cfg.episodes];
    let mut next_id: ActorId = 0;
    for e in 0..cfg.episodes {
        let mut rng = stream_rng(seed, e as u64);
        let n_veh = count(&mut rng, cfg.vehicles);
        let n_ped = count(&mut rng, cfg.pedestrians);
        let mut placed: Vec<Vec<ActorState>> = Vec::new();
        for i in 0..n_veh + n_ped {
            let kind = if i < n_veh { ActorKind::Vehicle } else { ActorKind::Pedestrian };
            for _ in 0..10 {
                let start = Pose2::new(
                    uniform(&mut rng, (-cfg.half_extent, cfg.half_extent)),
                    uniform(&mut rng, (-cfg.half_extent, cfg.half_extent)),
                    match kind {
                        ActorKind::Vehicle => uniform(&mut rng, cfg.heading),
                        ActorKind::Pedestrian => uniform(&mut rng, (-std::f64::consts::PI, std::f64::consts::PI)),
                    },
                );
                let (speed, yaw) = match kind {
                    ActorKind::Vehicle => {
                        let v = uniform(&mut rng, cfg.vehicle_speed);
                        let turning = rng.gen_bool(cfg.turning_fraction);
                        (v, if turning { uniform(&mut rng, cfg.yaw_rate) } else { 0.0 })
                    }
                    ActorKind::Pedestrian => (uniform(&mut rng, cfg.pedestrian_speed), 0.0),
                };
                let track = drive(next_id, kind, start, speed, yaw, cfg.dt, len);
                let clear = placed.iter().all(|other| {
                    !rectangles_overlap(&track[0].pose, &track[0].footprint, &other[0].pose, &other[0].footprint)
                });
                if clear {
                    placed.push(track);
                    next_id += 1;
                    break;
                }
            }
        }
        for track in placed {
            for (k, s) in track.into_iter().enumerate() {
                frames[e * len + k].push(s);
            }
        }
    }
    Ok(TrackSet::new(cfg.dt, frames)?)
}
