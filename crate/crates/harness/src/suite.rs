//! The crafted occlusion suite: sparse junction scenes where an ego drives
//! toward a crossing with three communication-enabled vehicles placed
//! around it, adversarially augmented with an occluder and a hidden
//! pedestrian.

use std::f64::consts::{FRAC_PI_2, PI};

use cobev_core::scenario::{augment_adversarial, generate_candidates, stream_rng, AugmentConfig, CandidateConfig, Scenario};
use cobev_core::sim::{visible_actor_ids, ActorKind, ActorState, SensorConfig, TrackSet};
use cobev_core::{ActorId, Error, Footprint, GridSpec, Pose2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Augmented scenarios to collect.
    pub scenarios: usize,
    /// Seed scenes tried before giving up.
    pub max_scenes: usize,
    pub ego_speed: (f64, f64),
    /// Keep only scenes where some supporter observes the hidden pedestrian,
    /// so that communication can actually help.
    pub require_witness: bool,
    pub augment: AugmentConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenarios: 24,
            max_scenes: 200,
            ego_speed: (4.0, 8.0),
            require_witness: true,
            augment: AugmentConfig::default(),
        }
    }
}

const OBS: usize = 30;
const PLAN: usize = 10;
const DT: f64 = 0.1;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Straight constant-speed track through `at_t0` (the pose at the last
/// observed frame), in scene-local coordinates mapped by `frame`.
fn track(id: ActorId, at_t0: Pose2, speed: f64, frame: &Pose2) -> Vec<ActorState> {
    (0..OBS + PLAN)
        .map(|k| {
            let s = (k as f64 - (OBS - 1) as f64) * DT * speed;
            let local = at_t0.compose(&Pose2::new(s, 0.0, 0.0));
            ActorState {
                actor_id: id,
                kind: ActorKind::Vehicle,
                pose: frame.compose(&local),
                footprint: Footprint::VEHICLE,
                speed,
            }
        })
        .collect()
}

/// One seed scene: ego (id 0) at the scene origin at `t = 0` heading along
/// +x; an oncoming vehicle in the opposite lane and two vehicles waiting on
/// the cross street at either side. The whole scene is placed at a random
/// global pose.
pub fn junction_scene(index: usize, seed: u64, cfg: &SuiteConfig) -> Scenario {
    let mut rng = stream_rng(seed, index as u64);
    let frame = Pose2::new(uniform(&mut rng, -50.0, 50.0), uniform(&mut rng, -50.0, 50.0), uniform(&mut rng, -PI, PI));
    let ego_speed = uniform(&mut rng, cfg.ego_speed.0, cfg.ego_speed.1);
    let oncoming = Pose2::new(uniform(&mut rng, 22.0, 30.0), uniform(&mut rng, 3.2, 3.8), PI);
    let right = Pose2::new(uniform(&mut rng, 9.0, 16.0), uniform(&mut rng, -10.0, -7.0), FRAC_PI_2);
    let left = Pose2::new(uniform(&mut rng, 9.0, 16.0), uniform(&mut rng, 7.0, 10.0), -FRAC_PI_2);
    let oncoming_speed = uniform(&mut rng, 0.0, 4.0);
    let tracks = [
        track(0, Pose2::IDENTITY, ego_speed, &frame),
        track(1, oncoming, oncoming_speed, &frame),
        track(2, right, 0.0, &frame),
        track(3, left, 0.0, &frame),
    ];
    let frames = (0..OBS + PLAN).map(|k| tracks.iter().map(|t| t[k]).collect()).collect();
    Scenario {
        id: index,
        tracks: TrackSet::new(DT, frames).expect("scene tracks are well formed"),
        ego_id: 0,
        comm_ids: [0, 1, 2, 3].into(),
        obs_frames: (0, OBS - 1),
        plan_frames: (OBS, OBS + PLAN - 1),
        source_start: 0,
        augmentation: None,
    }
}

/// Whether a supporter sees the augmented pedestrian during observation.
fn witnessed(scn: &Scenario, sensor: &SensorConfig) -> Result<bool> {
    let Some(rec) = &scn.augmentation else { return Ok(false) };
    let (k0, k1) = scn.obs_frames;
    for id in scn.supporters(usize::MAX) {
        if visible_actor_ids(&scn.tracks, id, k0, k1, sensor)?.contains(&rec.pedestrian_id) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Augments consecutive seed scenes until `cfg.scenarios` succeed. Scene
/// ids are consecutive in the output, the original scene index is kept in
/// `source_start`.
pub fn occlusion_suite(
    cfg: &SuiteConfig,
    seed: u64,
    grid: &GridSpec,
    sensor: &SensorConfig,
    candidates: &CandidateConfig,
) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for index in 0..cfg.max_scenes {
        if out.len() == cfg.scenarios {
            break;
        }
        let scene = junction_scene(index, seed, cfg);
        let ego = scene.ego_at_t0()?;
        let cands = generate_candidates(ego.speed, DT, PLAN, candidates)?;
        match augment_adversarial(&scene, &cands, sensor, grid, &cfg.augment, seed) {
            Ok(aug) if cfg.require_witness && !witnessed(&aug, sensor)? => {}
            Ok(mut aug) => {
                aug.source_start = index;
                aug.id = out.len();
                out.push(aug);
            }
            Err(Error::AugmentationInfeasible { .. }) | Err(Error::InvalidInput(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if out.len() < cfg.scenarios {
        return Err(HarnessError::Config(format!(
            "only {} of {} suite scenarios could be augmented from {} scenes",
            out.len(),
            cfg.scenarios,
            cfg.max_scenes
        )));
    }
    Ok(out)
}
