use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rectangles_overlap, Footprint, GridSpec, Pose2};
use crate::scenario::candidates::CandidateSet;
use crate::scenario::criticality::{assess_criticality, candidate_world_poses};
use crate::scenario::stream_rng;
use crate::scenario::window::Scenario;
use crate::sim::lidar::slab_interval;
use crate::sim::{render_observation, scan_frame, ActorKind, ActorState, SemanticClass, SensorConfig, TrackSet};
use crate::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Longitudinal offset of the occluder's crossing line ahead of the ego
    /// pose at `t = 0`, in meters.
    pub offset_range: (f64, f64),
    /// Start and end of the occluder's passage across the ego's lane (its
    /// body overlapping the ego's forward axis), as fractions of the
    /// observation window measured from its first frame. The passage sets
    /// the occluder speed; values outside `[0, 1]` are allowed.
    pub crossing: (f64, f64),
    pub occluder: Footprint,
    pub pedestrian: Footprint,
    pub max_pedestrian_speed: f64,
    pub max_attempts: usize,
    /// Pedestrian placements tried per sampled occluder.
    pub placements_per_occluder: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            offset_range: (5.0, 10.0),
            crossing: (0.0, 1.0),
            occluder: Footprint::VEHICLE,
            pedestrian: Footprint::PEDESTRIAN,
            max_pedestrian_speed: 3.0,
            max_attempts: 100,
            placements_per_occluder: 10,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (o0, o1) = self.offset_range;
        let (c0, c1) = self.crossing;
        if !(o0 > 0.0 && o1 >= o0) || !(-2.0..1.0).contains(&c0) || !(c1 > c0 && c1 <= 2.0) {
            return Err(Error::InvalidInput(format!(
                "augmentation ranges invalid: offset {:?}, crossing {:?}",
                self.offset_range, self.crossing
            )));
        }
        if !(self.max_pedestrian_speed > 0.0) || self.max_attempts == 0 || self.placements_per_occluder == 0 {
            return Err(Error::InvalidInput("augmentation limits must be positive".into()));
        }
        Ok(())
    }
}

/// What was injected, enough to regenerate the augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub seed: u64,
    pub occluder_id: ActorId,
    pub pedestrian_id: ActorId,
    pub offset_m: f64,
    /// +1 when the occluder moves toward the ego's left, -1 otherwise.
    pub direction: i8,
    pub occluder_speed: f64,
    pub pedestrian_speed: f64,
    pub target_candidate: usize,
    pub target_step: usize,
    pub attempts: usize,
}

struct Occluder {
    offset: f64,
    direction: f64,
    speed: f64,
    states: Vec<ActorState>,
}

fn sample_occluder(
    scn: &Scenario,
    ego: &ActorState,
    id: ActorId,
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Occluder {
    let offset = rng.gen_range(cfg.offset_range.0..=cfg.offset_range.1);
    let direction = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let dt = scn.tracks.dt;
    let (k0, k1) = scn.obs_frames;
    let span = (k1 - k0 + 1) as f64 * dt;
    let enter = k0 as f64 * dt + cfg.crossing.0 * span;
    let duration = (cfg.crossing.1 - cfg.crossing.0) * span;
    // lateral travel while the body overlaps the ego's lane
    let reach = 0.5 * (cfg.occluder.length + ego.footprint.width);
    let speed = 2.0 * reach / duration;
    let heading = ego.pose.theta + direction * std::f64::consts::FRAC_PI_2;
    let states = (0..scn.tracks.len())
        .map(|k| {
            let lateral = direction * (-reach + speed * (k as f64 * dt - enter));
            let (x, y) = ego.pose.transform_point(offset, lateral);
            ActorState {
                actor_id: id,
                kind: ActorKind::Vehicle,
                pose: Pose2::new(x, y, heading),
                footprint: cfg.occluder,
                speed,
            }
        })
        .collect();
    Occluder { offset, direction, speed, states }
}

fn collides_with_any(tracks: &TrackSet, states: &[ActorState], frames: std::ops::RangeInclusive<usize>) -> bool {
    frames.into_iter().any(|k| {
        let s = &states[k];
        tracks.frame(k).iter().any(|a| rectangles_overlap(&s.pose, &s.footprint, &a.pose, &a.footprint))
    })
}

/// Shadow cells created by the occluder alone, as seen by the ego at `k`.
fn occluder_shadow(scn: &Scenario, occluder: &ActorState, k: usize, sensor: &SensorConfig, grid: &GridSpec) -> Result<Vec<(f64, f64)>> {
    let ego = scn
        .tracks
        .actor(k, scn.ego_id)
        .ok_or(Error::ViewerAbsent { actor: scn.ego_id, frame: k })?;
    let spec = grid.with_center(Pose2::new(ego.pose.x, ego.pose.y, 0.0));
    let base = scn.tracks.frame(k);
    let without = render_observation(ego, base, &scan_frame(ego, base, sensor), &spec);
    let mut with_frame = base.to_vec();
    with_frame.push(*occluder);
    let with = render_observation(ego, &with_frame, &scan_frame(ego, &with_frame, sensor), &spec);
    Ok(spec
        .cells()
        .filter(|&c| with.get(c) == SemanticClass::Shadow && without.get(c) != SemanticClass::Shadow)
        .map(|c| spec.cell_center(c))
        .collect())
}

/// Constant-velocity pedestrian located at `spawn` at frame `k_mid` and at
/// `goal` `travel` seconds later.
#[allow(clippy::too_many_arguments)]
fn walk(
    id: ActorId,
    footprint: Footprint,
    spawn: (f64, f64),
    goal: (f64, f64),
    travel: f64,
    k_mid: usize,
    last: usize,
    dt: f64,
) -> Vec<ActorState> {
    let vel = ((goal.0 - spawn.0) / travel, (goal.1 - spawn.1) / travel);
    let speed = vel.0.hypot(vel.1);
    let heading = vel.1.atan2(vel.0);
    (0..=last)
        .map(|k| {
            let s = (k as f64 - k_mid as f64) * dt;
            ActorState {
                actor_id: id,
                kind: ActorKind::Pedestrian,
                pose: Pose2::new(spawn.0 + vel.0 * s, spawn.1 + vel.1 * s, heading),
                footprint,
                speed,
            }
        })
        .collect()
}

/// Whether the walk runs into the occluder at any frame or into the ego up
/// to frame `k1`.
fn blocked(ped: &[ActorState], occluder: &[ActorState], scn: &Scenario, k1: usize) -> bool {
    ped.iter().zip(occluder).enumerate().any(|(k, (p, o))| {
        rectangles_overlap(&p.pose, &p.footprint, &o.pose, &o.footprint)
            || (k <= k1
                && scn
                    .tracks
                    .actor(k, scn.ego_id)
                    .is_some_and(|e| rectangles_overlap(&p.pose, &p.footprint, &e.pose, &e.footprint)))
    })
}

/// Cheap pre-check of invisibility: every corner of the pedestrian is out of
/// range or has its sight line from the ego cut by another body, in every
/// observed frame. The exact lidar check runs afterwards.
fn screened(ped: &[ActorState], occluder: &[ActorState], scn: &Scenario, sensor: &SensorConfig) -> bool {
    (scn.obs_frames.0..=scn.obs_frames.1).all(|k| {
        let Some(ego) = scn.tracks.actor(k, scn.ego_id) else { return false };
        let (ox, oy) = (ego.pose.x, ego.pose.y);
        let bodies = || scn.tracks.frame(k).iter().filter(|a| a.actor_id != scn.ego_id).chain(std::iter::once(&occluder[k]));
        ped[k].footprint.corners(&ped[k].pose).iter().all(|&(px, py)| {
            let dist = (px - ox).hypot(py - oy);
            if dist > sensor.max_range {
                return true;
            }
            let (dx, dy) = ((px - ox) / dist, (py - oy) / dist);
            bodies().any(|b| {
                slab_interval(ox, oy, dx, dy, &b.pose, &b.footprint).is_some_and(|(t0, t1)| t1 >= 0.0 && t0 < dist)
            })
        })
    })
}

/// Injects an occluder crossing ahead of the ego and a pedestrian that walks
/// inside its shadow onto one of the candidates, so that the ego never sees
/// the pedestrian during observation but a candidate hits it during planning.
///
/// `grid` is a raster template; it is re-centered on the ego for the shadow
/// query. Only scenarios with no critical candidate are accepted.
pub fn augment_adversarial(
    scn: &Scenario,
    cands: &CandidateSet,
    sensor: &SensorConfig,
    grid: &GridSpec,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<Scenario> {
    cfg.validate()?;
    if assess_criticality(scn, cands, sensor)?.colliding_count > 0 {
        return Err(Error::InvalidInput(format!("scenario {} is already critical", scn.id)));
    }
    let ego = *scn.ego_at_t0()?;
    let world = candidate_world_poses(scn, cands)?;
    // targets the ego reaches only by moving; a standing ego is not a plan
    let targets: Vec<(usize, usize)> = world
        .iter()
        .enumerate()
        .flat_map(|(i, poses)| poses.iter().enumerate().map(move |(t, p)| (i, t, *p)))
        .filter(|(_, _, p)| !ego.footprint.contains(&ego.pose, p.x, p.y))
        .map(|(i, t, _)| (i, t))
        .collect();
    if targets.is_empty() {
        return Err(Error::AugmentationInfeasible { attempts: 0 });
    }

    let mut rng = stream_rng(seed, scn.id as u64);
    let dt = scn.tracks.dt;
    let (k0, k1) = scn.obs_frames;
    let k_mid = (k0 + k1) / 2;
    let last = scn.tracks.len() - 1;
    let occluder_id = scn.tracks.next_free_id();
    let pedestrian_id = occluder_id + 1;

    let mut occluder: Option<(Occluder, Vec<(f64, f64)>)> = None;
    for attempt in 0..cfg.max_attempts {
        if attempt % cfg.placements_per_occluder == 0 {
            let occ = sample_occluder(scn, &ego, occluder_id, cfg, &mut rng);
            let shadow = if collides_with_any(&scn.tracks, &occ.states, 0..=last) {
                Vec::new()
            } else {
                occluder_shadow(scn, &occ.states[k_mid], k_mid, sensor, grid)?
            };
            occluder = Some((occ, shadow));
        }
        let Some((occ, shadow)) = occluder.as_ref() else { unreachable!() };
        if shadow.is_empty() {
            continue;
        }
        let (cand, step) = targets[rng.gen_range(0..targets.len())];
        let goal = world[cand][step];
        let travel = (k1 + 1 + step - k_mid) as f64 * dt;
        // shadow cells from which a straight walk reaches the goal in time
        // without crossing the occluder or the observing ego
        let walk_from = |&(x, y): &(f64, f64)| {
            walk(pedestrian_id, cfg.pedestrian, (x, y), (goal.x, goal.y), travel, k_mid, last, dt)
        };
        let reach = cfg.max_pedestrian_speed * travel;
        let feasible: Vec<&(f64, f64)> = shadow
            .iter()
            .filter(|(x, y)| (x - goal.x).hypot(y - goal.y) <= reach)
            .filter(|c| {
                let ped = walk_from(c);
                !blocked(&ped, &occ.states, scn, k1) && screened(&ped, &occ.states, scn, sensor)
            })
            .collect();
        if feasible.is_empty() {
            continue;
        }
        let ped = walk_from(feasible[rng.gen_range(0..feasible.len())]);
        let speed = ped[0].speed;
        let mut tracks = scn.tracks.clone();
        tracks.insert_track(&occ.states);
        tracks.insert_track(&ped);
        let mut out = scn.clone();
        out.tracks = tracks;
        let report = assess_criticality(&out, cands, sensor)?;
        if report.colliding_count == 0 || !report.unseen_actor_ids.contains(&pedestrian_id) {
            continue;
        }
        out.augmentation = Some(AugmentationRecord {
            seed,
            occluder_id,
            pedestrian_id,
            offset_m: occ.offset,
            direction: occ.direction as i8,
            occluder_speed: occ.speed,
            pedestrian_speed: speed,
            target_candidate: cand,
            target_step: step + 1,
            attempts: attempt + 1,
        });
        return Ok(out);
    }
    Err(Error::AugmentationInfeasible { attempts: cfg.max_attempts })
}
