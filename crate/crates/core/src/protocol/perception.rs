use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costmap::{score_trajectory, Costmap, TrajectoryStats, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::forecast::{forecast_oracle, to_masks, ConfidenceMaps, Forecaster, SemanticMasks};
use crate::geometry::{Footprint, GridSpec, Pose2};
use crate::scenario::Scenario;
use crate::sim::{anchor_spec, observation_sequence_with, visible_actor_ids, RenderOptions, SensorConfig, TrackSet};
use crate::ActorId;

/// Where an agent's future confidence maps come from.
#[derive(Clone, Copy)]
pub enum ForecastSource<'a> {
    /// Rendered ground-truth future observations, one-hot.
    Oracle,
    /// A forecaster run on the observation window.
    Model(&'a dyn Forecaster),
}

/// Which actors the oracle's future rasters may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTruth {
    /// Every actor, rendered from the viewer's future poses.
    #[default]
    Rendered,
    /// Only actors the viewer observed during the observation window: a
    /// perfect forecaster of what the agent knows about, which cannot
    /// conjure actors it never saw.
    ObservedActors,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionOptions {
    /// Render every actor as seen (no shadow, no range limit).
    pub omniscient: bool,
    pub truth: OracleTruth,
    pub cap: f64,
}

impl Default for PerceptionOptions {
    fn default() -> Self {
        Self { omniscient: false, truth: OracleTruth::default(), cap: DEFAULT_CAP }
    }
}

/// One agent's forecast and the costmap derived from it, in the agent's
/// raster frame.
#[derive(Debug, Clone)]
pub struct AgentPerception {
    pub maps: ConfidenceMaps,
    pub masks: SemanticMasks,
    pub costmap: Costmap,
}

impl AgentPerception {
    pub fn from_maps(maps: ConfidenceMaps, cap: f64) -> Self {
        let masks = to_masks(&maps);
        let costmap = Costmap::from_masks(&masks, cap);
        Self { maps, masks, costmap }
    }

    pub fn anchor(&self) -> Pose2 {
        self.costmap.spec.center
    }

    /// Scores trajectories already expressed in this agent's raster frame.
    pub fn score(&self, trajs: &[Vec<Pose2>], fp: &Footprint) -> Result<Vec<TrajectoryStats>> {
        trajs
            .iter()
            .map(|t| score_trajectory(&self.costmap, &self.masks, &self.maps, t, fp))
            .collect()
    }
}

/// Gives the round access to each participant's perception.
pub trait PerceptionSource {
    fn perception(&self, agent: ActorId) -> Result<&AgentPerception>;
}

impl PerceptionSource for BTreeMap<ActorId, AgentPerception> {
    fn perception(&self, agent: ActorId) -> Result<&AgentPerception> {
        self.get(&agent)
            .ok_or_else(|| Error::InvalidInput(format!("no perception for actor {agent}")))
    }
}

/// Builds `viewer`'s perception for the planning window of `scn`. Rasters
/// are anchored at the viewer's position at `t = 0`. A supporter sees the
/// ego's own footprint as free space: the candidates belong to the ego, so
/// its body must not count as an obstacle to them.
pub fn build_perception(
    scn: &Scenario,
    viewer: ActorId,
    source: ForecastSource<'_>,
    grid: &GridSpec,
    sensor: &SensorConfig,
    opts: &PerceptionOptions,
) -> Result<AgentPerception> {
    let spec = anchor_spec(&scn.tracks, viewer, scn.t0(), grid)?;
    let render = RenderOptions {
        transparent: if viewer == scn.ego_id { Vec::new() } else { vec![scn.ego_id] },
        omniscient: opts.omniscient,
    };
    let maps = match source {
        ForecastSource::Oracle => {
            let (k0, k1) = scn.plan_frames;
            let restricted;
            let tracks = match opts.truth {
                OracleTruth::ObservedActors if !opts.omniscient => {
                    let (o0, o1) = scn.obs_frames;
                    let mut known = visible_actor_ids(&scn.tracks, viewer, o0, o1, sensor)?;
                    known.insert(viewer);
                    known.insert(scn.ego_id);
                    let frames = scn
                        .tracks
                        .frames
                        .iter()
                        .map(|f| f.iter().filter(|a| known.contains(&a.actor_id)).copied().collect())
                        .collect();
                    restricted = TrackSet::new(scn.tracks.dt, frames)?;
                    &restricted
                }
                _ => &scn.tracks,
            };
            forecast_oracle(&observation_sequence_with(tracks, viewer, k0, k1, &spec, sensor, &render)?)?
        }
        ForecastSource::Model(f) => {
            let (k0, k1) = scn.obs_frames;
            let maps = f.forecast(&observation_sequence_with(&scn.tracks, viewer, k0, k1, &spec, sensor, &render)?)?;
            if maps.horizon != scn.horizon() {
                return Err(Error::LengthMismatch { expected: scn.horizon(), actual: maps.horizon });
            }
            maps
        }
    };
    Ok(AgentPerception::from_maps(maps, opts.cap))
}
