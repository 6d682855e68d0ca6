use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::augment::AugmentationRecord;
use crate::scenario::stream_rng;
use crate::sim::{ActorKind, ActorState, TrackSet};
use crate::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub obs_s: f64,
    pub plan_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { obs_s: 3.0, plan_s: 1.0 }
    }
}

impl WindowConfig {
    /// `(observation frames, planning frames)` at the given frame period.
    pub fn frames(&self, dt: f64) -> Result<(usize, usize)> {
        let obs = (self.obs_s / dt).round();
        let plan = (self.plan_s / dt).round();
        if !(obs >= 1.0 && plan >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "windows of {}s/{}s at dt={dt} leave no frames",
                self.obs_s, self.plan_s
            )));
        }
        Ok((obs as usize, plan as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub window: WindowConfig,
    /// Stride between window starts, in frames. `None` means one full window.
    pub stride: Option<usize>,
    /// Communication-enabled vehicles per scenario, ego included.
    pub n_comm: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self { window: WindowConfig::default(), stride: None, n_comm: 4 }
    }
}

/// An observation window followed by a planning window, re-indexed so the
/// observation starts at frame 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub tracks: TrackSet,
    pub ego_id: ActorId,
    pub comm_ids: BTreeSet<ActorId>,
    pub obs_frames: (usize, usize),
    pub plan_frames: (usize, usize),
    /// First source frame covered by this scenario.
    pub source_start: usize,
    pub augmentation: Option<AugmentationRecord>,
}

impl Scenario {
    /// Frame index of `t = 0`, the last observed frame.
    pub fn t0(&self) -> usize {
        self.obs_frames.1
    }

    pub fn horizon(&self) -> usize {
        self.plan_frames.1 - self.plan_frames.0 + 1
    }

    pub fn ego_at_t0(&self) -> Result<&ActorState> {
        self.tracks
            .actor(self.t0(), self.ego_id)
            .ok_or(Error::ViewerAbsent { actor: self.ego_id, frame: self.t0() })
    }

    /// Supporters ordered by id, capped at `n_available` (lowest ids first).
    pub fn supporters(&self, n_available: usize) -> Vec<ActorId> {
        self.comm_ids.iter().copied().filter(|&id| id != self.ego_id).take(n_available).collect()
    }

    pub fn manifest(&self, source: Option<&str>) -> ScenarioManifest {
        ScenarioManifest {
            id: self.id,
            source: source.map(str::to_string),
            source_start: self.source_start,
            obs_frames: self.obs_frames,
            plan_frames: self.plan_frames,
            ego_id: self.ego_id,
            comm_ids: self.comm_ids.iter().copied().collect(),
            augmentation: self.augmentation.clone(),
        }
    }
}

/// JSON-facing description of a scenario, without the tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub id: usize,
    pub source: Option<String>,
    pub source_start: usize,
    pub obs_frames: (usize, usize),
    pub plan_frames: (usize, usize),
    pub ego_id: ActorId,
    pub comm_ids: Vec<ActorId>,
    pub augmentation: Option<AugmentationRecord>,
}

/// Cuts `tracks` into sliding windows and samples the communication-enabled
/// vehicles of each (first sample is the ego). Windows without any vehicle
/// present throughout are skipped.
pub fn slice_scenarios(tracks: &TrackSet, seed: u64, cfg: &SliceConfig) -> Result<Vec<Scenario>> {
    let (obs, plan) = cfg.window.frames(tracks.dt)?;
    let len = obs + plan;
    let stride = cfg.stride.unwrap_or(len);
    if stride == 0 || cfg.n_comm == 0 {
        return Err(Error::InvalidInput("stride and n_comm must be positive".into()));
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut window_index = 0u64;
    while start + len <= tracks.len() {
        let end = start + len - 1;
        let eligible: Vec<ActorId> = tracks
            .frame(start)
            .iter()
            .filter(|a| a.kind == ActorKind::Vehicle && tracks.present_throughout(a.actor_id, start, end))
            .map(|a| a.actor_id)
            .collect();
        if !eligible.is_empty() {
            let mut rng = stream_rng(seed, window_index);
            let picks = sample(&mut rng, eligible.len(), cfg.n_comm.min(eligible.len()));
            let chosen: Vec<ActorId> = picks.iter().map(|i| eligible[i]).collect();
            out.push(Scenario {
                id: out.len(),
                tracks: tracks.window(start, end),
                ego_id: chosen[0],
                comm_ids: chosen.into_iter().collect(),
                obs_frames: (0, obs - 1),
                plan_frames: (obs, len - 1),
                source_start: start,
                augmentation: None,
            });
        }
        start += stride;
        window_index += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Footprint, Pose2};

    fn straight_tracks(n_frames: usize, n_vehicles: u32) -> TrackSet {
        let frames = (0..n_frames)
            .map(|k| {
                (0..n_vehicles)
                    .map(|id| ActorState {
                        actor_id: id,
                        kind: ActorKind::Vehicle,
                        pose: Pose2::new(k as f64 * 0.5, id as f64 * 4.0, 0.0),
                        footprint: Footprint::VEHICLE,
                        speed: 5.0,
                    })
                    .collect()
            })
            .collect();
        TrackSet::new(0.1, frames).unwrap()
    }

    #[test]
    fn single_and_double_windows() {
        let cfg = SliceConfig { stride: Some(40), ..Default::default() };
        let one = slice_scenarios(&straight_tracks(40, 5), 1, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].obs_frames, (0, 29));
        assert_eq!(one[0].plan_frames, (30, 39));
        assert_eq!(one[0].horizon(), 10);
        assert_eq!(one[0].comm_ids.len(), 4);
        assert!(one[0].comm_ids.contains(&one[0].ego_id));
        let two = slice_scenarios(&straight_tracks(80, 5), 1, &cfg).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].source_start, 40);
    }

    #[test]
    fn short_tracks_give_nothing() {
        assert!(slice_scenarios(&straight_tracks(39, 3), 1, &SliceConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_seeded() {
        let tracks = straight_tracks(200, 9);
        let cfg = SliceConfig { stride: Some(10), ..Default::default() };
        let a = slice_scenarios(&tracks, 7, &cfg).unwrap();
        let b = slice_scenarios(&tracks, 7, &cfg).unwrap();
        let ids = |v: &[Scenario]| v.iter().map(|s| (s.ego_id, s.comm_ids.clone())).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        let c = slice_scenarios(&tracks, 8, &cfg).unwrap();
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn supporters_are_capped_by_lowest_id() {
        let mut s = slice_scenarios(&straight_tracks(40, 6), 3, &SliceConfig::default()).unwrap().remove(0);
        s.ego_id = 4;
        s.comm_ids = [1, 4, 2, 5].into_iter().collect();
        assert_eq!(s.supporters(2), vec![1, 2]);
        assert_eq!(s.supporters(9), vec![1, 2, 5]);
    }
}
