use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{rectangles_overlap, Pose2};
use crate::scenario::candidates::CandidateSet;
use crate::scenario::window::Scenario;
use crate::sim::{visible_actor_ids, SensorConfig};
use crate::ActorId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    /// Per candidate: collides with an actor the ego never saw.
    pub flags: Vec<bool>,
    pub colliding_count: usize,
    pub unseen_actor_ids: BTreeSet<ActorId>,
}

/// Candidate poses in the global frame; entry `[i][t-1]` is candidate `i`
/// at plan step `t`.
pub fn candidate_world_poses(scn: &Scenario, cands: &CandidateSet) -> Result<Vec<Vec<Pose2>>> {
    let ego = scn.ego_at_t0()?.pose;
    Ok(cands
        .candidates
        .iter()
        .map(|c| c.poses.iter().map(|p| ego.compose(p)).collect())
        .collect())
}

/// For every candidate, the set of actors its ego footprint overlaps at
/// some plan step, restricted by `consider`.
fn overlaps(
    scn: &Scenario,
    cands: &CandidateSet,
    consider: impl Fn(ActorId) -> bool,
) -> Result<Vec<BTreeSet<ActorId>>> {
    let ego_fp = scn.ego_at_t0()?.footprint;
    let world = candidate_world_poses(scn, cands)?;
    Ok(world
        .iter()
        .map(|poses| {
            let mut hit = BTreeSet::new();
            for (step, pose) in poses.iter().enumerate() {
                let frame = scn.t0() + 1 + step;
                for actor in scn.tracks.frame(frame) {
                    if actor.actor_id == scn.ego_id || !consider(actor.actor_id) {
                        continue;
                    }
                    if rectangles_overlap(pose, &ego_fp, &actor.pose, &actor.footprint) {
                        hit.insert(actor.actor_id);
                    }
                }
            }
            hit
        })
        .collect())
}

/// Flags candidates that collide during the plan window with an actor that
/// returned no lidar ray to the ego during the whole observation window.
pub fn assess_criticality(scn: &Scenario, cands: &CandidateSet, sensor: &SensorConfig) -> Result<CriticalityReport> {
    let visible = visible_actor_ids(&scn.tracks, scn.ego_id, scn.obs_frames.0, scn.obs_frames.1, sensor)?;
    let hits = overlaps(scn, cands, |id| !visible.contains(&id))?;
    let flags: Vec<bool> = hits.iter().map(|h| !h.is_empty()).collect();
    Ok(CriticalityReport {
        colliding_count: flags.iter().filter(|&&f| f).count(),
        flags,
        unseen_actor_ids: hits.into_iter().flatten().collect(),
    })
}

/// Ground-truth collision flag per candidate against every other actor.
pub fn ground_truth_collisions(scn: &Scenario, cands: &CandidateSet) -> Result<Vec<bool>> {
    Ok(overlaps(scn, cands, |_| true)?.iter().map(|h| !h.is_empty()).collect())
}

/// Scenario counts indexed by colliding-candidate count `0..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Scenarios with at least one flagged candidate.
    pub fn mass_above_zero(&self) -> usize {
        self.counts.iter().skip(1).sum()
    }

    /// Non-empty bars as `(colliding_count, scenarios)`.
    pub fn bars(&self) -> Vec<(usize, usize)> {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(x, &c)| (x, c)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("colliding_count,scenarios\n");
        for (x, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{x},{c}\n"));
        }
        s
    }
}

pub fn criticality_histogram(reports: &[CriticalityReport], n_candidates: usize) -> Histogram {
    let mut counts = vec![0; n_candidates + 1];
    for r in reports {
        counts[r.colliding_count.min(n_candidates)] += 1;
    }
    Histogram { counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(n: usize) -> CriticalityReport {
        CriticalityReport { flags: vec![], colliding_count: n, unseen_actor_ids: BTreeSet::new() }
    }

    #[test]
    fn histogram_counts() {
        let h = criticality_histogram(&[report(0), report(0), report(3)], 64);
        assert_eq!(h.bars(), vec![(0, 2), (3, 1)]);
        assert_eq!(h.total(), 3);
        assert_eq!(h.mass_above_zero(), 1);
        let h = criticality_histogram(&vec![report(0); 5], 64);
        assert_eq!(h.bars(), vec![(0, 5)]);
        assert_eq!(h.counts.len(), 65);
    }
}
