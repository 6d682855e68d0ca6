//! The distributed scoring round: the ego broadcasts its pose, supporters
//! score the shared candidates on their own costmaps and report a concern
//! scalar, the ego requests full score vectors from the selected supporters,
//! fuses them and ranks the candidates.

mod bus;
mod perception;

pub use bus::{Bus, Message, MessageKind, Payload};
pub use perception::{build_perception, AgentPerception, ForecastSource, OracleTruth, PerceptionOptions, PerceptionSource};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmap::TrajectoryStats;
use crate::error::{Error, Result};
use crate::geometry::Pose2;
use crate::scenario::{CandidateSet, Scenario};
use crate::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    EgoOnly,
    NaiveAll,
    Selective,
    Uncertainty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// The single most concerned supporter, if more concerned than the ego.
    Top1,
    /// Every supporter more concerned than the ego.
    AboveEgo,
    /// Every supporter whose concern exceeds the threshold.
    Threshold(f64),
    /// One supporter drawn uniformly with the given seed, regardless of concern.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub selection_policy: SelectionPolicy,
    pub n_available: usize,
}

impl FusionConfig {
    pub fn new(mode: FusionMode, selection_policy: SelectionPolicy, n_available: usize) -> Result<Self> {
        if let SelectionPolicy::Threshold(tau) = selection_policy {
            if !(tau >= 0.0) {
                return Err(Error::InvalidInput(format!("threshold {tau} must be non-negative")));
            }
        }
        Ok(Self { mode, selection_policy, n_available })
    }
}

/// Outcome of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub mode: FusionMode,
    pub policy: SelectionPolicy,
    pub supporters: Vec<ActorId>,
    pub selected: Vec<ActorId>,
    pub links_used: usize,
    pub bytes_sent: usize,
    pub fused: Vec<f64>,
    pub ranking: Vec<usize>,
}

/// Expresses every candidate pose, given in the ego frame at `t = 0`, in the
/// frame of `anchor`.
pub fn transform_candidates(cands: &CandidateSet, ego_pose: &Pose2, anchor: &Pose2) -> Vec<Vec<Pose2>> {
    let to_anchor = anchor.inverse().compose(ego_pose);
    cands
        .candidates
        .iter()
        .map(|c| c.poses.iter().map(|p| to_anchor.compose(p)).collect())
        .collect()
}

/// How strongly an agent's forecast overlaps the candidates.
pub fn concern(stats: &[TrajectoryStats]) -> f64 {
    stats.iter().map(|s| s.p_o).sum()
}

/// Chooses which supporters the ego requests scores from. Only the
/// `n_available` lowest ids are considered.
pub fn select_supporters(
    w_ego: f64,
    w_supporters: &BTreeMap<ActorId, f64>,
    policy: SelectionPolicy,
    n_available: usize,
) -> BTreeSet<ActorId> {
    let pool: Vec<(ActorId, f64)> = w_supporters.iter().map(|(&id, &w)| (id, w)).take(n_available).collect();
    match policy {
        SelectionPolicy::Top1 => {
            // strict comparison keeps the lowest id on ties
            let best = pool.iter().fold(None::<(ActorId, f64)>, |acc, &(id, w)| match acc {
                Some((_, bw)) if bw >= w => acc,
                _ => Some((id, w)),
            });
            best.filter(|&(_, w)| w > w_ego).map(|(id, _)| id).into_iter().collect()
        }
        SelectionPolicy::AboveEgo => pool.iter().filter(|&&(_, w)| w > w_ego).map(|&(id, _)| id).collect(),
        SelectionPolicy::Threshold(tau) => pool.iter().filter(|&&(_, w)| w > tau).map(|&(id, _)| id).collect(),
        SelectionPolicy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            pool.choose(&mut rng).map(|&(id, _)| id).into_iter().collect()
        }
    }
}

/// Weight favouring confident occupancy over perceptual uncertainty.
pub fn uncertainty_weight(s: &TrajectoryStats) -> f64 {
    (1.0 + s.f_o) * (1.0 + s.p_o) / ((1.0 + s.f_s) * (1.0 + s.p_s))
}

/// Fuses the ego's scores with those of the supporters that replied.
///
/// With no supporter scores every mode returns the ego scores unchanged, so
/// an idle round ranks exactly like the ego alone.
pub fn fuse(
    ego: &[TrajectoryStats],
    supporters: &BTreeMap<ActorId, Vec<TrajectoryStats>>,
    mode: FusionMode,
) -> Result<Vec<f64>> {
    for stats in supporters.values() {
        if stats.len() != ego.len() {
            return Err(Error::LengthMismatch { expected: ego.len(), actual: stats.len() });
        }
    }
    if mode == FusionMode::EgoOnly || supporters.is_empty() {
        return Ok(ego.iter().map(|s| s.score).collect());
    }
    let term: fn(&TrajectoryStats) -> f64 = match mode {
        FusionMode::Uncertainty => |s| uncertainty_weight(s) * s.score,
        _ => |s| s.score,
    };
    Ok((0..ego.len())
        .map(|i| term(&ego[i]) + supporters.values().map(|v| term(&v[i])).sum::<f64>())
        .collect())
}

/// Candidate ids sorted by fused score, highest first; ties keep id order.
pub fn prioritize(fused: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..fused.len()).collect();
    ids.sort_by(|&a, &b| fused[b].total_cmp(&fused[a]));
    ids
}

/// Runs one round over a deterministic bus. Every participant scores the
/// candidates in its own raster frame; the message trace is left on `bus`.
pub fn run_round_on(
    scn: &Scenario,
    cands: &CandidateSet,
    agents: &dyn PerceptionSource,
    cfg: &FusionConfig,
    bus: &mut Bus,
) -> Result<RoundLog> {
    let ego_state = scn.ego_at_t0()?;
    let ego_pose = ego_state.pose;
    let fp = ego_state.footprint;
    let score = |id: ActorId| -> Result<Vec<TrajectoryStats>> {
        let agent = agents.perception(id)?;
        agent.score(&transform_candidates(cands, &ego_pose, &agent.anchor()), &fp)
    };
    let ego_stats = score(scn.ego_id)?;
    let supporters = if cfg.mode == FusionMode::EgoOnly { Vec::new() } else { scn.supporters(cfg.n_available) };

    let mut replies = BTreeMap::new();
    let mut selected = BTreeSet::new();
    if !supporters.is_empty() {
        bus.send(scn.ego_id, None, Payload::Pose(ego_pose));
        let mut stats = BTreeMap::new();
        let mut concerns = BTreeMap::new();
        for &id in &supporters {
            let s = score(id)?;
            let w = concern(&s);
            bus.send(id, Some(scn.ego_id), Payload::Concern(w));
            concerns.insert(id, w);
            stats.insert(id, s);
        }
        selected = match cfg.mode {
            FusionMode::NaiveAll => supporters.iter().copied().collect(),
            _ => select_supporters(concern(&ego_stats), &concerns, cfg.selection_policy, cfg.n_available),
        };
        for &id in &selected {
            bus.send(scn.ego_id, Some(id), Payload::ScoreRequest);
            let s = stats.remove(&id).expect("selected supporters come from the pool");
            bus.send(id, Some(scn.ego_id), Payload::Scores(s.clone()));
            replies.insert(id, s);
        }
    }
    let fused = fuse(&ego_stats, &replies, cfg.mode)?;
    let ranking = prioritize(&fused);
    Ok(RoundLog {
        mode: cfg.mode,
        policy: cfg.selection_policy,
        supporters,
        links_used: selected.len(),
        selected: selected.into_iter().collect(),
        bytes_sent: bus.bytes_sent(),
        fused,
        ranking,
    })
}

pub fn run_round(
    scn: &Scenario,
    cands: &CandidateSet,
    agents: &dyn PerceptionSource,
    cfg: &FusionConfig,
) -> Result<RoundLog> {
    run_round_on(scn, cands, agents, cfg, &mut Bus::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_candidates, CandidateConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn st(score: f64, f_o: f64, p_o: f64, f_s: f64, p_s: f64) -> TrajectoryStats {
        TrajectoryStats { score, f_o, p_o, f_s, p_s }
    }

    fn scores(v: &[f64]) -> Vec<TrajectoryStats> {
        v.iter().map(|&s| st(s, 0.0, 0.0, 0.0, 0.0)).collect()
    }

    #[test]
    fn uncertainty_weight_values() {
        assert_eq!(uncertainty_weight(&st(0.0, 0.0, 0.0, 0.0, 0.0)), 1.0);
        assert_eq!(uncertainty_weight(&st(0.0, 1.0, 3.0, 0.0, 0.0)), 8.0);
        assert_eq!(uncertainty_weight(&st(0.0, 0.0, 0.0, 1.0, 1.0)), 0.25);
    }

    #[test]
    fn concern_sums_occupancy() {
        assert_eq!(concern(&[]), 0.0);
        assert_abs_diff_eq!(concern(&[st(0.0, 0.0, 0.2, 0.0, 0.0), st(0.0, 0.0, 0.5, 0.0, 0.0)]), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn selection_policies() {
        let none = BTreeMap::new();
        for p in [SelectionPolicy::Top1, SelectionPolicy::AboveEgo, SelectionPolicy::Threshold(0.0)] {
            assert!(select_supporters(0.0, &none, p, 3).is_empty());
        }
        let w: BTreeMap<ActorId, f64> = [(1, 3.0), (2, 4.0)].into();
        assert!(select_supporters(5.0, &w, SelectionPolicy::AboveEgo, 3).is_empty());
        assert!(select_supporters(5.0, &w, SelectionPolicy::Top1, 3).is_empty());
        let w: BTreeMap<ActorId, f64> = [(1, 3.0), (2, 4.0), (3, 2.0)].into();
        assert_eq!(select_supporters(1.0, &w, SelectionPolicy::Top1, 3), [2].into());
        assert_eq!(select_supporters(1.0, &w, SelectionPolicy::AboveEgo, 3), [1, 2, 3].into());
        assert_eq!(select_supporters(1.0, &w, SelectionPolicy::Threshold(2.5), 3), [1, 2].into());
        // capped to the lowest ids
        assert_eq!(select_supporters(1.0, &w, SelectionPolicy::AboveEgo, 1), [1].into());
        let tie: BTreeMap<ActorId, f64> = [(4, 2.0), (7, 2.0)].into();
        assert_eq!(select_supporters(0.0, &tie, SelectionPolicy::Top1, 3), [4].into());
        let r = select_supporters(0.0, &w, SelectionPolicy::Random(9), 3);
        assert_eq!(r.len(), 1);
        assert_eq!(r, select_supporters(0.0, &w, SelectionPolicy::Random(9), 3));
    }

    #[test]
    fn fusion_arithmetic() {
        let ego = scores(&[2.0, -1.0]);
        let sup: BTreeMap<ActorId, _> = [(5, scores(&[1.0, -3.0]))].into();
        assert_eq!(fuse(&ego, &sup, FusionMode::NaiveAll).unwrap(), vec![3.0, -4.0]);
        assert_eq!(fuse(&ego, &sup, FusionMode::EgoOnly).unwrap(), vec![2.0, -1.0]);
        // neutral weights reduce to selective
        assert_eq!(
            fuse(&ego, &sup, FusionMode::Uncertainty).unwrap(),
            fuse(&ego, &sup, FusionMode::Selective).unwrap()
        );
        let bad: BTreeMap<ActorId, _> = [(5, scores(&[1.0]))].into();
        assert!(matches!(fuse(&ego, &bad, FusionMode::NaiveAll), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn weighted_fusion() {
        let ego = vec![st(2.0, 0.0, 0.0, 1.0, 1.0), st(1.0, 0.0, 0.0, 0.0, 0.0)];
        let sup: BTreeMap<ActorId, _> = [(1, vec![st(-1.0, 1.0, 3.0, 0.0, 0.0), st(3.0, 0.0, 0.0, 0.0, 0.0)])].into();
        let f = fuse(&ego, &sup, FusionMode::Uncertainty).unwrap();
        assert_eq!(f, vec![2.0 * 0.25 - 8.0, 4.0]);
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(prioritize(&[1.0, 3.0, 2.0]), vec![1, 2, 0]);
        assert_eq!(prioritize(&[0.5; 6]), vec![0, 1, 2, 3, 4, 5]);
        assert!(prioritize(&[]).is_empty());
    }

    #[test]
    fn quarter_turn_transform() {
        let mut cands = generate_candidates(0.0, 0.1, 1, &CandidateConfig::default()).unwrap();
        cands.candidates.truncate(1);
        cands.candidates[0].poses = vec![Pose2::new(1.0, 0.0, 0.0)];
        let out = transform_candidates(&cands, &Pose2::IDENTITY, &Pose2::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        assert_abs_diff_eq!(out[0][0].x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0][0].y, -1.0, epsilon = 1e-12);
        let same = transform_candidates(&cands, &Pose2::new(3.0, 1.0, 0.4), &Pose2::new(3.0, 1.0, 0.4));
        assert_abs_diff_eq!(same[0][0].x, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(same[0][0].y, 0.0, epsilon = 1e-9);
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -4.0..4.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn transform_round_trip(ego in pose(), anchor in pose(), v in 0.0..15.0f64) {
            let cands = generate_candidates(v, 0.1, 10, &CandidateConfig::default()).unwrap();
            let out = transform_candidates(&cands, &ego, &anchor);
            prop_assert_eq!(out.len(), cands.len());
            for (c, o) in cands.candidates.iter().zip(&out) {
                prop_assert_eq!(c.poses.len(), o.len());
                for (p, q) in c.poses.iter().zip(o) {
                    let a = ego.compose(p);
                    let b = anchor.compose(q);
                    prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
                    prop_assert!(crate::geometry::normalize_angle(a.theta - b.theta).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn ranking_matches_stable_sort(f in prop::collection::vec(-5i32..5, 0..40)) {
            let fused: Vec<f64> = f.iter().map(|&v| v as f64 * 0.5).collect();
            let mut oracle: Vec<(usize, f64)> = fused.iter().copied().enumerate().collect();
            // insertion sort, descending, stable
            for i in 1..oracle.len() {
                let mut j = i;
                while j > 0 && oracle[j - 1].1 < oracle[j].1 {
                    oracle.swap(j - 1, j);
                    j -= 1;
                }
            }
            let expect: Vec<usize> = oracle.iter().map(|p| p.0).collect();
            prop_assert_eq!(prioritize(&fused), expect);
        }

        #[test]
        fn ranking_scale_invariant(f in prop::collection::vec(-100.0..100.0f64, 1..64), c in 0.01..100.0f64) {
            let scaled: Vec<f64> = f.iter().map(|v| v * c).collect();
            prop_assert_eq!(prioritize(&f), prioritize(&scaled));
        }

        #[test]
        fn naive_sum_ignores_labels(
            ego in prop::collection::vec(-10.0..10.0f64, 8),
            a in prop::collection::vec(-10.0..10.0f64, 8),
            b in prop::collection::vec(-10.0..10.0f64, 8),
        ) {
            let one: BTreeMap<ActorId, _> = [(1, scores(&a)), (2, scores(&b))].into();
            let two: BTreeMap<ActorId, _> = [(1, scores(&b)), (2, scores(&a))].into();
            let f1 = fuse(&scores(&ego), &one, FusionMode::NaiveAll).unwrap();
            let f2 = fuse(&scores(&ego), &two, FusionMode::NaiveAll).unwrap();
            for (x, y) in f1.iter().zip(&f2) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
