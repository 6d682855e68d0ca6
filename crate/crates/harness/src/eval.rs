//! Per-scenario preparation and policy evaluation.
//!
//! Everything a policy needs that does not depend on the policy itself
//! (candidates, ground-truth collisions, every agent's perception) is built
//! once per scenario and shared by all policy runs.

use std::collections::BTreeMap;

use cobev_core::costmap::DEFAULT_CAP;
use cobev_core::forecast::{Persistence, PersistenceConfig};
use cobev_core::protocol::{
    build_perception, run_round_on, AgentPerception, Bus, ForecastSource, OracleTruth, PerceptionOptions, RoundLog,
    SelectionPolicy,
};
use cobev_core::scenario::{generate_candidates, ground_truth_collisions, stream_rng, CandidateConfig, CandidateSet, Scenario};
use cobev_core::sim::SensorConfig;
use cobev_core::{ActorId, GridSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::policy::{PolicyName, PolicySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ForecasterChoice {
    Oracle,
    Persistence(PersistenceConfig),
}

/// How the top-k collision statistic is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKMode {
    /// Fraction of the k best-ranked candidates that collide.
    #[default]
    Fraction,
    /// Whether any of the k best-ranked candidates collides.
    Any,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub grid: GridSpec,
    pub sensor: SensorConfig,
    pub candidates: CandidateConfig,
    pub forecaster: ForecasterChoice,
    pub truth: OracleTruth,
    pub cap: f64,
}

impl EvalContext {
    pub fn new(grid: GridSpec, sensor: SensorConfig) -> Self {
        Self {
            grid,
            sensor,
            candidates: CandidateConfig::default(),
            forecaster: ForecasterChoice::Oracle,
            truth: OracleTruth::default(),
            cap: DEFAULT_CAP,
        }
    }
}

pub struct PreparedScenario {
    pub scn: Scenario,
    pub cands: CandidateSet,
    /// Ground-truth collision flag per candidate, shared by every policy.
    pub collisions: Vec<bool>,
    agents: BTreeMap<ActorId, AgentPerception>,
    omniscient: Option<BTreeMap<ActorId, AgentPerception>>,
}

impl PreparedScenario {
    pub fn perception(&self, id: ActorId) -> Option<&AgentPerception> {
        self.agents.get(&id)
    }
}

/// Builds candidates from the ego speed at `t = 0`, the ground-truth
/// collision labels and the perception of the ego and of up to
/// `max_supporters` supporters. The omniscient ego view is only built when
/// `with_omniscient` is set.
pub fn prepare(scn: Scenario, ctx: &EvalContext, max_supporters: usize, with_omniscient: bool) -> Result<PreparedScenario> {
    let ego = scn.ego_at_t0()?;
    let cands = generate_candidates(ego.speed, scn.tracks.dt, scn.horizon(), &ctx.candidates)?;
    let collisions = ground_truth_collisions(&scn, &cands)?;
    let persistence;
    let source = match ctx.forecaster {
        ForecasterChoice::Oracle => ForecastSource::Oracle,
        ForecasterChoice::Persistence(config) => {
            persistence = Persistence { config: PersistenceConfig { horizon: scn.horizon(), ..config } };
            ForecastSource::Model(&persistence)
        }
    };
    let opts = PerceptionOptions { omniscient: false, truth: ctx.truth, cap: ctx.cap };
    let mut agents = BTreeMap::new();
    for id in std::iter::once(scn.ego_id).chain(scn.supporters(max_supporters)) {
        agents.insert(id, build_perception(&scn, id, source, &ctx.grid, &ctx.sensor, &opts)?);
    }
    let omniscient = if with_omniscient {
        let opts = PerceptionOptions { omniscient: true, ..opts };
        let p = build_perception(&scn, scn.ego_id, source, &ctx.grid, &ctx.sensor, &opts)?;
        Some(BTreeMap::from([(scn.ego_id, p)]))
    } else {
        None
    };
    Ok(PreparedScenario { scn, cands, collisions, agents, omniscient })
}

/// Per-scenario seed for randomized policies.
fn scenario_seed(seed: u64, scenario: usize) -> u64 {
    stream_rng(seed, scenario as u64).gen()
}

/// Runs one policy on one prepared scenario, returning the round log and
/// the message trace.
pub fn run_policy(p: &PreparedScenario, spec: &PolicySpec) -> Result<(RoundLog, Bus)> {
    let mut cfg = spec.cfg;
    if let SelectionPolicy::Random(s) = cfg.selection_policy {
        cfg.selection_policy = SelectionPolicy::Random(scenario_seed(s, p.scn.id));
    }
    let agents = match spec.name {
        PolicyName::EgoStar => p
            .omniscient
            .as_ref()
            .ok_or_else(|| HarnessError::Config("omniscient perception was not prepared".into()))?,
        _ => &p.agents,
    };
    let mut bus = Bus::default();
    let mut log = run_round_on(&p.scn, &p.cands, agents, &cfg, &mut bus)?;
    if spec.name == PolicyName::RandTraj {
        let mut rng = stream_rng(spec.seed, p.scn.id as u64);
        log.ranking.shuffle(&mut rng);
    }
    Ok((log, bus))
}

/// Colliding candidates among the first `k` of `ranking`.
pub fn colliding_in_top(ranking: &[usize], collisions: &[bool], k: usize) -> usize {
    ranking.iter().take(k).filter(|&&i| collisions[i]).count()
}

/// One scenario's contribution to the top-k statistic, in `[0, 1]`.
pub fn top_k_value(ranking: &[usize], collisions: &[bool], k: usize, mode: TopKMode) -> f64 {
    let k = k.min(ranking.len());
    if k == 0 {
        return 0.0;
    }
    let hits = colliding_in_top(ranking, collisions, k);
    match mode {
        TopKMode::Fraction => hits as f64 / k as f64,
        TopKMode::Any => f64::from(u8::from(hits > 0)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario_id: usize,
    pub links_used: usize,
    pub bytes_sent: usize,
    /// Colliding candidates among the top k, per requested k.
    pub top_k_colliding: Vec<usize>,
    pub round: RoundLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub policy: PolicyName,
    pub n_available: usize,
    pub k_values: Vec<usize>,
    pub records: Vec<ScenarioRecord>,
    /// Top-k collision rate in percent, per requested k.
    pub rates_pct: Vec<f64>,
    pub avg_links: f64,
    pub avg_bytes: f64,
}

impl EvalResult {
    pub fn rate(&self, k: usize) -> Option<f64> {
        self.k_values.iter().position(|&x| x == k).map(|i| self.rates_pct[i])
    }
}

/// Aggregates per-scenario round logs into top-k rates and link counts.
pub fn aggregate(
    prepared: &[PreparedScenario],
    logs: Vec<RoundLog>,
    spec: &PolicySpec,
    n_available: usize,
    k_values: &[usize],
    mode: TopKMode,
) -> Result<EvalResult> {
    if prepared.is_empty() {
        return Err(HarnessError::NoScenarios);
    }
    let n = prepared.len() as f64;
    let mut sums = vec![0.0; k_values.len()];
    let mut records = Vec::with_capacity(prepared.len());
    for (p, round) in prepared.iter().zip(logs) {
        for (s, &k) in sums.iter_mut().zip(k_values) {
            *s += top_k_value(&round.ranking, &p.collisions, k, mode);
        }
        records.push(ScenarioRecord {
            scenario_id: p.scn.id,
            links_used: round.links_used,
            bytes_sent: round.bytes_sent,
            top_k_colliding: k_values.iter().map(|&k| colliding_in_top(&round.ranking, &p.collisions, k)).collect(),
            round,
        });
    }
    Ok(EvalResult {
        policy: spec.name,
        n_available,
        k_values: k_values.to_vec(),
        rates_pct: sums.iter().map(|s| 100.0 * s / n).collect(),
        avg_links: records.iter().map(|r| r.links_used as f64).sum::<f64>() / n,
        avg_bytes: records.iter().map(|r| r.bytes_sent as f64).sum::<f64>() / n,
        records,
    })
}

/// Runs `spec` over every prepared scenario, sequentially.
pub fn evaluate(
    prepared: &[PreparedScenario],
    spec: &PolicySpec,
    n_available: usize,
    k_values: &[usize],
    mode: TopKMode,
) -> Result<EvalResult> {
    let logs = prepared.iter().map(|p| run_policy(p, spec).map(|(log, _)| log)).collect::<Result<Vec<_>>>()?;
    aggregate(prepared, logs, spec, n_available, k_values, mode)
}
