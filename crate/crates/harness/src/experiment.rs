//! The end-to-end pipeline: tracks to scenarios, optional augmentation,
//! policy evaluation and result files.
//!
//! Scenario-level work fans out on a rayon pool; every parallel stage
//! collects in input order, so the output bytes do not depend on `jobs`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cobev_core::scenario::{
    assess_criticality, augment_adversarial, generate_candidates, slice_scenarios, CriticalityReport, Scenario,
    ScenarioManifest,
};
use cobev_core::sim::{anchor_spec, observation_sequence, ObservationRaster, TrackSet};
use cobev_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Source};
use crate::error::{HarnessError, Result};
use crate::eval::{aggregate, prepare, run_policy, EvalResult, PreparedScenario};
use crate::policy::{PolicyName, PolicySpec};
use crate::render::{render_raster, render_sdf, write_file};
use crate::suite::occlusion_suite;
use crate::synth::synth_tracks;

pub const METRICS_HEADER: &str = "policy,n_available,k,collision_rate_pct,rel_to_ego_pct,avg_links,avg_bytes";

/// A pool with `jobs` threads, or rayon's default when `None`.
pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(HarnessError::Config("jobs must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Track set of a `tracks` or `synth` source, with a label for manifests.
pub fn load_tracks(cfg: &ExperimentConfig) -> Result<(TrackSet, String)> {
    match cfg.source() {
        Source::Tracks(path) => {
            let file =
                File::open(&path).map_err(|source| HarnessError::File { path: path.display().to_string(), source })?;
            Ok((TrackSet::read_csv(BufReader::new(file), cfg.windows.dt)?, path.display().to_string()))
        }
        Source::Synth(s) => Ok((synth_tracks(&s, cfg.seed)?, format!("synth:{}", cfg.seed))),
        Source::Suite(_) => Err(HarnessError::Config("the occlusion suite has no single track set".into())),
    }
}

/// Scenarios before optional augmentation. The occlusion suite is already
/// augmented and is returned as is.
pub fn seed_scenarios(cfg: &ExperimentConfig) -> Result<(Vec<Scenario>, Option<String>)> {
    match cfg.source() {
        Source::Suite(s) => {
            let scns = occlusion_suite(&s, cfg.seed, &cfg.grid.spec()?, &cfg.sensor_config(), &cfg.candidate_config())?;
            Ok((scns, Some(format!("suite:{}", cfg.seed))))
        }
        _ => {
            let (tracks, label) = load_tracks(cfg)?;
            Ok((slice_scenarios(&tracks, cfg.seed, &cfg.slice_config())?, Some(label)))
        }
    }
}

pub fn assess_all(scns: &[Scenario], cfg: &ExperimentConfig) -> Result<Vec<CriticalityReport>> {
    let sensor = cfg.sensor_config();
    let candidates = cfg.candidate_config();
    scns.par_iter()
        .map(|scn| {
            let ego = scn.ego_at_t0()?;
            let cands = generate_candidates(ego.speed, scn.tracks.dt, scn.horizon(), &candidates)?;
            Ok(assess_criticality(scn, &cands, &sensor)?)
        })
        .collect()
}

/// Augments every scenario that admits it and drops the rest. Scenarios
/// that are already critical are not eligible.
pub fn augment_all(scns: &[Scenario], cfg: &ExperimentConfig) -> Result<Vec<Scenario>> {
    let aug_cfg = cfg.augment.unwrap_or_default();
    let grid = cfg.grid.spec()?;
    let sensor = cfg.sensor_config();
    let candidates = cfg.candidate_config();
    let results: Vec<Option<Scenario>> = scns
        .par_iter()
        .map(|scn| {
            let ego = scn.ego_at_t0()?;
            let cands = generate_candidates(ego.speed, scn.tracks.dt, scn.horizon(), &candidates)?;
            match augment_adversarial(scn, &cands, &sensor, &grid, &aug_cfg, cfg.seed) {
                Ok(aug) => Ok(Some(aug)),
                Err(CoreError::AugmentationInfeasible { .. }) | Err(CoreError::InvalidInput(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// Scenario set the experiment evaluates.
pub fn scenarios(cfg: &ExperimentConfig) -> Result<(Vec<Scenario>, Option<String>)> {
    let (scns, source) = seed_scenarios(cfg)?;
    let scns = if cfg.augment.is_some() && !matches!(cfg.source(), Source::Suite(_)) {
        augment_all(&scns, cfg)?
    } else {
        scns
    };
    if scns.is_empty() {
        return Err(HarnessError::NoScenarios);
    }
    Ok((scns, source))
}

pub fn manifests(scns: &[Scenario], source: Option<&str>) -> Vec<ScenarioManifest> {
    scns.iter().map(|s| s.manifest(source)).collect()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Every policy result of one experiment, in config order per budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub scenarios: usize,
    /// Ego-only reference shared by every budget.
    pub ego: EvalResult,
    pub results: Vec<EvalResult>,
}

impl ExperimentOutcome {
    pub fn result(&self, policy: PolicyName, n_available: usize) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.policy == policy && r.n_available == n_available)
    }
}

fn fmt_rel(rate: f64, ego: f64) -> String {
    if ego == 0.0 {
        "nan".into()
    } else {
        format!("{:.4}", 100.0 * rate / ego)
    }
}

pub fn metrics_csv(outcome: &ExperimentOutcome) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in &outcome.results {
        for (i, &k) in r.k_values.iter().enumerate() {
            let rate = r.rates_pct[i];
            let _ = writeln!(
                s,
                "{},{},{},{:.4},{},{:.4},{:.4}",
                r.policy,
                r.n_available,
                k,
                rate,
                fmt_rel(rate, outcome.ego.rates_pct[i]),
                r.avg_links,
                r.avg_bytes
            );
        }
    }
    s
}

fn run_on_pool(prepared: &[PreparedScenario], spec: &PolicySpec, n: usize, cfg: &ExperimentConfig) -> Result<EvalResult> {
    let logs = prepared
        .par_iter()
        .map(|p| run_policy(p, spec).map(|(log, _)| log))
        .collect::<Result<Vec<_>>>()?;
    aggregate(prepared, logs, spec, n, &cfg.k_values, cfg.top_k)
}

/// Prepares `scns` and runs every configured policy and budget on them.
pub fn evaluate_all(scns: Vec<Scenario>, cfg: &ExperimentConfig) -> Result<(Vec<PreparedScenario>, ExperimentOutcome)> {
    let ctx = cfg.eval_context()?;
    let max_n = cfg.n_available.iter().copied().max().unwrap_or(0);
    let omniscient = cfg.policies.contains(&PolicyName::EgoStar);
    let count = scns.len();
    let prepared = scns
        .into_par_iter()
        .map(|s| prepare(s, &ctx, max_n, omniscient))
        .collect::<Result<Vec<_>>>()?;
    let ego_spec = PolicySpec::new(PolicyName::Ego, cfg.selection, 0, cfg.seed);
    let ego = run_on_pool(&prepared, &ego_spec, 0, cfg)?;
    let mut results = Vec::new();
    for &n in &cfg.n_available {
        for &name in &cfg.policies {
            let spec = PolicySpec::new(name, cfg.selection, n, cfg.seed);
            let mut r = if name == PolicyName::Ego { ego.clone() } else { run_on_pool(&prepared, &spec, n, cfg)? };
            r.n_available = n;
            results.push(r);
        }
    }
    Ok((prepared, ExperimentOutcome { scenarios: count, ego, results }))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a ExperimentConfig,
    scenarios: usize,
    metrics: &'static str,
    top_k: crate::eval::TopKMode,
}

/// Writes the ego observation at `t = 0` and its forecast masks and costmap
/// planes for every plan step.
pub fn render_scenario(prepared: &PreparedScenario, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let scn = &prepared.scn;
    let spec = anchor_spec(&scn.tracks, scn.ego_id, scn.t0(), &cfg.grid.spec()?)?;
    let now = observation_sequence(&scn.tracks, scn.ego_id, scn.t0(), scn.t0(), &spec, &cfg.sensor_config())?;
    let stem = |name: String| dir.join(format!("scenario_{}_{name}", scn.id));
    render_raster(&now[0], &stem("observation_t0".into()))?;
    if let Some(p) = prepared.perception(scn.ego_id) {
        for t in 0..p.masks.horizon {
            let forecast = ObservationRaster { spec: p.masks.spec, cells: p.masks.plane(t).to_vec() };
            render_raster(&forecast, &stem(format!("forecast_t{}", t + 1)))?;
            render_sdf(&p.costmap.spec, p.costmap.plane(t), p.costmap.cap, &stem(format!("costmap_t{}", t + 1)))?;
        }
    }
    Ok(())
}

/// Runs the whole pipeline and writes `metrics.csv`, `scenarios.json`,
/// `run.json` and one JSON log per policy and budget under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        let (scns, source) = scenarios(cfg)?;
        write_file(&out.join("scenarios.json"), &to_json(&manifests(&scns, source.as_deref()))?)?;
        let (prepared, outcome) = evaluate_all(scns, cfg)?;
        write_file(&out.join("metrics.csv"), metrics_csv(&outcome).as_bytes())?;
        for r in &outcome.results {
            write_file(&out.join("logs").join(format!("{}_n{}.json", r.policy, r.n_available)), &to_json(r)?)?;
        }
        let run = RunManifest { config: cfg, scenarios: outcome.scenarios, metrics: METRICS_HEADER, top_k: cfg.top_k };
        write_file(&out.join("run.json"), &to_json(&run)?)?;
        if cfg.render {
            render_scenario(&prepared[0], cfg, &out.join("render"))?;
        }
        Ok(outcome)
    })
}
