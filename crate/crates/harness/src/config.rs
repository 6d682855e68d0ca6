//! Experiment configuration: a JSON document validated field by field.

use std::path::{Path, PathBuf};

use cobev_core::costmap::DEFAULT_CAP;
use cobev_core::protocol::{OracleTruth, SelectionPolicy};
use cobev_core::scenario::{AugmentConfig, CandidateConfig, SliceConfig, WindowConfig};
use cobev_core::sim::SensorConfig;
use cobev_core::{GridSpec, Pose2};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::eval::{EvalContext, ForecasterChoice, TopKMode};
use crate::policy::PolicyName;
use crate::suite::SuiteConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Cell size in meters.
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: 0.5, width: 100, height: 100 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(Pose2::IDENTITY, self.resolution, self.width, self.height)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub n_rays: usize,
    pub max_range: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self { n_rays: s.n_rays, max_range: s.max_range }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowsSection {
    pub obs_s: f64,
    pub plan_s: f64,
    /// Frame period of the tracks, seconds.
    pub dt: f64,
}

impl Default for WindowsSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        Self { obs_s: w.obs_s, plan_s: w.plan_s, dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidatesSection {
    pub n: usize,
    pub accel_range: (f64, f64),
    pub yaw_rate_range: (f64, f64),
}

impl Default for CandidatesSection {
    fn default() -> Self {
        let c = CandidateConfig::default();
        Self { n: c.n, accel_range: c.accel_range, yaw_rate_range: c.yaw_rate_range }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceSection {
    /// Frames between window starts; one full window when absent.
    pub stride: Option<usize>,
    /// Communication-enabled vehicles per scenario, ego included.
    pub n_comm: usize,
}

impl Default for SliceSection {
    fn default() -> Self {
        let s = SliceConfig::default();
        Self { stride: s.stride, n_comm: s.n_comm }
    }
}

/// Where scenarios come from. Exactly one of `tracks`, `synth` and `suite`
/// may be given; synthetic traffic with default settings is used when none
/// is.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Tracks(PathBuf),
    Synth(SynthConfig),
    Suite(SuiteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tracks: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub suite: Option<SuiteConfig>,
    pub grid: GridConfig,
    pub sensor: SensorSection,
    pub windows: WindowsSection,
    pub candidates: CandidatesSection,
    pub slice: SliceSection,
    /// Adversarial augmentation of sliced scenarios; failures are dropped.
    pub augment: Option<AugmentConfig>,
    pub policies: Vec<PolicyName>,
    pub n_available: Vec<usize>,
    pub k_values: Vec<usize>,
    pub seed: u64,
    pub selection: SelectionPolicy,
    pub forecaster: ForecasterChoice,
    pub oracle_truth: OracleTruth,
    pub top_k: TopKMode,
    pub cap: f64,
    /// Render the first scenario's rasters and costmaps next to the metrics.
    pub render: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tracks: None,
            synth: None,
            suite: None,
            grid: GridConfig::default(),
            sensor: SensorSection::default(),
            windows: WindowsSection::default(),
            candidates: CandidatesSection::default(),
            slice: SliceSection::default(),
            augment: None,
            policies: PolicyName::ALL.to_vec(),
            n_available: vec![1, 2, 3],
            k_values: vec![1, 10],
            seed: 0,
            selection: SelectionPolicy::AboveEgo,
            forecaster: ForecasterChoice::Oracle,
            oracle_truth: OracleTruth::ObservedActors,
            top_k: TopKMode::Fraction,
            cap: DEFAULT_CAP,
            render: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates; schema errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::File { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let given = [self.tracks.is_some(), self.synth.is_some(), self.suite.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(invalid("at most one of tracks, synth and suite may be given"));
        }
        self.grid.spec()?;
        if self.sensor.n_rays == 0 || !(self.sensor.max_range > 0.0) {
            return Err(invalid("sensor needs at least one ray and a positive range"));
        }
        if !(self.windows.dt > 0.0) {
            return Err(invalid("windows.dt must be positive"));
        }
        self.window().frames(self.windows.dt)?;
        self.candidate_config().side()?;
        if let Some(s) = &self.synth {
            s.validate()?;
            if (s.dt - self.windows.dt).abs() > 1e-12 {
                return Err(invalid(format!("synth.dt {} differs from windows.dt {}", s.dt, self.windows.dt)));
            }
        }
        if self.suite.is_some() && (self.windows.dt - 0.1).abs() > 1e-12 {
            return Err(invalid("the occlusion suite is generated at dt = 0.1"));
        }
        if let Some(a) = self.augment.as_ref().or(self.suite.as_ref().map(|s| &s.augment)) {
            a.validate()?;
        }
        if self.policies.is_empty() {
            return Err(invalid("policies must not be empty"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(invalid("k_values must be non-empty and positive"));
        }
        if self.n_available.is_empty() {
            return Err(invalid("n_available must not be empty"));
        }
        if let SelectionPolicy::Threshold(tau) = self.selection {
            if !(tau >= 0.0) {
                return Err(invalid("selection threshold must be non-negative"));
            }
        }
        if !(self.cap > 0.0) {
            return Err(invalid("cap must be positive"));
        }
        Ok(())
    }

    pub fn source(&self) -> Source {
        match (&self.tracks, &self.synth, &self.suite) {
            (Some(p), _, _) => Source::Tracks(p.clone()),
            (_, _, Some(s)) => Source::Suite(s.clone()),
            (_, Some(s), _) => Source::Synth(s.clone()),
            _ => Source::Synth(SynthConfig { dt: self.windows.dt, ..SynthConfig::default() }),
        }
    }

    pub fn sensor_config(&self) -> SensorConfig {
        SensorConfig { n_rays: self.sensor.n_rays, max_range: self.sensor.max_range }
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig { obs_s: self.windows.obs_s, plan_s: self.windows.plan_s }
    }

    pub fn slice_config(&self) -> SliceConfig {
        SliceConfig { window: self.window(), stride: self.slice.stride, n_comm: self.slice.n_comm }
    }

    pub fn candidate_config(&self) -> CandidateConfig {
        CandidateConfig {
            n: self.candidates.n,
            accel_range: self.candidates.accel_range,
            yaw_rate_range: self.candidates.yaw_rate_range,
        }
    }

    pub fn eval_context(&self) -> Result<EvalContext> {
        let mut ctx = EvalContext::new(self.grid.spec()?, self.sensor_config());
        ctx.candidates = self.candidate_config();
        ctx.forecaster = self.forecaster;
        ctx.truth = self.oracle_truth;
        ctx.cap = self.cap;
        Ok(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"grid": {"resolution": "fine"}}"#).unwrap_err();
        match err {
            HarnessError::Schema { path, .. } => assert_eq!(path, "grid.resolution"),
            e => panic!("unexpected {e}"),
        }
        let err = ExperimentConfig::from_json(r#"{"sensor": {"n_rays": 8, "fov": 1}}"#).unwrap_err();
        assert!(matches!(err, HarnessError::Schema { ref path, .. } if path == "sensor.fov"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"policies": ["ego", "oracle"]}"#).unwrap_err();
        assert!(matches!(err, HarnessError::Schema { ref path, .. } if path == "policies[1]"), "{err}");
    }

    #[test]
    fn semantic_errors_are_rejected() {
        for bad in [
            r#"{"tracks": "a.csv", "synth": {}}"#,
            r#"{"k_values": [0]}"#,
            r#"{"candidates": {"n": 10}}"#,
            r#"{"windows": {"dt": 0.0}}"#,
            r#"{"synth": {"dt": 0.05}}"#,
            r#"{"selection": {"threshold": -1.0}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(HarnessError::Config(_) | HarnessError::Core(_))), "{bad}");
        }
    }

    #[test]
    fn full_document_round_trips() {
        let text = r#"{
            "suite": {"scenarios": 20},
            "grid": {"resolution": 0.5, "width": 80, "height": 80},
            "sensor": {"n_rays": 180, "max_range": 20.0},
            "windows": {"obs_s": 3.0, "plan_s": 1.0, "dt": 0.1},
            "candidates": {"n": 16, "accel_range": [-3.0, 1.0], "yaw_rate_range": [-0.4, 0.4]},
            "policies": ["ego", "ego_concern"],
            "n_available": [1, 3],
            "k_values": [1, 5],
            "seed": 9,
            "selection": "top1",
            "forecaster": {"kind": "oracle"},
            "oracle_truth": "rendered",
            "top_k": "any"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(matches!(cfg.source(), Source::Suite(ref s) if s.scenarios == 20));
        assert_eq!(cfg.selection, SelectionPolicy::Top1);
        assert_eq!(cfg.oracle_truth, OracleTruth::Rendered);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
