//! The evaluated planners: baselines, cooperative variants and the
//! ground-truth-vision reference.

use std::fmt;
use std::str::FromStr;

use cobev_core::protocol::{FusionConfig, FusionMode, SelectionPolicy};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyName {
    #[serde(rename = "ego")]
    Ego,
    #[serde(rename = "randTraj")]
    RandTraj,
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "ego_all")]
    EgoAll,
    #[serde(rename = "ego_concern")]
    EgoConcern,
    #[serde(rename = "ego_concern_uncertainty")]
    EgoConcernUncertainty,
    #[serde(rename = "ego_star")]
    EgoStar,
}

impl PolicyName {
    pub const ALL: [PolicyName; 7] = [
        PolicyName::Ego,
        PolicyName::RandTraj,
        PolicyName::Rand,
        PolicyName::EgoAll,
        PolicyName::EgoConcern,
        PolicyName::EgoConcernUncertainty,
        PolicyName::EgoStar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Ego => "ego",
            PolicyName::RandTraj => "randTraj",
            PolicyName::Rand => "rand",
            PolicyName::EgoAll => "ego_all",
            PolicyName::EgoConcern => "ego_concern",
            PolicyName::EgoConcernUncertainty => "ego_concern_uncertainty",
            PolicyName::EgoStar => "ego_star",
        }
    }

    /// Whether the policy talks to supporters at all.
    pub fn communicates(self) -> bool {
        matches!(
            self,
            PolicyName::Rand | PolicyName::EgoAll | PolicyName::EgoConcern | PolicyName::EgoConcernUncertainty
        )
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown policy {s:?}")))
    }
}

/// A policy with its fusion settings for one supporter budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: PolicyName,
    pub cfg: FusionConfig,
    pub seed: u64,
}

impl PolicySpec {
    /// `selection` applies to the concern-gated policies; `rand` always
    /// picks one supporter at random and non-communicating policies ignore
    /// `n_available`.
    pub fn new(name: PolicyName, selection: SelectionPolicy, n_available: usize, seed: u64) -> Self {
        let (mode, policy, n) = match name {
            PolicyName::Ego | PolicyName::RandTraj | PolicyName::EgoStar => (FusionMode::EgoOnly, selection, 0),
            PolicyName::Rand => (FusionMode::Selective, SelectionPolicy::Random(seed), n_available),
            PolicyName::EgoAll => (FusionMode::NaiveAll, selection, n_available),
            PolicyName::EgoConcern => (FusionMode::Selective, selection, n_available),
            PolicyName::EgoConcernUncertainty => (FusionMode::Uncertainty, selection, n_available),
        };
        PolicySpec { name, cfg: FusionConfig { mode, selection_policy: policy, n_available: n }, seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in PolicyName::ALL {
            assert_eq!(p.as_str().parse::<PolicyName>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert!("ego+all".parse::<PolicyName>().is_err());
    }

    #[test]
    fn specs_map_to_modes() {
        let s = PolicySpec::new(PolicyName::Ego, SelectionPolicy::AboveEgo, 3, 0);
        assert_eq!(s.cfg.mode, FusionMode::EgoOnly);
        assert_eq!(s.cfg.n_available, 0);
        let s = PolicySpec::new(PolicyName::Rand, SelectionPolicy::AboveEgo, 2, 5);
        assert_eq!(s.cfg.selection_policy, SelectionPolicy::Random(5));
        let s = PolicySpec::new(PolicyName::EgoConcernUncertainty, SelectionPolicy::Top1, 3, 0);
        assert_eq!((s.cfg.mode, s.cfg.selection_policy, s.cfg.n_available), (FusionMode::Uncertainty, SelectionPolicy::Top1, 3));
    }
}
