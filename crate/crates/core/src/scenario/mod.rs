//! Scenario slicing, candidate generation, criticality assessment and
//! adversarial augmentation.

pub mod augment;
pub mod candidates;
pub mod criticality;
pub mod window;

pub use augment::{augment_adversarial, AugmentConfig, AugmentationRecord};
pub use candidates::{generate_candidates, rollout, Candidate, CandidateConfig, CandidateSet};
pub use criticality::{
    assess_criticality, candidate_world_poses, criticality_histogram, ground_truth_collisions,
    CriticalityReport, Histogram,
};
pub use window::{slice_scenarios, Scenario, ScenarioManifest, SliceConfig, WindowConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, reproducible RNG stream for `(seed, stream)`; used so that
/// per-scenario sampling does not depend on processing order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
