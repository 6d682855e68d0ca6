//! Synthesizes each agent's local perception from shared global tracks.

pub mod lidar;
pub mod raster;
pub mod tracks;

pub use lidar::{raycast, LidarScan, Obstacle};
pub use raster::{
    anchor_spec, observation_sequence, observation_sequence_with, render_observation,
    render_observation_with, scan_frame, visible_actor_ids, ObservationRaster, RenderOptions,
    SemanticClass, SensorConfig,
};
pub use tracks::{ActorKind, ActorState, TrackSet};
