//! Multi-agent bird's-eye-view planning toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: poses, grids, footprints, rectangle overlap.
//! * [`sim`]: track ingestion, lidar raycasting and semantic BEV rasters.
//! * [`scenario`]: scenario slicing, candidate generation, criticality
//!   assessment and adversarial augmentation.
//! * [`forecast`]: confidence maps over the four semantic classes.
//! * [`costmap`]: signed distance fields and trajectory statistics.
//! * [`protocol`]: the distributed scoring round with byte accounting.
//! * [`export`]: binary plane containers for confidence maps and costmaps.

pub mod costmap;
pub mod error;
pub mod export;
pub mod forecast;
pub mod geometry;
pub mod protocol;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{Cell, Footprint, GridSpec, Pose2};

/// Identifier of a scene actor, stable across frames.
pub type ActorId = u32;
