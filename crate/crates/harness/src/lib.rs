//! Batch evaluation on top of `cobev-core`: synthetic traffic, the crafted
//! occlusion suite, policy evaluation, experiment runs and image output.

pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod policy;
pub mod render;
pub mod suite;
pub mod synth;

pub use error::{HarnessError, Result};
