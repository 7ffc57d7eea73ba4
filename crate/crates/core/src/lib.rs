//! Benchmark toolkit for single-object tracking in low light.
//!
//! The crate covers the whole evaluation path: sequence loading and
//! validation ([`dataset`]), annotation-derived challenge attributes
//! ([`attributes`]), one-pass evaluation runs ([`ope`]) of the built-in
//! [`trackers`], the success / precision / normalized-precision metrics
//! ([`metrics`]) and report emission ([`report`]). [`synth`] renders
//! low-light sequences with exact ground truth so every stage can be checked
//! without external data, and [`prompt_gate`] implements gated darkness-clue
//! prompt aggregation together with its closed-form and gradient checks.

pub mod attributes;
pub mod config;
pub mod dataset;
pub mod enhance;
mod error;
pub mod imaging;
pub mod metrics;
pub mod ope;
pub mod prompt_gate;
pub mod report;
pub mod synth;
pub mod trackers;

pub use error::{Error, Result};

pub use attributes::{Attribute, AttributeSet};
pub use dataset::{BBox, Frame, Sequence, TrackResult, Visibility};
pub use metrics::EvalReport;
