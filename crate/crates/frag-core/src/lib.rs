//! Race-condition detection toolkit for FHIR-style transaction logs.
//!
//! The pipeline: [`generator`] synthesizes seeded log corpora with injected
//! ground-truth races, [`graph`] builds the resource access graph, the
//! three-pass [`detector`] and the time-window [`baseline`] scanner produce
//! detections, [`eval`] scores both against ground truth, and [`oracle`]
//! provides brute-force definitional checks for validation and property
//! testing.

pub mod baseline;
pub mod detector;
pub mod error;
pub mod eval;
pub mod generator;
pub mod graph;
pub mod io;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
