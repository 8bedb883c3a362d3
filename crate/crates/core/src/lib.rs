//! Feature-curve extraction from 3D point clouds.
//!
//! The pipeline scores points as edge/corner candidates, proposes open
//! curves (lines, circular arcs, cubic B-splines) between corner pairs and
//! closed circles from feature-space clusters, prunes redundant proposals,
//! and evaluates the result against ground truth. Neural scoring is replaced
//! by pluggable scorers; a procedural scene generator supplies labelled data.

pub mod closed_proposals;
pub mod error;
pub mod detection;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod open_proposals;
pub mod optimize;
pub mod pipeline;
pub mod selection;
pub mod synthdata;
pub mod truth;

pub use error::{Error, Result};
