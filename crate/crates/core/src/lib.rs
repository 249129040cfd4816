//! Metric grounding of RGB reconstructions, bird's-eye-view traversability
//! mapping and deployment-zone selection for aerial-to-ground robot release.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod bev;
pub mod cli;
pub mod cloud;
pub mod config;
pub mod deployment;
pub mod error;
pub mod features;
pub mod fmt;
pub mod geom;
pub mod grounding;
pub mod lift;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod synth;
pub mod trajectory;
pub mod traversability;

pub use error::{Error, Result};
