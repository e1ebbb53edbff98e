//! Spatio-temporal graph networks for polar ice layer thickness prediction.
//!
//! The crate builds fully connected geospatial graphs from airborne radar
//! flight lines, attaches physical climate features by Delaunay
//! interpolation, and trains recurrent graph networks (GraphSAGE-LSTM and
//! GCN-LSTM variants) to predict the thickness of the 15 annual layers
//! beneath the most recent five. Everything is deterministic given a seed:
//! training histories, checkpoints, and evaluation reports reproduce
//! bit-for-bit.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod geo;
pub mod layers;
pub mod model;
pub mod nn;
pub mod training;

pub use error::{CoreError, Result};
