//! Simulation and evaluation toolkit for single-molecule localization
//! microscopy sequence-to-set benchmarks.
//!
//! The pipeline is: [`sim`] produces raw blinking localizations for one
//! acquisition, [`filter`] applies the same-frame detection limit, and
//! [`dataset`] turns many acquisitions into a split, checksummed dataset.
//! [`metrics`] scores predicted emitter sets and [`baseline`] provides a
//! clustering reference predictor.

pub mod baseline;
pub mod cli;
pub mod dataset;
pub mod filter;
pub mod metrics;
pub mod point;
pub mod registry;
pub mod rng;
pub mod sim;
pub mod stats;

pub use point::Point;
