//! Financial contagion on random interbank networks.
//!
//! Banks hold external assets and lend to each other. A loss vector over the
//! assets pushes some banks past their capital buffer, and failed borrowers
//! drag their lenders down. This crate solves the resulting threshold cascade,
//! maps how loss space partitions by final state, and estimates the expected
//! systemic cost of random systems across network connectivity and portfolio
//! diversification.

// `!(x < y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod distributions;
pub mod error;
pub mod generators;
pub mod model;
pub mod montecarlo;
pub mod partition;
pub mod registry;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    asset_losses, cascade_gfp, cascade_lfp, cost, failure_count, step, BankState, ExposureSystem,
    LossVector, Matrix, ModelParams, RegionSignature,
};
