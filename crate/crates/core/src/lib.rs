//! Synthesis pipeline for micro-expression training data.
//!
//! The crate turns Action-Unit (AU) time series and clip annotations into AU
//! triplets from three sources (real micro-expressions, early-stage
//! macro-expressions and an expert activation table), composes identity x AU
//! dataset manifests for an external face generator, and provides the
//! evaluation side: subject-wise folds, UF1/UAR scoring, permutation tests,
//! AU statistics and a desk-scale ablation harness built on a mock generator.
//!
//! Every random decision draws from an [`rng::RngStream`] addressed by
//! `(seed, purpose, ordinal)`, so results do not depend on evaluation order or
//! on the number of worker threads.

pub mod analysis;
pub mod au;
pub mod composer;
pub mod error;
pub mod eval;
pub mod format;
pub mod ingest;
pub mod mockgen;
pub mod par;
pub mod rng;
pub mod samplers;
pub mod toy;

pub use error::{Error, Result};

/// Version string embedded in every artifact header.
pub const TOOL_VERSION: &str = concat!("miex/", env!("CARGO_PKG_VERSION"));
