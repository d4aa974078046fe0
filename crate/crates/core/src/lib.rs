//! Estimand-aware matching, weighting, and treatment-effect estimation for
//! observational two-group comparisons.
//!
//! The crate is organized around the question "for whom is the effect being
//! estimated?". Every weight vector and effect estimate carries an explicit
//! [`Estimand`](data::Estimand) label (ATT, ATU, ATE, or ATO), and design
//! operations that restrict the sample (calipers, trimming, common support)
//! relabel their output accordingly instead of silently changing the target
//! population.
//!
//! Modules:
//!
//! - [`data`] — datasets, potential-outcome tables, weight vectors, match
//!   structures, and validation.
//! - [`propensity`] — maximum-likelihood logistic propensity scores.
//! - [`weighting`] — inverse-probability, standardized-mortality-ratio,
//!   overlap, and matching weights, plus trimming and effective sample size.
//! - [`matching`] — greedy and optimal pair matching, full matching via
//!   network flow, fine stratification, coarsened exact matching, and
//!   cardinality matching.
//! - [`diagnostics`] — standardized mean differences, variance ratios, and
//!   overlap/positivity reports with per-estimand feasibility verdicts.
//! - [`estimation`] — Hájek contrasts, stratified estimators, g-computation,
//!   ratio measures, subgroup estimates, and a unit-resampling bootstrap.
//! - [`pipeline`] — end-to-end estimand/method pipelines and the
//!   estimand-method compatibility map.
//! - [`simulation`] — data-generating processes with known potential
//!   outcomes for validating that each method targets the population it
//!   claims to.
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature when building without `std`.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("estimand-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod data;
pub mod diagnostics;
pub mod estimation;
pub mod matching;
pub mod pipeline;
pub mod propensity;
pub mod simulation;
pub mod weighting;

mod error;
mod float;
mod linalg;
mod rng;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
