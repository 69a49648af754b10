//! Sublinear identity and equivalence testing of discrete distributions.
//!
//! Given sample access to an unknown distribution p over `[n]` (and either a
//! description of, or samples from, a second distribution q), these testers
//! decide whether p and q are close or far under combinations of total
//! variation, Hellinger, KL, chi-squared, and l2 distance, using far fewer
//! samples than it would take to learn the distributions. The crate also
//! ships exact distance computations, analytic mean/variance oracles for the
//! test statistics, hard-instance constructors, and a Monte Carlo harness
//! that measures empirical error rates.

pub mod distances;
pub mod distributions;
pub mod equivalence;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod identity;
pub mod instances;
pub mod io;

pub use error::{Error, Result};
