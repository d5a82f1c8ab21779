//! Multiple testing with compound p-values: the Benjamini–Hochberg step-up
//! procedure, constructions that pool information across tests, exact
//! worst-case adversarial distributions, and a seeded Monte Carlo harness
//! that verifies the FDR bounds numerically.
//!
//! Compound p-values relax per-test superuniformity to an averaged condition:
//! Σ_{i∈H0} P(p_i ≤ t) ≤ m·t. The `constructions` module builds such families
//! (pooled permutation nulls, averaged CDF banks, decreasing-density
//! envelopes, and more), `adversarial` realizes the distributions that make
//! BH misbehave as much as theory allows, `sim` measures realized FDR against
//! the proven bounds, and `bounds` checks the numeric recursions behind the
//! bound constants.
//!
//! Monte Carlo replicates run in parallel via rayon by default; build with
//! `--no-default-features` for a dependency-free sequential core. Results are
//! bit-identical either way.

pub mod adversarial;
pub mod bh;
pub mod bounds;
pub mod constructions;
pub mod error;
pub mod numerics;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
