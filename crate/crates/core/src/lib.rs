//! Simulation and semi-analytic analysis of perturbed stationary lattices.
//!
//! A perturbed lattice is the point process `{x + U + p_x : x in L}` where `U`
//! is uniform in a fundamental domain of the lattice `L` and `p` is a
//! stationary displacement field. The crate measures the number variance
//! `Var[|PL ∩ B_r|]` and its rescaled form `σ(r) = Var / |B_r|` by Monte Carlo,
//! and cross-checks it against deterministic lattice sums built on the Bessel
//! kernel pair `j_r` / `ĵ_r`.
//!
//! Modules:
//! - [`lattice`]: bases, duals, fundamental domains, certified ball counts.
//! - [`fields`]: displacement fields (i.i.d., spectral Gaussian, block constructions).
//! - [`estimator`]: parallel, seed-deterministic variance estimation and diagnostics.
//! - [`analytic`]: Bessel kernels, the lattice term and an i.i.d. pair-correlation oracle.
//! - [`io`]: experiment configs, manifests, CSV output and canned recipes.

pub mod analytic;
pub mod error;
pub mod estimator;
pub mod fields;
pub mod io;
pub mod lattice;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::Lattice;
