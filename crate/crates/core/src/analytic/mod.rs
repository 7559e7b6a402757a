//! Deterministic and semi-analytic evaluation of the rescaled number variance.

pub mod bessel;
mod kernel;
mod lattice_sum;
mod oracle;

pub use bessel::bessel_j1;
pub use kernel::KernelEval;
pub use lattice_sum::{exact_number_variance_1d, exact_sigma_1d, lattice_a_term, lattice_a_term_direct, LatticeTerm};
pub use oracle::{iid_sigma_curve, iid_sigma_oracle, sigma_from_pair_differences, OraclePoint};
