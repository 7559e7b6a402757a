//! Deterministic lattice term `A(r) = (2π)^d Σ_{k ∈ L*, k ≠ 0} j_r(2πk)`, the
//! rescaled number variance of the unperturbed stationary lattice.

use std::f64::consts::PI;

use serde::Serialize;

use super::bessel::SUP_X_J1_SQUARED;
use super::kernel::KernelEval;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

const INITIAL_CUTOFF: f64 = 64.0;
const MAX_CUTOFF: f64 = 8192.0;
const RELATIVE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeTerm {
    pub r: f64,
    /// Partial dual sum plus the averaged tail beyond the cutoff.
    pub value: f64,
    /// Rigorous bound on the discarded tail `Σ_{|k|>K}` (before the average is added back).
    pub tail_bound: f64,
    /// Change of `value` over the last cutoff doubling.
    pub residual_estimate: f64,
    pub cutoff: f64,
    pub converged: bool,
}

/// Mean of the discarded tail, from `x J1(x)² ≈ (2/π) sin²(x − π/4)` averaged to `1/π`
/// (d=2) and `sin² → 1/2` (d=1), integrated against unit dual density.
fn mean_tail(dim: usize, r: f64, cutoff: f64) -> f64 {
    match dim {
        1 => 1.0 / (2.0 * PI * PI * r * cutoff),
        _ => 1.0 / (PI * PI * r * cutoff),
    }
}

fn tail_bound(dim: usize, r: f64, cutoff: f64, cell: f64) -> f64 {
    match dim {
        1 => 1.0 / (PI * PI * r * cutoff),
        _ => {
            let u = cutoff - 2.0 * cell;
            if u <= 0.0 {
                return f64::INFINITY;
            }
            SUP_X_J1_SQUARED / (PI * r) * (1.0 / u + cell / (2.0 * u * u))
        }
    }
}

fn dual_shell_sum(dual: &Lattice, kernel: &KernelEval, inner: f64, outer: f64) -> Result<f64> {
    let scale = (2.0 * PI).powi(dual.dim() as i32);
    let origin = vec![0.0; dual.dim()];
    let inner2 = inner * inner;
    let mut sum = 0.0;
    dual.visit_ball(&origin, outer, |_, k| {
        let k2: f64 = k.iter().map(|v| v * v).sum();
        if k2 > inner2 {
            sum += kernel.jr_radial(2.0 * PI * k2.sqrt());
        }
    })?;
    Ok(scale * sum)
}

/// Sums the dual lattice over `|k| ≤ K`, doubling `K` from 64 until the
/// tail-corrected value moves by less than `1e-5·|A|`.
pub fn lattice_a_term(lattice: &Lattice, r: f64) -> Result<LatticeTerm> {
    let dim = lattice.dim();
    if dim > 2 {
        return Err(Error::InvalidArgument(format!("the lattice term is computed for d ≤ 2, got d = {dim}")));
    }
    let kernel = KernelEval::new(dim, r)?;
    let dual = lattice.dual();
    let cell = dual.cell_diameter();
    let mut cutoff = INITIAL_CUTOFF.max(8.0 * cell);
    let mut partial = dual_shell_sum(&dual, &kernel, 0.0, cutoff)?;
    let mut value = partial + mean_tail(dim, r, cutoff);
    loop {
        let next = 2.0 * cutoff;
        partial += dual_shell_sum(&dual, &kernel, cutoff, next)?;
        let next_value = partial + mean_tail(dim, r, next);
        let change = (next_value - value).abs();
        cutoff = next;
        value = next_value;
        let converged = change < RELATIVE_TOLERANCE * value.abs();
        if converged || cutoff >= MAX_CUTOFF {
            return Ok(LatticeTerm {
                r,
                value,
                tail_bound: tail_bound(dim, r, cutoff, cell),
                residual_estimate: change,
                cutoff,
                converged,
            });
        }
    }
}

/// `Σ_{x ∈ L} ĵ_r(x) − |B_r|`, the same quantity summed directly over the lattice.
pub fn lattice_a_term_direct(lattice: &Lattice, r: f64) -> Result<f64> {
    let kernel = KernelEval::new(lattice.dim(), r)?;
    let origin = vec![0.0; lattice.dim()];
    let mut sum = 0.0;
    lattice.visit_ball(&origin, 2.0 * r, |_, x| sum += kernel.hat(x))?;
    Ok(sum - crate::lattice::ball_volume(lattice.dim(), r))
}

/// Number variance of the stationary shifted integer lattice in an interval of length `2r`.
pub fn exact_number_variance_1d(r: f64) -> f64 {
    let f = (2.0 * r).fract();
    f * (1.0 - f)
}

pub fn exact_sigma_1d(r: f64) -> f64 {
    exact_number_variance_1d(r) / (2.0 * r)
}
