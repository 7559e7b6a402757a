//! `σ(r)` of an i.i.d.-perturbed stationary lattice from the pair identity
//! `σ(r) = 1 − |B_r| + Σ_{x ≠ 0} E[ĵ_r(x + p_x − p_0)]`.

use rand::Rng;
use serde::Serialize;

use super::kernel::KernelEval;
use crate::error::{Error, Result};
use crate::fields::{remainder_constant, Distribution};
use crate::lattice::{ball_volume, dist2, norm2, Lattice, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePoint {
    pub r: f64,
    pub sigma: f64,
    /// Monte Carlo standard error over the pair-difference draws.
    pub stderr: f64,
    /// Bound on the contribution of `|x| > M`.
    pub remainder_bound: f64,
}

pub fn iid_sigma_oracle<R: Rng + ?Sized>(
    lattice: &Lattice,
    r: f64,
    dist: &Distribution,
    truncation: f64,
    pair_samples: usize,
    rng: &mut R,
) -> Result<OraclePoint> {
    Ok(iid_sigma_curve(lattice, &[r], dist, truncation, pair_samples, rng)?[0])
}

/// Evaluates every radius on the same pair-difference draws so the curve is smooth in `r`.
pub fn iid_sigma_curve<R: Rng + ?Sized>(
    lattice: &Lattice,
    radii: &[f64],
    dist: &Distribution,
    truncation: f64,
    pair_samples: usize,
    rng: &mut R,
) -> Result<Vec<OraclePoint>> {
    let dim = lattice.dim();
    dist.validate(dim)?;
    if !dist.has_moment(dim as f64) {
        return Err(Error::InvalidArgument("the pair identity needs a finite d-th moment".into()));
    }
    if pair_samples < 2 {
        return Err(Error::InvalidArgument("pair_samples must be at least 2".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    if !(truncation >= 20.0 * r_max) || truncation < 2.0 * lattice.cell_diameter() {
        return Err(Error::InvalidArgument(format!(
            "truncation radius M = {truncation} is too small; need M ≥ 20·r = {}",
            20.0 * r_max
        )));
    }
    let mut deltas = PointSet::with_capacity(dim, pair_samples);
    let mut p = vec![0.0; dim];
    let mut q = vec![0.0; dim];
    for _ in 0..pair_samples {
        dist.sample_into(rng, &mut p);
        dist.sample_into(rng, &mut q);
        let delta: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
        deltas.push(&delta);
    }
    let remainder = remainder_constant(dim) * dist.tail_moment(dim, truncation / 16.0);
    sigma_from_pair_differences(lattice, radii, &deltas, truncation, remainder)
}

/// The pair identity evaluated on given draws `Δ = p_x − p_0`, truncated to `|x| ≤ M`.
pub fn sigma_from_pair_differences(
    lattice: &Lattice,
    radii: &[f64],
    deltas: &PointSet,
    truncation: f64,
    remainder_bound: f64,
) -> Result<Vec<OraclePoint>> {
    let dim = lattice.dim();
    let kernels: Vec<KernelEval> = radii.iter().map(|&r| KernelEval::new(dim, r)).collect::<Result<_>>()?;
    let m2 = truncation * truncation;
    let mut sums = vec![Vec::with_capacity(deltas.len()); radii.len()];
    let mut center = vec![0.0; dim];
    for delta in deltas.iter() {
        // ĵ(x + Δ) ≠ 0 only for x in the ball of radius 2r around −Δ
        for i in 0..dim {
            center[i] = -delta[i];
        }
        for (k, kernel) in kernels.iter().enumerate() {
            let mut s = 0.0;
            lattice.visit_ball(&center, 2.0 * kernel.radius(), |n, x| {
                if n.iter().all(|&v| v == 0) || norm2(x) > m2 {
                    return;
                }
                s += kernel.hat_radial(dist2(x, &center).sqrt());
            })?;
            sums[k].push(s);
        }
    }
    Ok(radii
        .iter()
        .zip(&sums)
        .map(|(&r, s)| {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = if n > 1.0 { s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            OraclePoint { r, sigma: 1.0 - ball_volume(dim, r) + mean, stderr: (var / n).sqrt(), remainder_bound }
        })
        .collect())
}
