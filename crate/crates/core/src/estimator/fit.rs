//! Decay-exponent fits and dyadic partial sums.

use serde::Serialize;

use super::VarianceCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least squares of `log y` on `log x`. Points with `y ≤ 0` are dropped. When every
/// `y` has a positive standard error the fit is weighted by `(y/se)²` and the
/// slope error is the weighted-LS formula; otherwise it is unweighted and the
/// error comes from the residuals.
pub fn fit_power_law(x: &[f64], y: &[f64], se: &[f64]) -> Result<DecayFit> {
    let rows: Vec<(f64, f64, f64)> = x
        .iter()
        .zip(y)
        .zip(se)
        .filter(|((&xi, &yi), _)| yi > 0.0 && yi.is_finite() && xi > 0.0)
        .map(|((&xi, &yi), &s)| (xi.ln(), yi.ln(), s / yi))
        .collect();
    if rows.len() < 4 {
        return Err(Error::InvalidArgument(format!("a decay fit needs at least 4 usable points, got {}", rows.len())));
    }
    let weighted = rows.iter().all(|&(_, _, rel)| rel > 0.0 && rel.is_finite());
    let w: Vec<f64> = rows.iter().map(|&(_, _, rel)| if weighted { 1.0 / (rel * rel) } else { 1.0 }).collect();
    let sw: f64 = w.iter().sum();
    let mx = rows.iter().zip(&w).map(|(r, wi)| wi * r.0).sum::<f64>() / sw;
    let my = rows.iter().zip(&w).map(|(r, wi)| wi * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().zip(&w).map(|(r, wi)| wi * (r.0 - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().zip(&w).map(|(r, wi)| wi * (r.0 - mx) * (r.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = rows.iter().map(|r| (r.1 - intercept - slope * r.0).powi(2)).sum();
        (rss / (rows.len() as f64 - 2.0) / sxx).sqrt()
    };
    Ok(DecayFit { slope, stderr, intercept, points: rows.len() })
}

/// Slope of `log σ` against `log r` over radii `≥ r_min`.
pub fn fit_decay_exponent(curve: &VarianceCurve, r_min: f64) -> Result<DecayFit> {
    let pts: Vec<_> = curve.points.iter().filter(|p| p.r >= r_min).collect();
    let x: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.sigma).collect();
    let se: Vec<f64> = pts.iter().map(|p| p.sigma_stderr).collect();
    fit_power_law(&x, &y, &se)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSum {
    pub n: u32,
    pub sigma: f64,
    pub partial: f64,
    pub stderr: f64,
}

/// `Σ_{m ≤ n} σ(2^m)` over the dyadic radii `2^n` present, errors added in quadrature.
pub fn star_hu_partial_sum(samples: &[(f64, f64, f64)]) -> Vec<PartialSum> {
    let mut dyadic: Vec<(u32, f64, f64)> = samples
        .iter()
        .filter_map(|&(r, sigma, se)| {
            let n = r.log2().round();
            (n >= 0.0 && (r - 2f64.powf(n)).abs() <= 1e-9 * r).then_some((n as u32, sigma, se))
        })
        .collect();
    dyadic.sort_by_key(|v| v.0);
    let mut partial = 0.0;
    let mut var = 0.0;
    dyadic
        .into_iter()
        .map(|(n, sigma, se)| {
            partial += sigma;
            var += se * se;
            PartialSum { n, sigma, partial, stderr: var.sqrt() }
        })
        .collect()
}

/// The flattening criterion: the last increment is below 10% of the total.
/// Over a handful of dyadic scales this cannot tell a logarithmic divergence
/// from convergence, so it is read together with the increments themselves.
pub fn flattened(sums: &[PartialSum]) -> bool {
    match sums.last() {
        Some(last) if sums.len() >= 2 => last.sigma.abs() < 0.1 * last.partial.abs(),
        _ => false,
    }
}
