//! Bessel function of the first kind, order one.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Below this the power series is used, above it the Hankel expansion.
pub const SEAM: f64 = 12.0;

/// `sup_{x>0} x·J1(x)²`, attained near x ≈ 2.166.
pub const SUP_X_J1_SQUARED: f64 = 0.681;

pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x <= SEAM {
        j1_series(x)
    } else {
        j1_hankel(x)
    }
}

/// `Σ_k (-1)^k (x/2)^(2k+1) / (k!(k+1)!)`, truncated at 50 terms.
pub fn j1_series(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = half;
    let mut sum = term;
    for k in 0..50 {
        term *= -q / ((k + 1) as f64 * (k + 2) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Large-argument expansion `sqrt(2/(πx)) (P cos χ − Q sin χ)`, `χ = x − 3π/4`,
/// summed until the terms stop shrinking.
pub fn j1_hankel(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if term.abs() >= last || term.abs() < 1e-17 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let (s, c) = x.sin_cos();
    // cos(x − 3π/4) and sin(x − 3π/4) without forming the shifted argument
    let cos_chi = (s - c) * FRAC_1_SQRT_2;
    let sin_chi = -(s + c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}
