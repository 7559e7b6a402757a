//! Stationary Gaussian displacement fields on the discrete torus `(Z/GZ)^d`,
//! with spectral density `ρ(ω) = amplitude·|ω|^(-2+δ)` and `ρ(0) = 0`.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A realized field: `values[site * dim + component]`, sites in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianField {
    pub dim: usize,
    pub grid: usize,
    pub values: Vec<f64>,
}

impl GaussianField {
    pub fn site_index(&self, x: &[i64]) -> usize {
        let g = self.grid as i64;
        x.iter().fold(0usize, |acc, &v| acc * self.grid + v.rem_euclid(g) as usize)
    }

    pub fn displacement(&self, x: &[i64]) -> &[f64] {
        let i = self.site_index(x);
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

pub(crate) fn validate(dim: usize, delta: f64, grid: usize, amplitude: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidField(format!("spectral delta must be positive, got {delta}")));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidField(format!("spectral amplitude must be positive, got {amplitude}")));
    }
    if grid < 4 || !grid.is_power_of_two() {
        return Err(Error::InvalidField(format!("spectral grid must be a power of two ≥ 4, got {grid}")));
    }
    if dim == 0 || dim > 3 || (grid as f64).powi(dim as i32) > (1u64 << 26) as f64 {
        return Err(Error::InvalidField(format!("spectral grid {grid}^{dim} is too large")));
    }
    Ok(())
}

fn wrapped(m: usize, grid: usize) -> f64 {
    if m <= grid / 2 {
        m as f64
    } else {
        m as f64 - grid as f64
    }
}

/// `ρ` at each torus frequency, row-major.
pub fn spectral_density(dim: usize, delta: f64, grid: usize, amplitude: f64) -> Vec<f64> {
    let total = grid.pow(dim as u32);
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    (0..total)
        .map(|flat| {
            let mut rest = flat;
            let mut w2 = 0.0;
            for _ in 0..dim {
                let w = step * wrapped(rest % grid, grid);
                w2 += w * w;
                rest /= grid;
            }
            if w2 == 0.0 {
                0.0
            } else {
                amplitude * w2.powf(0.5 * (-2.0 + delta))
            }
        })
        .collect()
}

/// Single-coordinate covariance `C(h) = G^{-d} Σ_ω ρ(ω) cos(ω·h)` at every lag, row-major.
pub fn covariance_table(dim: usize, delta: f64, grid: usize, amplitude: f64) -> Vec<f64> {
    let rho = spectral_density(dim, delta, grid, amplitude);
    let mut data: Vec<Complex<f64>> = rho.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_nd(&mut data, dim, grid, true);
    let norm = (grid as f64).powi(dim as i32);
    data.iter().map(|c| c.re / norm).collect()
}

pub fn pointwise_variance(dim: usize, delta: f64, grid: usize, amplitude: f64) -> f64 {
    let rho = spectral_density(dim, delta, grid, amplitude);
    rho.iter().sum::<f64>() / (grid as f64).powi(dim as i32)
}

/// In-place multidimensional FFT over a row-major `grid^dim` array.
pub(crate) fn fft_nd(data: &mut [Complex<f64>], dim: usize, grid: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(grid) } else { planner.plan_fft_forward(grid) };
    let mut line = vec![Complex::new(0.0, 0.0); grid];
    for axis in 0..dim {
        let stride = grid.pow((dim - 1 - axis) as u32);
        let block = stride * grid;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }
}

/// Each displacement coordinate is an independent field: one complex inverse
/// transform of `√ρ·W` (W standard complex normal) yields two independent real
/// fields in its real and imaginary parts.
pub fn gaussian_field_synthesize<R: Rng + ?Sized>(dim: usize, delta: f64, grid: usize, amplitude: f64, rng: &mut R) -> Result<GaussianField> {
    validate(dim, delta, grid, amplitude)?;
    let sqrt_rho: Vec<f64> = spectral_density(dim, delta, grid, amplitude).into_iter().map(f64::sqrt).collect();
    let sites = sqrt_rho.len();
    let norm = (sites as f64).sqrt().recip();
    let mut values = vec![0.0; sites * dim];
    let mut data = vec![Complex::new(0.0, 0.0); sites];
    let mut component = 0;
    while component < dim {
        for (slot, &s) in data.iter_mut().zip(&sqrt_rho) {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            *slot = Complex::new(s * a, s * b);
        }
        fft_nd(&mut data, dim, grid, true);
        for (site, c) in data.iter().enumerate() {
            values[site * dim + component] = c.re * norm;
            if component + 1 < dim {
                values[site * dim + component + 1] = c.im * norm;
            }
        }
        component += 2;
    }
    Ok(GaussianField { dim, grid, values })
}
