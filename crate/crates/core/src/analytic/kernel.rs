//! The kernel pair `j_r`, `ĵ_r` with `ĵ_r = (1_{B_r} ∗ 1_{B_r}) / |B_r|` and `∫ j_r = 1`.

use std::f64::consts::PI;

use super::bessel::bessel_j1;
use crate::error::{Error, Result};
use crate::lattice::{ball_volume, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    dim: usize,
    r: f64,
}

impl KernelEval {
    pub fn new(dim: usize, r: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!("kernels are available in dimensions 1 and 2, not {dim}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel radius must be positive, got {r}")));
        }
        Ok(KernelEval { dim, r })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// `ĵ_r(t)`: the tent in d=1, Euclid's hat in d=2.
    pub fn hat(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim);
        self.hat_radial(norm2(t).sqrt())
    }

    pub fn hat_radial(&self, rho: f64) -> f64 {
        let s = rho.abs() / (2.0 * self.r);
        if s >= 1.0 {
            return 0.0;
        }
        match self.dim {
            1 => 1.0 - s,
            _ => 1.0 - (2.0 / PI) * (s.asin() + s * (1.0 - s * s).sqrt()),
        }
    }

    /// `j_r(t)`; at `t = 0` the continuous limit `|B_r|/(2π)^d`.
    pub fn jr(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.dim);
        self.jr_radial(norm2(t).sqrt())
    }

    pub fn jr_radial(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        if rho == 0.0 {
            return self.jr_at_zero();
        }
        match self.dim {
            1 => {
                let s = (self.r * rho).sin();
                s * s / (PI * self.r * rho * rho)
            }
            _ => {
                let j = bessel_j1(self.r * rho);
                j * j / (PI * rho * rho)
            }
        }
    }

    pub fn jr_at_zero(&self) -> f64 {
        ball_volume(self.dim, self.r) / (2.0 * PI).powi(self.dim as i32)
    }
}
