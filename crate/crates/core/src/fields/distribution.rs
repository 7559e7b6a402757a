//! Single-site displacement laws for i.i.d. fields.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use super::tagged::tagged_deserialize;
use crate::error::{Error, Result};
use crate::lattice::unit_ball_volume;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    /// Independent centered normal coordinates with standard deviation `sd`.
    Gaussian { sd: f64 },
    /// Uniform on the cube `[-half_width, half_width]^d`.
    Uniform { half_width: f64 },
    /// Isotropic: uniform direction, radius Pareto with `P(R > s) = (scale/s)^tail_index` for `s ≥ scale`.
    Pareto { tail_index: f64, scale: f64 },
    /// A constant displacement; after centering it is identically zero.
    PointMass { value: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(remote = "Distribution", rename_all = "snake_case", deny_unknown_fields)]
enum DistributionMirror {
    Gaussian { sd: f64 },
    Uniform { half_width: f64 },
    Pareto { tail_index: f64, scale: f64 },
    PointMass { value: Vec<f64> },
}

tagged_deserialize!(Distribution, DistributionMirror);

pub(crate) fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            n2 += *v * *v;
        }
        if n2 > 1e-300 {
            let inv = n2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

impl Distribution {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidField(m));
        match self {
            Distribution::Gaussian { sd } if !(*sd >= 0.0 && sd.is_finite()) => bad(format!("gaussian sd must be ≥ 0, got {sd}")),
            Distribution::Uniform { half_width } if !(*half_width >= 0.0 && half_width.is_finite()) => {
                bad(format!("uniform half_width must be ≥ 0, got {half_width}"))
            }
            Distribution::Pareto { tail_index, scale } if !(*tail_index > 0.0 && *scale > 0.0 && scale.is_finite()) => {
                bad(format!("pareto needs tail_index > 0 and scale > 0, got {tail_index}, {scale}"))
            }
            Distribution::PointMass { value } if value.len() != dim || value.iter().any(|v| !v.is_finite()) => {
                bad(format!("point_mass value must be a finite vector of length {dim}"))
            }
            _ => Ok(()),
        }
    }

    /// Draws a centered displacement into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Distribution::Gaussian { sd } => out.iter_mut().for_each(|v| *v = sd * rng.sample::<f64, _>(StandardNormal)),
            Distribution::Uniform { half_width } => {
                out.iter_mut().for_each(|v| *v = half_width * (2.0 * rng.random::<f64>() - 1.0))
            }
            Distribution::Pareto { tail_index, scale } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let radius = scale * u.powf(-1.0 / tail_index);
                uniform_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            Distribution::PointMass { .. } => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Almost-sure bound on `|p|`, if any.
    pub fn bound(&self, dim: usize) -> Option<f64> {
        match *self {
            Distribution::Gaussian { sd } if sd == 0.0 => Some(0.0),
            Distribution::Gaussian { .. } | Distribution::Pareto { .. } => None,
            Distribution::Uniform { half_width } => Some(half_width * (dim as f64).sqrt()),
            Distribution::PointMass { .. } => Some(0.0),
        }
    }

    /// Quantile of `|p|` at level `q`.
    pub fn norm_quantile(&self, dim: usize, q: f64) -> f64 {
        match *self {
            Distribution::Gaussian { sd } => {
                if sd == 0.0 {
                    return 0.0;
                }
                let chi2 = ChiSquared::new(dim as f64).expect("positive degrees of freedom");
                sd * chi2.inverse_cdf(q).sqrt()
            }
            Distribution::Pareto { tail_index, scale } => scale * (1.0 - q).powf(-1.0 / tail_index),
            _ => self.bound(dim).unwrap_or(0.0),
        }
    }

    /// Whether `E|p|^m` is finite.
    pub fn has_moment(&self, m: f64) -> bool {
        match *self {
            Distribution::Pareto { tail_index, .. } => m < tail_index,
            _ => true,
        }
    }

    /// `E[|p|^d 1{|p| ≥ a}]` (an upper bound for the uniform law).
    pub fn tail_moment(&self, dim: usize, a: f64) -> f64 {
        let d = dim as f64;
        match *self {
            Distribution::Gaussian { sd } => {
                if sd == 0.0 {
                    return 0.0;
                }
                // E[χ^d 1{χ ≥ b}] = 2^{d/2} Γ(d) Q(d, b²/2) / Γ(d/2)
                let b = a.max(0.0) / sd;
                let log_pref = 0.5 * d * 2f64.ln() + ln_gamma(d) - ln_gamma(0.5 * d);
                let upper = if b == 0.0 { 1.0 } else { gamma_ur(d, 0.5 * b * b) };
                sd.powf(d) * log_pref.exp() * upper
            }
            Distribution::Uniform { half_width } => {
                let bound = half_width * d.sqrt();
                if a > bound {
                    0.0
                } else {
                    bound.powf(d)
                }
            }
            Distribution::Pareto { tail_index, scale } => {
                if tail_index <= d {
                    return f64::INFINITY;
                }
                let t = a.max(scale);
                tail_index * scale.powf(tail_index) * t.powf(d - tail_index) / (tail_index - d)
            }
            Distribution::PointMass { .. } => 0.0,
        }
    }

    /// `E|p|` of the centered law, where a closed form exists.
    pub fn mean_norm(&self, dim: usize) -> Option<f64> {
        let d = dim as f64;
        match *self {
            Distribution::Gaussian { sd } => Some(sd * 2f64.sqrt() * (ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d)).exp()),
            Distribution::Pareto { tail_index, scale } if tail_index > 1.0 => Some(scale * tail_index / (tail_index - 1.0)),
            Distribution::PointMass { .. } => Some(0.0),
            _ => None,
        }
    }
}

/// Constant of the far-field remainder: `Σ_{|x|≥M} P(max(|p_x|,|p_0|) ≥ |x|/4) ≤ 2·8^d |B_1| E[|p|^d 1{|p| ≥ M/16}]`
/// once `M` exceeds twice the cell diameter.
pub fn remainder_constant(dim: usize) -> f64 {
    2.0 * 8f64.powi(dim as i32) * unit_ball_volume(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    #[test]
    fn gaussian_tail_moment_limits() {
        let g = Distribution::Gaussian { sd: 1.0 };
        // E|p|² over R² is 2 for unit normal coordinates
        assert!((g.tail_moment(2, 0.0) - 2.0).abs() < 1e-12);
        // E|p|^3 in d=3 is 2^{3/2} Γ(3)/Γ(3/2) = 8√(2/π)
        let e3 = 8.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((g.tail_moment(3, 0.0) - e3).abs() < 1e-10);
        assert!(g.tail_moment(2, 10.0) < 1e-18);
    }

    #[test]
    fn pareto_tail_moment_matches_sampling() {
        let p = Distribution::Pareto { tail_index: 5.0, scale: 1.0 };
        let mut rng = substream(5, Domain::Auxiliary, 0);
        let n = 400_000;
        let mut buf = [0.0; 2];
        let mut acc = 0.0;
        for _ in 0..n {
            p.sample_into(&mut rng, &mut buf);
            let r2 = buf[0] * buf[0] + buf[1] * buf[1];
            if r2 >= 4.0 {
                acc += r2;
            }
        }
        let exact = p.tail_moment(2, 2.0);
        assert!((acc / n as f64 - exact).abs() < 0.05 * exact, "{} vs {exact}", acc / n as f64);
        assert!(Distribution::Pareto { tail_index: 1.5, scale: 1.0 }.tail_moment(2, 3.0).is_infinite());
    }

    #[test]
    fn gaussian_mean_norm_matches_sampling() {
        let g = Distribution::Gaussian { sd: 0.1 };
        let mut rng = substream(6, Domain::Auxiliary, 0);
        let mut buf = [0.0; 2];
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| {
                g.sample_into(&mut rng, &mut buf);
                (buf[0] * buf[0] + buf[1] * buf[1]).sqrt()
            })
            .sum::<f64>()
            / n as f64;
        let exact = g.mean_norm(2).unwrap();
        assert!((exact - 0.1 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((mean - exact).abs() < 4.0 * 0.1 * 0.65 / (n as f64).sqrt());
    }

    #[test]
    fn quantiles() {
        let g = Distribution::Gaussian { sd: 2.0 };
        // d=1: |p| quantile at 0.95 is 1.96·sd
        assert!((g.norm_quantile(1, 0.95) - 2.0 * 1.959964).abs() < 1e-4);
        let p = Distribution::Pareto { tail_index: 2.0, scale: 1.0 };
        assert!((p.norm_quantile(2, 0.99) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(Distribution::Gaussian { sd: -1.0 }.validate(2).is_err());
        assert!(Distribution::PointMass { value: vec![0.0] }.validate(2).is_err());
        assert!(Distribution::Pareto { tail_index: 0.0, scale: 1.0 }.validate(2).is_err());
        assert!(Distribution::Uniform { half_width: 0.5 }.validate(3).is_ok());
    }
}
