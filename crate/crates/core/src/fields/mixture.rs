//! Slow-decay mixtures of cube-collapse fields.

use serde::{Deserialize, Serialize};

use super::blocks::MIN_BLOCK_SIDE;
use super::tagged::tagged_deserialize;
use crate::error::{Error, Result};

/// Target decay profile `σ̃`, positive and non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SigmaTilde {
    /// `1 / log(e + r)`.
    InverseLog,
    /// `r^(-exponent)`.
    Power { exponent: f64 },
    /// `values[i] = σ̃(i + 1)`, linearly interpolated, constant past the end.
    Table { values: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(remote = "SigmaTilde", rename_all = "snake_case", deny_unknown_fields)]
enum SigmaTildeMirror {
    InverseLog,
    Power { exponent: f64 },
    Table { values: Vec<f64> },
}

tagged_deserialize!(SigmaTilde, SigmaTildeMirror);

impl SigmaTilde {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            SigmaTilde::InverseLog => 1.0 / (std::f64::consts::E + r).ln(),
            SigmaTilde::Power { exponent } => r.powf(-exponent),
            SigmaTilde::Table { values } => {
                if values.is_empty() {
                    return f64::NAN;
                }
                let x = (r - 1.0).max(0.0);
                let i = x.floor() as usize;
                if i + 1 >= values.len() {
                    return *values.last().expect("non-empty");
                }
                let f = x - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureWeights {
    /// `(N, α_N)` for `10 ≤ N ≤ N_max`, summing to 1.
    pub weights: Vec<(u64, f64)>,
    /// Normalizer `S = Σ (σ̃(N) − σ̃(N+1)) / N^d` over the retained range.
    pub normalizer: f64,
    /// Upper bound on the untruncated mass beyond `N_max`, relative to the retained mass.
    pub truncation_mass: f64,
}

/// `α_N ∝ (σ̃(N) − σ̃(N+1)) / N^d` on `10 ≤ N ≤ n_max`.
pub fn mixture_weights(sigma_tilde: &SigmaTilde, dim: usize, n_max: u64) -> Result<MixtureWeights> {
    if n_max < MIN_BLOCK_SIDE {
        return Err(Error::InvalidField(format!("n_max must be at least {MIN_BLOCK_SIDE}, got {n_max}")));
    }
    let mut prev = sigma_tilde.eval(1.0);
    for n in 2..=n_max + 1 {
        let v = sigma_tilde.eval(n as f64);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidField(format!("σ̃ must be positive and finite, σ̃({n}) = {v}")));
        }
        if v > prev {
            return Err(Error::InvalidField(format!("σ̃ must be non-increasing, but σ̃({n}) > σ̃({})", n - 1)));
        }
        prev = v;
    }
    let d = dim as i32;
    let mut weights = Vec::new();
    let mut total = 0.0;
    for n in MIN_BLOCK_SIDE..=n_max {
        let drop = sigma_tilde.eval(n as f64) - sigma_tilde.eval((n + 1) as f64);
        let w = drop / (n as f64).powi(d);
        if w > 0.0 {
            weights.push((n, w));
            total += w;
        }
    }
    if total <= 0.0 {
        return Err(Error::InvalidField("degenerate σ̃: no decrease on the block range".into()));
    }
    let weights = weights.into_iter().map(|(n, w)| (n, w / total)).collect();
    // Σ_{N > N_max} (σ̃(N) − σ̃(N+1))/N^d ≤ σ̃(N_max+1)/(N_max+1)^d
    let tail = sigma_tilde.eval((n_max + 1) as f64) / ((n_max + 1) as f64).powi(d);
    Ok(MixtureWeights { weights, normalizer: total, truncation_mass: tail / total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_power_closed_form() {
        let w = mixture_weights(&SigmaTilde::Power { exponent: 1.0 }, 1, 200).unwrap();
        let raw: Vec<f64> = (10..=200u64).map(|n| 1.0 / ((n * n * (n + 1)) as f64)).collect();
        let s: f64 = raw.iter().sum();
        for ((n, a), r) in w.weights.iter().zip(&raw) {
            assert!((a - r / s).abs() < 1e-14, "N = {n}");
        }
        assert!((w.normalizer - s).abs() < 1e-14);
    }

    #[test]
    fn normalization_and_errors() {
        let w = mixture_weights(&SigmaTilde::InverseLog, 1, 2000).unwrap();
        let total: f64 = w.weights.iter().map(|&(_, a)| a).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.truncation_mass > 0.0 && w.truncation_mass < 1.0);

        let flat = SigmaTilde::Table { values: vec![0.5; 100] };
        let err = mixture_weights(&flat, 1, 50).unwrap_err().to_string();
        assert!(err.contains("degenerate"));
        let rising = SigmaTilde::Table { values: vec![1.0, 0.5, 0.7, 0.2] };
        assert!(mixture_weights(&rising, 1, 20).is_err());
    }

    #[test]
    fn table_interpolates() {
        let t = SigmaTilde::Table { values: vec![1.0, 0.5, 0.25] };
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(1.5), 0.75);
        assert_eq!(t.eval(10.0), 0.25);
    }
}
