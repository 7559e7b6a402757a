//! Running-variance trend as replicas accumulate, the signature of infinite variance.

use serde::Serialize;

use super::{run_replicas, sample_variance, ExperimentConfig, RunOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceProbe {
    pub r: f64,
    pub schedule: Vec<u64>,
    pub variances: Vec<f64>,
    /// Least-squares slope of `log variance` against `log replicas`.
    pub slope: f64,
    pub flagged_replicas: u64,
}

/// `⌊10^(3 + k/4)⌋` for `k = 0..=8`: 1000 up to 100000 replicas.
pub fn default_schedule() -> Vec<u64> {
    (0..=8).map(|k| 10f64.powf(3.0 + k as f64 / 4.0).round() as u64).collect()
}

pub fn divergence_probe(cfg: &ExperimentConfig, r: f64, schedule: &[u64], opts: &RunOptions) -> Result<DivergenceProbe> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] < 2 {
        return Err(Error::InvalidArgument("the probe schedule must be strictly increasing and start at ≥ 2".into()));
    }
    let mut probe_cfg = cfg.clone();
    probe_cfg.radii = vec![r];
    probe_cfg.replicas = *schedule.last().expect("non-empty");
    let (process, _) = probe_cfg.process()?;
    let outcomes = run_replicas(&process, &probe_cfg.radii, cfg.seed, probe_cfg.replicas, opts)?;
    let flagged = outcomes.iter().filter(|o| o.flagged).count() as u64;
    let counts: Vec<f64> = outcomes.iter().map(|o| if o.flagged { f64::NAN } else { o.counts[0] }).collect();
    let variances: Vec<f64> = schedule
        .iter()
        .map(|&n| {
            let prefix: Vec<f64> = counts[..n as usize].iter().copied().filter(|v| v.is_finite()).collect();
            sample_variance(&prefix).1
        })
        .collect();
    let x: Vec<f64> = schedule.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = variances.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(DivergenceProbe { r, schedule: schedule.to_vec(), variances, slope, flagged_replicas: flagged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let s = default_schedule();
        assert_eq!(s.len(), 9);
        assert_eq!(s[0], 1000);
        assert_eq!(*s.last().unwrap(), 100_000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn poisson_variance_stabilizes() {
        let cfg = ExperimentConfig::poisson(2, 1.0, vec![1.0], 100, 5);
        let probe = divergence_probe(&cfg, 1.0, &[1000, 3000, 10_000, 30_000], &RunOptions::default()).unwrap();
        assert!(probe.slope.abs() < 0.05, "slope {}", probe.slope);
        assert!(divergence_probe(&cfg, 1.0, &[10, 5], &RunOptions::default()).is_err());
    }
}
