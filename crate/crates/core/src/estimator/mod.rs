//! Monte Carlo estimation of the number variance and derived diagnostics.

mod fit;
mod probe;
mod replica;
mod structure;

pub use fit::{fit_decay_exponent, fit_power_law, flattened, star_hu_partial_sum, DecayFit, PartialSum};
pub use probe::{default_schedule, divergence_probe, DivergenceProbe};
pub use structure::{dual_grid_wavevectors, poisson_reference, restrict_to_cube, structure_factor, structure_factor_replicas, StructureFactorPoint};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Configuration, FieldSpec, MARGIN_QUANTILE};
use crate::lattice::{ball_volume, dist2, LatticeSpec};
use crate::rng::replica_stream;
use replica::{Process, ReplicaOutcome};

pub const DEFAULT_BATCH_COUNT: usize = 20;

/// Fraction of flagged replicas above which a curve is marked unreliable.
pub const UNRELIABLE_FLAG_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarginPolicy {
    /// Exact bound for bounded fields, the 0.99999 quantile of `|p_0|` otherwise.
    #[default]
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSpec {
    pub dim: usize,
    #[serde(default = "one")]
    pub intensity: f64,
}

fn one() -> f64 {
    1.0
}

fn default_batches() -> usize {
    DEFAULT_BATCH_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_pair_samples")]
    pub pair_samples: usize,
    /// Truncation radius as a multiple of the largest radius.
    #[serde(default = "default_truncation_factor")]
    pub truncation_factor: f64,
}

fn default_pair_samples() -> usize {
    2000
}

fn default_truncation_factor() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFactorSpec {
    /// Half-side of the cube the configuration is restricted to.
    pub half_side: f64,
    #[serde(default = "default_max_index")]
    pub max_index: i64,
    #[serde(default)]
    pub replicas: Option<u64>,
}

fn default_max_index() -> i64 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonSpec>,
    pub radii: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub margin: MarginPolicy,
    #[serde(default = "default_batches")]
    pub batch_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_factor: Option<StructureFactorSpec>,
}

impl ExperimentConfig {
    pub fn lattice_with_field(lattice: LatticeSpec, field: FieldSpec, radii: Vec<f64>, replicas: u64, seed: u64) -> Self {
        ExperimentConfig {
            lattice: Some(lattice),
            field: Some(field),
            poisson: None,
            radii,
            replicas,
            seed,
            margin: MarginPolicy::Adaptive,
            batch_count: DEFAULT_BATCH_COUNT,
            oracle: None,
            structure_factor: None,
        }
    }

    pub fn poisson(dim: usize, intensity: f64, radii: Vec<f64>, replicas: u64, seed: u64) -> Self {
        ExperimentConfig {
            lattice: None,
            field: None,
            poisson: Some(PoissonSpec { dim, intensity }),
            radii,
            replicas,
            seed,
            margin: MarginPolicy::Adaptive,
            batch_count: DEFAULT_BATCH_COUNT,
            oracle: None,
            structure_factor: None,
        }
    }

    /// Checks every cross-field rule, reporting the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::config("radii", "at least one radius is required"));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::config("radii", "radii must be positive and finite"));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("radii", "radii must be strictly increasing"));
        }
        if self.batch_count < 2 {
            return Err(Error::config("batch_count", "at least 2 batches are needed"));
        }
        if self.replicas < 2 * self.batch_count as u64 {
            return Err(Error::config("replicas", format!("need at least 2·batch_count = {} replicas", 2 * self.batch_count)));
        }
        if let MarginPolicy::Fixed(m) = self.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::config("margin", "fixed margin must be non-negative"));
            }
        }
        match (&self.lattice, &self.poisson) {
            (Some(_), Some(_)) => Err(Error::config("poisson", "give either a lattice or a poisson reference, not both")),
            (None, None) => Err(Error::config("lattice", "a lattice (or a poisson reference) is required")),
            (None, Some(p)) => {
                if self.field.is_some() {
                    return Err(Error::config("field", "a poisson reference takes no field"));
                }
                if p.dim == 0 || !(p.intensity > 0.0 && p.intensity.is_finite()) {
                    return Err(Error::config("poisson", "poisson needs dim ≥ 1 and intensity > 0"));
                }
                Ok(())
            }
            (Some(l), None) => {
                let lattice = l.build().map_err(|e| Error::config("lattice", e.to_string()))?;
                if let Some(f) = &self.field {
                    f.compile(&lattice).map_err(|e| Error::config("field", e.to_string()))?;
                }
                Ok(())
            }
        }
    }

    pub(crate) fn process(&self) -> Result<(Process, RunInfo)> {
        self.validate()?;
        let r_max = *self.radii.last().expect("validated");
        if let Some(p) = &self.poisson {
            let info = RunInfo { margin: 0.0, window: r_max, truncation_mass: None, audited: false };
            return Ok((Process::Poisson { dim: p.dim, intensity: p.intensity }, info));
        }
        let lattice = self.lattice.as_ref().expect("validated").build()?;
        let spec = self.field.clone().unwrap_or(FieldSpec::Iid {
            distribution: crate::fields::Distribution::PointMass { value: vec![0.0; lattice.dim()] },
        });
        let field = spec.compile(&lattice)?;
        let bound = field.displacement_bound();
        let margin = match (self.margin, bound) {
            (MarginPolicy::Fixed(m), _) => m,
            (MarginPolicy::Adaptive, Some(b)) => b,
            (MarginPolicy::Adaptive, None) => field.displacement_quantile(MARGIN_QUANTILE),
        };
        let audited = !field.is_block_field() && bound.is_none_or(|b| b > margin);
        let window = if field.is_block_field() {
            r_max + bound.unwrap_or(f64::INFINITY).min(lattice.cell_diameter() + margin)
        } else {
            r_max + margin + lattice.cell_diameter()
        };
        if let FieldSpec::SpectralGaussian { grid, .. } = &spec {
            if window > (*grid / 4) as f64 {
                return Err(Error::config("field.grid", format!("window {window:.2} must fit in a quarter of the grid {grid}")));
            }
        }
        let info = RunInfo { margin, window, truncation_mass: field.truncation_mass(), audited };
        Ok((Process::Perturbed { lattice, field, margin, audit: audited }, info))
    }

    pub fn dim(&self) -> Result<usize> {
        match (&self.poisson, &self.lattice) {
            (Some(p), _) => Ok(p.dim),
            (None, Some(l)) => Ok(l.build()?.dim()),
            _ => Err(Error::config("lattice", "a lattice (or a poisson reference) is required")),
        }
    }
}

/// Facts about a run that belong in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunInfo {
    pub margin: f64,
    pub window: f64,
    pub truncation_mass: Option<f64>,
    pub audited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub r: f64,
    pub mean_count: f64,
    pub variance: f64,
    pub sigma: f64,
    /// Batch-means standard error of `variance`.
    pub stderr: f64,
    pub sigma_stderr: f64,
    pub median_batch_variance: f64,
    pub replicas: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceCurve {
    pub dim: usize,
    pub points: Vec<CurvePoint>,
    pub total_replicas: u64,
    pub flagged_replicas: u64,
    pub unreliable: bool,
    pub info: RunInfo,
}

impl VarianceCurve {
    pub fn sigmas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sigma).collect()
    }

    pub fn at(&self, r: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| (p.r - r).abs() <= 1e-9 * r.max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses `HYPERLAT_THREADS` or the rayon default.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        RunOptions { threads: Some(threads) }
    }

    pub fn resolved_threads(&self) -> Option<usize> {
        self.threads.or_else(|| std::env::var("HYPERLAT_THREADS").ok().and_then(|v| v.parse().ok())).filter(|&t| t > 0)
    }

    pub(crate) fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.resolved_threads() {
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Runs replicas `0..n` in parallel; results come back in replica order.
pub(crate) fn run_replicas(process: &Process, radii: &[f64], seed: u64, n: u64, opts: &RunOptions) -> Result<Vec<ReplicaOutcome>> {
    opts.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| process.run(radii, &mut replica_stream(seed, i)))
            .collect::<Result<Vec<_>>>()
    })?
}

pub(crate) fn sample_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-radius moments from ordered per-replica counts, with batch-means uncertainty.
pub(crate) fn summarize(radii: &[f64], dim: usize, counts: &[Vec<f64>], batch_count: usize) -> Vec<CurvePoint> {
    let n = counts.len();
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let column: Vec<f64> = counts.iter().map(|c| c[k]).collect();
            let (mean, variance) = if n >= 2 { sample_variance(&column) } else { (column.first().copied().unwrap_or(0.0), 0.0) };
            let batches = batch_count.min(n / 2).max(1);
            let batch_vars: Vec<f64> = (0..batches)
                .map(|b| sample_variance(&column[b * n / batches..(b + 1) * n / batches]).1)
                .collect();
            let stderr = if batches >= 2 { (sample_variance(&batch_vars).1 / batches as f64).sqrt() } else { f64::NAN };
            let volume = ball_volume(dim, r);
            CurvePoint {
                r,
                mean_count: mean,
                variance,
                sigma: variance / volume,
                stderr,
                sigma_stderr: stderr / volume,
                median_batch_variance: median(batch_vars),
                replicas: n as u64,
            }
        })
        .collect()
}

pub fn estimate_variance(cfg: &ExperimentConfig) -> Result<VarianceCurve> {
    estimate_variance_with(cfg, &RunOptions::default())
}

pub fn estimate_variance_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<VarianceCurve> {
    let (process, info) = cfg.process()?;
    let outcomes = run_replicas(&process, &cfg.radii, cfg.seed, cfg.replicas, opts)?;
    let flagged = outcomes.iter().filter(|o| o.flagged).count() as u64;
    let kept: Vec<Vec<f64>> = outcomes.into_iter().filter(|o| !o.flagged).map(|o| o.counts).collect();
    if kept.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two usable replicas".into()));
    }
    let points = summarize(&cfg.radii, process.dim(), &kept, cfg.batch_count);
    Ok(VarianceCurve {
        dim: process.dim(),
        points,
        total_replicas: cfg.replicas,
        flagged_replicas: flagged,
        unreliable: flagged as f64 > UNRELIABLE_FLAG_RATE * cfg.replicas as f64,
        info,
    })
}

/// Number of configuration points in the closed ball `B_r(center)`.
pub fn count_in_ball(config: &Configuration, center: &[f64], r: f64) -> u64 {
    let r2 = r * r;
    config.points.iter().filter(|p| dist2(p, center) <= r2).count() as u64
}
