//! Canned experiments, each reproducing one desk-scale signature and judging it.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{lattice_term_csv, oracle_csv, oracle_curve, probe_csv, run_simulate, write_json, RecipeManifest, Versions, MANIFEST_FORMAT};
use crate::analytic::lattice_a_term;
use crate::error::{Error, Result};
use crate::estimator::{default_schedule, divergence_probe, fit_decay_exponent, ExperimentConfig, OracleSpec, RunOptions, VarianceCurve};
use crate::fields::{BlockLaw, Distribution, FieldSpec, SigmaTilde};
use crate::lattice::LatticeSpec;

pub const RECIPES: [&str; 8] = [
    "poisson-baseline",
    "lattice-classI",
    "iid-HU-d2",
    "heavytail-divergence",
    "radialpush-d3",
    "radialpush-d2-classI",
    "slowdecay",
    "sharp-d1",
];

/// Every recipe uses this seed; it is fixed once and never tuned.
const SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Smoke-test sizes: same pipeline, far fewer replicas.
    Quick,
    #[default]
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Scale::Quick),
            "full" => Ok(Scale::Full),
            other => Err(Error::InvalidArgument(format!("scale must be quick or full, got `{other}`"))),
        }
    }
}

impl Scale {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecipeReport {
    pub recipe: String,
    pub scale: Scale,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub metrics: serde_json::Value,
}

struct Outcome {
    checks: Vec<Check>,
    metrics: serde_json::Value,
    experiments: Vec<String>,
}

/// Runs a recipe into `out`: one subdirectory per sub-experiment (each a
/// replayable `simulate` run), the primary curve copied to `out/curve.csv`,
/// plus `summary.json` and `manifest.json`.
pub fn run_recipe(name: &str, scale: Scale, out: &Path, opts: &RunOptions) -> Result<RecipeReport> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let outcome = match name {
        "poisson-baseline" => poisson_baseline(scale, out, opts)?,
        "lattice-classI" => lattice_class_one(scale, out, opts)?,
        "iid-HU-d2" => iid_hu_d2(scale, out, opts)?,
        "heavytail-divergence" => heavytail_divergence(scale, out, opts)?,
        "radialpush-d3" => radial_push_d3(scale, out, opts)?,
        "radialpush-d2-classI" => radial_push_d2(scale, out, opts)?,
        "slowdecay" => slow_decay(scale, out, opts)?,
        "sharp-d1" => sharp_d1(scale, out, opts)?,
        other => return Err(Error::UnknownRecipe(other.to_string())),
    };
    if let Some(primary) = outcome.experiments.first() {
        fs::copy(out.join(primary).join("curve.csv"), out.join("curve.csv"))?;
    }
    let report = RecipeReport {
        recipe: name.to_string(),
        scale,
        pass: outcome.checks.iter().all(|c| c.pass),
        checks: outcome.checks,
        metrics: outcome.metrics,
    };
    write_json(&out.join("summary.json"), &report)?;
    let manifest = RecipeManifest {
        recipe: name.to_string(),
        scale,
        format: MANIFEST_FORMAT,
        versions: Versions::default(),
        threads: opts.resolved_threads(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        experiments: outcome.experiments,
        outputs: vec!["curve.csv".into(), "summary.json".into()],
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(report)
}

fn lattice(name: &str) -> LatticeSpec {
    LatticeSpec::Named(name.to_string())
}

fn simulate(out: &Path, dir: &str, cfg: &ExperimentConfig, opts: &RunOptions, experiments: &mut Vec<String>) -> Result<VarianceCurve> {
    experiments.push(dir.to_string());
    run_simulate(cfg, &out.join(dir), opts)
}

fn reliability(curve: &VarianceCurve) -> Check {
    Check::new(
        "margin audit",
        !curve.unreliable,
        format!("{} of {} replicas flagged", curve.flagged_replicas, curve.total_replicas),
    )
}

fn sigma_rows(curve: &VarianceCurve) -> serde_json::Value {
    json!(curve.points.iter().map(|p| json!({ "r": p.r, "sigma": p.sigma, "sigma_stderr": p.sigma_stderr })).collect::<Vec<_>>())
}

fn strictly_monotone(curve: &VarianceCurve, increasing: bool) -> Check {
    let s = curve.sigmas();
    let ok = s.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    let word = if increasing { "increasing" } else { "decreasing" };
    Check::new(format!("sigma strictly {word}"), ok, format!("{s:?}"))
}

fn poisson_baseline(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let cfg = ExperimentConfig::poisson(2, 1.0, vec![5.0, 10.0, 20.0], scale.pick(2_000, 20_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "poisson", &cfg, opts, &mut experiments)?;
    let checks = curve
        .points
        .iter()
        .map(|p| Check::new(format!("sigma({}) within 5% of 1", p.r), (p.sigma - 1.0).abs() <= 0.05, format!("sigma = {:.5} ± {:.5}", p.sigma, p.sigma_stderr)))
        .collect();
    Ok(Outcome { checks, metrics: json!({ "sigma": sigma_rows(&curve) }), experiments })
}

fn lattice_class_one(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let zero = FieldSpec::Iid { distribution: Distribution::PointMass { value: vec![0.0, 0.0] } };
    let cfg = ExperimentConfig::lattice_with_field(lattice("Z2"), zero, vec![5.0, 10.0, 20.0, 40.0], scale.pick(5_000, 100_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "z2", &cfg, opts, &mut experiments)?;
    let z2 = cfg.lattice.as_ref().expect("set").build()?;
    let terms = cfg.radii.iter().map(|&r| lattice_a_term(&z2, r)).collect::<Result<Vec<_>>>()?;
    fs::write(out.join("z2").join("lattice_term.csv"), lattice_term_csv(&terms))?;
    let mut checks = Vec::new();
    for (p, a) in curve.points.iter().zip(&terms) {
        let tol = 3.0 * p.sigma_stderr.hypot(a.residual_estimate);
        checks.push(Check::new(
            format!("MC sigma({}) matches A within 3 stderr", p.r),
            (p.sigma - a.value).abs() <= tol,
            format!("MC {:.6e} ± {:.2e}, A {:.6e}", p.sigma, p.sigma_stderr, a.value),
        ));
    }
    let fit = fit_decay_exponent(&curve, 0.0)?;
    checks.push(Check::new("fitted decay slope ≤ -0.8", fit.slope <= -0.8, format!("slope {:.4} ± {:.4}", fit.slope, fit.stderr)));
    let metrics = json!({
        "sigma": sigma_rows(&curve),
        "lattice_term": terms.iter().map(|t| json!({ "r": t.r, "A": t.value, "tail_bound": t.tail_bound })).collect::<Vec<_>>(),
        "slope": fit.slope,
        "slope_stderr": fit.stderr,
    });
    Ok(Outcome { checks, metrics, experiments })
}

fn iid_hu_d2(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let gauss = FieldSpec::Iid { distribution: Distribution::Gaussian { sd: 0.2 } };
    let mut cfg = ExperimentConfig::lattice_with_field(lattice("Z2"), gauss, vec![5.0, 10.0, 20.0, 40.0], scale.pick(1_000, 20_000), SEED);
    cfg.oracle = Some(OracleSpec { pair_samples: scale.pick(200, 4_000), truncation_factor: 20.0 });
    let mut experiments = Vec::new();
    let curve = simulate(out, "gaussian", &cfg, opts, &mut experiments)?;
    let oracle = oracle_curve(&cfg)?.expect("i.i.d. field");
    fs::write(out.join("gaussian").join("oracle.csv"), oracle_csv(&oracle))?;
    let mut checks = vec![reliability(&curve), strictly_monotone(&curve, false)];
    let s = curve.sigmas();
    checks.push(Check::new("sigma(40) < 0.5 sigma(5)", s[3] < 0.5 * s[0], format!("{:.5} vs {:.5}", s[3], 0.5 * s[0])));
    for (p, o) in curve.points.iter().zip(&oracle) {
        let tol = 3.0 * p.sigma_stderr.hypot(o.stderr) + o.remainder_bound;
        checks.push(Check::new(
            format!("oracle matches MC at r = {}", p.r),
            (p.sigma - o.sigma).abs() <= tol,
            format!("MC {:.6} ± {:.2e}, oracle {:.6} ± {:.2e}", p.sigma, p.sigma_stderr, o.sigma, o.stderr),
        ));
    }
    let metrics = json!({
        "sigma": sigma_rows(&curve),
        "oracle": oracle.iter().map(|o| json!({ "r": o.r, "sigma": o.sigma, "stderr": o.stderr, "remainder_bound": o.remainder_bound })).collect::<Vec<_>>(),
    });
    Ok(Outcome { checks, metrics, experiments })
}

fn heavytail_divergence(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let schedule: Vec<u64> = match scale {
        Scale::Full => default_schedule(),
        Scale::Quick => default_schedule().into_iter().take(5).collect(),
    };
    let n_max = *schedule.last().expect("non-empty");
    let mut checks = Vec::new();
    let mut metrics = serde_json::Map::new();
    let mut experiments = Vec::new();
    for dim in [1usize, 2] {
        for (role, tail_index) in [("heavy", dim as f64 - 0.5), ("control", dim as f64 + 2.0)] {
            let law = BlockLaw::Pareto { tail_index, scale: 10.0 * (dim as f64).sqrt() };
            let cfg = ExperimentConfig::lattice_with_field(lattice(&format!("Z{dim}")), FieldSpec::CubeCollapse { block_law: law }, vec![1.0], n_max, SEED);
            let dir = format!("d{dim}-a{tail_index}");
            let curve = simulate(out, &dir, &cfg, opts, &mut experiments)?;
            let probe = divergence_probe(&cfg, 1.0, &schedule, opts)?;
            fs::write(out.join(&dir).join("probe.csv"), probe_csv(&probe))?;
            let check = if role == "heavy" {
                Check::new(format!("d={dim}, a={tail_index}: probe slope > 0.2"), probe.slope > 0.2, format!("slope {:.4}", probe.slope))
            } else {
                Check::new(format!("d={dim}, a={tail_index}: |probe slope| ≤ 0.05"), probe.slope.abs() <= 0.05, format!("slope {:.4}", probe.slope))
            };
            checks.push(check);
            let p = &curve.points[0];
            metrics.insert(
                dir,
                json!({ "slope": probe.slope, "variance": p.variance, "median_batch_variance": p.median_batch_variance, "variances": probe.variances }),
            );
        }
    }
    Ok(Outcome { checks, metrics: serde_json::Value::Object(metrics), experiments })
}

fn radial_push_d3(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let radii = vec![8.0, 12.0, 16.0, 24.0];
    let law = BlockLaw::PowerLaw { exponent: 1.3, min: 10, max: 5 * 24 };
    let field = FieldSpec::RadialPush { epsilon: 0.5, block_law: law };
    let cfg = ExperimentConfig::lattice_with_field(lattice("Z3"), field, radii, scale.pick(100, 2_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "push-d3", &cfg, opts, &mut experiments)?;
    let s = curve.sigmas();
    let checks = vec![
        strictly_monotone(&curve, true),
        Check::new("sigma(24) > 1.5 sigma(8)", s[3] > 1.5 * s[0], format!("ratio {:.3}", s[3] / s[0])),
    ];
    Ok(Outcome { checks, metrics: json!({ "sigma": sigma_rows(&curve), "ratio_24_8": s[3] / s[0] }), experiments })
}

fn radial_push_d2(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    // half-octave radii from 8 to 32
    let radii: Vec<f64> = (0..5).map(|k| (8.0 * 2f64.powf(k as f64 / 2.0) * 10.0).round() / 10.0).collect();
    let law = BlockLaw::PowerLaw { exponent: 1.3, min: 10, max: 5 * 32 };
    let field = FieldSpec::RadialPush { epsilon: 0.5, block_law: law };
    let cfg = ExperimentConfig::lattice_with_field(lattice("Z2"), field, radii, scale.pick(1_000, 20_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "push-d2", &cfg, opts, &mut experiments)?;
    let fit = fit_decay_exponent(&curve, 0.0)?;
    let checks = vec![Check::new("fitted slope ≥ -0.6", fit.slope >= -0.6, format!("slope {:.4} ± {:.4}", fit.slope, fit.stderr))];
    Ok(Outcome { checks, metrics: json!({ "sigma": sigma_rows(&curve), "slope": fit.slope, "slope_stderr": fit.stderr }), experiments })
}

/// Fits `σ(r) ≈ c σ̃(M r)` in log space over a grid of `M ∈ [1, 10]`, then
/// takes the largest `c` for which the lower confidence limits of every `σ(r)`
/// stay above `c σ̃(M r)`.
fn fit_lower_envelope(curve: &VarianceCurve, target: &SigmaTilde) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..=900 {
        let m = 1.0 + i as f64 / 100.0;
        let logs: Vec<f64> = curve.points.iter().map(|p| p.sigma.max(f64::MIN_POSITIVE).ln() - target.eval(m * p.r).ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let misfit: f64 = logs.iter().map(|l| (l - mean).powi(2)).sum();
        if misfit < best.0 {
            best = (misfit, m);
        }
    }
    let m = best.1;
    let c = curve.points.iter().map(|p| (p.sigma - 3.0 * p.sigma_stderr) / target.eval(m * p.r)).fold(f64::INFINITY, f64::min);
    (c, m, best.0)
}

fn slow_decay(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    let target = SigmaTilde::InverseLog;
    let field = FieldSpec::SlowDecayMixture { sigma_tilde: target.clone(), n_max: 2000 };
    let cfg = ExperimentConfig::lattice_with_field(lattice("Z1"), field, vec![4.0, 8.0, 16.0, 32.0], scale.pick(20_000, 1_000_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "mixture", &cfg, opts, &mut experiments)?;
    let (c, m, misfit) = fit_lower_envelope(&curve, &target);
    let s = curve.sigmas();
    let checks = vec![
        reliability(&curve),
        Check::new("sigma(r) ≥ c sigma~(M r) with c > 0, M ≤ 10", c > 0.0 && m <= 10.0, format!("c {c:.4}, M {m:.2}")),
        Check::new("sigma(32) < sigma(4)", s[3] < s[0], format!("{:.4} vs {:.4}", s[3], s[0])),
    ];
    let metrics = json!({ "sigma": sigma_rows(&curve), "c": c, "M": m, "log_misfit": misfit });
    Ok(Outcome { checks, metrics, experiments })
}

fn sharp_d1(scale: Scale, out: &Path, opts: &RunOptions) -> Result<Outcome> {
    // α_N ∝ N^(-3 + ε/2) with ε = 1/2: E|p|^(2-ε) finite, E|p|² infinite.
    let epsilon = 0.5;
    let law = BlockLaw::PowerLaw { exponent: 3.0 - epsilon / 2.0, min: 10, max: 10_000 };
    let field = FieldSpec::CubeCollapse { block_law: law };
    let cfg = ExperimentConfig::lattice_with_field(lattice("Z1"), field, vec![8.0, 16.0, 32.0, 64.0, 128.0], scale.pick(20_000, 1_000_000), SEED);
    let mut experiments = Vec::new();
    let curve = simulate(out, "collapse", &cfg, opts, &mut experiments)?;
    let fit = fit_decay_exponent(&curve, 0.0)?;
    let checks = vec![Check::new(
        "fitted slope ≥ -0.9 (class I would be -1)",
        fit.slope >= -0.9,
        format!("slope {:.4} ± {:.4}, predicted {:.3}", fit.slope, fit.stderr, -1.0 + epsilon / 2.0),
    )];
    Ok(Outcome { checks, metrics: json!({ "sigma": sigma_rows(&curve), "slope": fit.slope, "slope_stderr": fit.stderr }), experiments })
}
