//! Experiment configs, run manifests, CSV emission and the canned recipes.

mod recipes;

pub use recipes::{run_recipe, Check, RecipeReport, Scale, RECIPES};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{iid_sigma_curve, lattice_a_term, LatticeTerm, OraclePoint};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_variance_with, structure_factor_replicas, DivergenceProbe, ExperimentConfig, RunOptions, StructureFactorPoint,
    VarianceCurve,
};
use crate::fields::FieldSpec;
use crate::rng::{substream, Domain, DERIVATION};

pub const MANIFEST_FORMAT: u32 = 1;

/// Parses and validates a config file. Schema errors name the offending key path.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        match crate::fields::nested_path(&message) {
            Some((sub, m)) if path == "." => Error::config(sub, m),
            Some((sub, m)) => Error::config(format!("{path}.{sub}"), m),
            None => Error::config(if path == "." { "(root)".to_string() } else { path }, message.clone()),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// What a config file or manifest asks to be run.
#[derive(Debug, Clone, PartialEq)]
pub enum Replay {
    Run { command: Command, config: ExperimentConfig },
    Recipe { name: String, scale: Scale },
}

/// Accepts either a plain config or a manifest written by a previous run.
pub fn load_replay(path: &Path) -> Result<Replay> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::config("(root)", e.to_string()))?;
    if value.get("recipe").is_some() && value.get("format").is_some() {
        let m: RecipeManifest = serde_json::from_value(value).map_err(|e| Error::config("(manifest)", e.to_string()))?;
        return Ok(Replay::Recipe { name: m.recipe, scale: m.scale });
    }
    if value.get("config_hash").is_some() {
        let m: RunManifest = serde_json::from_value(value).map_err(|e| Error::config("(manifest)", e.to_string()))?;
        m.config.validate()?;
        if config_hash(&m.config) != m.config_hash {
            return Err(Error::config("config_hash", "embedded config does not match its hash"));
        }
        return Ok(Replay::Run { command: m.command, config: m.config });
    }
    Ok(Replay::Run { command: Command::Simulate, config: parse_config_str(&text)? })
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Analytic,
    Sk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substreams {
    pub derivation: String,
    pub domain: String,
    /// Replica ids `first .. first + count`.
    pub first: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub hyperlat: String,
    pub manifest_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Versions { hyperlat: env!("CARGO_PKG_VERSION").to_string(), manifest_format: MANIFEST_FORMAT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub substreams: Substreams,
    /// Probability mass cut off by the block-law truncation, when there is one.
    pub truncation_mass: Option<f64>,
    pub margin: Option<f64>,
    pub window: Option<f64>,
    /// Replicas dropped because a displacement exceeded the margin at the window edge.
    pub margin_violations: u64,
    pub unreliable: bool,
    pub threads: Option<usize>,
    pub versions: Versions,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: Command, cfg: &ExperimentConfig, opts: &RunOptions, domain: &str, count: u64) -> Self {
        RunManifest {
            command,
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            seed: cfg.seed,
            substreams: Substreams { derivation: DERIVATION.to_string(), domain: domain.to_string(), first: 0, count },
            truncation_mass: None,
            margin: None,
            window: None,
            margin_violations: 0,
            unreliable: false,
            threads: opts.resolved_threads(),
            versions: Versions::default(),
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    fn record_curve(&mut self, curve: &VarianceCurve) {
        self.truncation_mass = curve.info.truncation_mass;
        self.margin = Some(curve.info.margin);
        self.window = Some(curve.info.window);
        self.margin_violations = curve.flagged_replicas;
        self.unreliable = curve.unreliable;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeManifest {
    pub recipe: String,
    pub scale: Scale,
    pub format: u32,
    pub versions: Versions,
    pub threads: Option<usize>,
    pub wall_time_seconds: f64,
    /// Sub-experiment directories, each with its own replayable manifest.
    pub experiments: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Shortest round-trip formatting, so equal values always give equal bytes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn curve_csv(curve: &VarianceCurve) -> String {
    let mut s = String::from("r,mean_count,variance,sigma,stderr,replicas\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{},{},{},{}", num(p.r), num(p.mean_count), num(p.variance), num(p.sigma), num(p.stderr), p.replicas);
    }
    s
}

/// The same rows plus the σ-scale error and the median of batch variances.
pub fn curve_detail_csv(curve: &VarianceCurve) -> String {
    let mut s = String::from("r,sigma,sigma_stderr,median_batch_variance\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{},{}", num(p.r), num(p.sigma), num(p.sigma_stderr), num(p.median_batch_variance));
    }
    s
}

pub fn lattice_term_csv(terms: &[LatticeTerm]) -> String {
    let mut s = String::from("r,A,tail_bound\n");
    for t in terms {
        let _ = writeln!(s, "{},{},{}", num(t.r), num(t.value), num(t.tail_bound));
    }
    s
}

pub fn oracle_csv(points: &[OraclePoint]) -> String {
    let mut s = String::from("r,sigma_oracle,remainder_bound,stderr\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", num(p.r), num(p.sigma), num(p.remainder_bound), num(p.stderr));
    }
    s
}

pub fn sk_csv(dim: usize, points: &[StructureFactorPoint]) -> String {
    let axes = ["kx", "ky", "kz"];
    let mut s = String::new();
    for a in axes.iter().take(dim.min(3)) {
        s.push_str(a);
        s.push(',');
    }
    s.push_str("S_emp,stderr\n");
    for p in points {
        for k in p.k.iter().take(3) {
            s.push_str(&num(*k));
            s.push(',');
        }
        let _ = writeln!(s, "{},{}", num(p.s), num(p.stderr));
    }
    s
}

pub fn probe_csv(probe: &DivergenceProbe) -> String {
    let mut s = String::from("replicas,variance\n");
    for (n, v) in probe.schedule.iter().zip(&probe.variances) {
        let _ = writeln!(s, "{},{}", n, num(*v));
    }
    s
}

fn write_file(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    outputs.push(name.to_string());
    Ok(())
}

/// `simulate`: curve.csv (+ curve_detail.csv) and manifest.json.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path, opts: &RunOptions) -> Result<VarianceCurve> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let curve = estimate_variance_with(cfg, opts)?;
    let mut manifest = RunManifest::new(Command::Simulate, cfg, opts, "replica", cfg.replicas);
    manifest.record_curve(&curve);
    write_file(out, "curve.csv", &curve_csv(&curve), &mut manifest.outputs)?;
    write_file(out, "curve_detail.csv", &curve_detail_csv(&curve), &mut manifest.outputs)?;
    if let Some(sf) = &cfg.structure_factor {
        let points = structure_factor_replicas(cfg, sf.half_side, sf.max_index, sf.replicas.unwrap_or(cfg.replicas), opts)?;
        write_file(out, "sk.csv", &sk_csv(cfg.dim()?, &points), &mut manifest.outputs)?;
    }
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticOutput {
    pub lattice_terms: Vec<LatticeTerm>,
    pub oracle: Option<Vec<OraclePoint>>,
}

/// Oracle curve for an i.i.d. field, pair samples drawn from the config seed.
pub fn oracle_curve(cfg: &ExperimentConfig) -> Result<Option<Vec<OraclePoint>>> {
    cfg.validate()?;
    let (Some(lattice), Some(FieldSpec::Iid { distribution })) = (&cfg.lattice, &cfg.field) else {
        return Ok(None);
    };
    let lattice = lattice.build()?;
    let spec = cfg.oracle.clone().unwrap_or(crate::estimator::OracleSpec { pair_samples: 2000, truncation_factor: 20.0 });
    let r_max = *cfg.radii.last().expect("validated");
    let mut rng = substream(cfg.seed, Domain::PairSamples, 0);
    Ok(Some(iid_sigma_curve(&lattice, &cfg.radii, distribution, spec.truncation_factor * r_max, spec.pair_samples, &mut rng)?))
}

/// `analytic`: lattice_term.csv for d ≤ 2 and, for i.i.d. fields with a
/// finite d-th moment, oracle.csv.
pub fn run_analytic(cfg: &ExperimentConfig, out: &Path) -> Result<AnalyticOutput> {
    let start = Instant::now();
    cfg.validate()?;
    let spec = cfg.lattice.as_ref().ok_or_else(|| Error::config("lattice", "the analytic command needs a lattice"))?;
    let lattice = spec.build()?;
    if lattice.dim() > 2 {
        return Err(Error::config("lattice", "analytic kernels are available for d ≤ 2"));
    }
    fs::create_dir_all(out)?;
    let terms = cfg.radii.iter().map(|&r| lattice_a_term(&lattice, r)).collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest::new(Command::Analytic, cfg, &RunOptions::default(), "pair_samples", 1);
    write_file(out, "lattice_term.csv", &lattice_term_csv(&terms), &mut manifest.outputs)?;
    let oracle = match &cfg.field {
        Some(FieldSpec::Iid { distribution }) if distribution.has_moment(lattice.dim() as f64) => oracle_curve(cfg)?,
        _ => None,
    };
    if let Some(points) = &oracle {
        write_file(out, "oracle.csv", &oracle_csv(points), &mut manifest.outputs)?;
    }
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(AnalyticOutput { lattice_terms: terms, oracle })
}

/// `sk`: the empirical structure factor on the cube dual grid.
pub fn run_sk(cfg: &ExperimentConfig, out: &Path, opts: &RunOptions) -> Result<Vec<StructureFactorPoint>> {
    let start = Instant::now();
    cfg.validate()?;
    let sf = cfg.structure_factor.clone().ok_or_else(|| Error::config("structure_factor", "the sk command needs a structure_factor block"))?;
    fs::create_dir_all(out)?;
    let replicas = sf.replicas.unwrap_or(cfg.replicas);
    let points = structure_factor_replicas(cfg, sf.half_side, sf.max_index, replicas, opts)?;
    let mut manifest = RunManifest::new(Command::Sk, cfg, opts, "auxiliary", replicas);
    write_file(out, "sk.csv", &sk_csv(cfg.dim()?, &points), &mut manifest.outputs)?;
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(points)
}

/// Runs whatever a config or manifest describes into `out`.
pub fn replay(path: &Path, out: &Path, opts: &RunOptions) -> Result<Option<RecipeReport>> {
    match load_replay(path)? {
        Replay::Run { command: Command::Simulate, config } => run_simulate(&config, out, opts).map(|_| None),
        Replay::Run { command: Command::Analytic, config } => run_analytic(&config, out).map(|_| None),
        Replay::Run { command: Command::Sk, config } => run_sk(&config, out, opts).map(|_| None),
        Replay::Recipe { name, scale } => run_recipe(&name, scale, out, opts).map(Some),
    }
}

/// Lists the CSV files under `dir`, recursively, in sorted order.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let text = r#"{"lattice":"Z2","field":{"type":"iid","distribution":{"type":"gaussian","sd":0.2}},
            "radii":[5,10],"replicas":1000,"seed":1}"#;
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.batch_count, 20);
        assert_eq!(cfg.radii, vec![5.0, 10.0]);
    }

    #[test]
    fn errors_carry_the_key_path() {
        let unsorted = r#"{"lattice":"Z2","radii":[10,5],"replicas":1000,"seed":1}"#;
        match parse_config_str(unsorted) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "radii"),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"lattice":"Z2","radii":[5],"replicas":1000,"seed":1,"colour":3}"#;
        assert!(matches!(parse_config_str(unknown), Err(Error::Config { .. })));
        let bad_sd = r#"{"lattice":"Z2","field":{"type":"iid","distribution":{"type":"gaussian","sd":"x"}},"radii":[5],"replicas":100,"seed":1}"#;
        match parse_config_str(bad_sd) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "field.distribution.sd"),
            other => panic!("{other:?}"),
        }
        let small_blocks = r#"{"lattice":"Z2","field":{"type":"cube_collapse","block_law":{"type":"fixed","n":5}},
            "radii":[1],"replicas":100,"seed":1}"#;
        match parse_config_str(small_blocks) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "field");
                assert!(message.contains("N ≥ 10"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_formatting_is_plain() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(2.0), "2.0");
        assert_eq!(num(1e-300), "1e-300");
    }
}
