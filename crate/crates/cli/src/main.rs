use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyperlat::estimator::RunOptions;
use hyperlat::io::{self, RecipeReport, Scale, RECIPES};
use hyperlat::lattice::LatticeSpec;

/// Number-variance experiments on perturbed lattices.
#[derive(Parser)]
#[command(name = "hyperlat", version)]
struct Cli {
    /// Worker threads (overrides HYPERLAT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo variance curve for a config (or a manifest to replay).
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Lattice term and i.i.d. oracle curves.
    Analytic {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Lattice points in the closed ball of radius R, or in the band R - w ≤ |x| ≤ R + w.
    Count {
        /// `Z<d>`, `triangular`, or a JSON lattice spec.
        lattice: String,
        radius: f64,
        #[arg(long)]
        annulus: Option<f64>,
    },
    /// Run a canned experiment and judge it.
    Recipe {
        name: String,
        #[arg(long, default_value = "full")]
        scale: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical structure factor on the cube dual grid.
    Sk {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-run whatever a manifest describes.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_lattice(arg: &str) -> hyperlat::Result<LatticeSpec> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| hyperlat::Error::InvalidArgument(format!("lattice spec: {e}")))
    } else {
        Ok(LatticeSpec::Named(arg.to_string()))
    }
}

fn print_report(report: &RecipeReport) {
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{}: {}", report.recipe, if report.pass { "pass" } else { "fail" });
}

fn run(cli: Cli) -> hyperlat::Result<bool> {
    let opts = RunOptions { threads: cli.threads };
    match cli.command {
        Cmd::Simulate { config, out } => {
            match io::load_replay(&config)? {
                io::Replay::Run { command: io::Command::Simulate, config: cfg } => {
                    let curve = io::run_simulate(&cfg, &out, &opts)?;
                    print!("{}", io::curve_csv(&curve));
                }
                _ => {
                    if let Some(report) = io::replay(&config, &out, &opts)? {
                        print_report(&report);
                        return Ok(report.pass);
                    }
                }
            }
            Ok(true)
        }
        Cmd::Analytic { config, out } => {
            let cfg = io::parse_config(&config)?;
            let result = io::run_analytic(&cfg, &out)?;
            print!("{}", io::lattice_term_csv(&result.lattice_terms));
            if let Some(o) = &result.oracle {
                print!("{}", io::oracle_csv(o));
            }
            Ok(true)
        }
        Cmd::Count { lattice, radius, annulus } => {
            let lattice = parse_lattice(&lattice)?.build()?;
            let origin = vec![0.0; lattice.dim()];
            let value = match annulus {
                Some(w) => serde_json::json!({ "radius": radius, "width": w, "count": lattice.count_annulus(radius, w)? }),
                None => {
                    let count = lattice.count_in_ball(&origin, radius)?;
                    let volume = hyperlat::lattice::ball_volume(lattice.dim(), radius) / lattice.covolume();
                    serde_json::json!({ "radius": radius, "count": count, "lebesgue": volume, "residual": count as f64 - volume })
                }
            };
            println!("{value}");
            Ok(true)
        }
        Cmd::Recipe { name, scale, out } => {
            let scale: Scale = scale.parse()?;
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(&name));
            let report = io::run_recipe(&name, scale, &out, &opts)?;
            print_report(&report);
            Ok(report.pass)
        }
        Cmd::Sk { config, out } => {
            let cfg = io::parse_config(&config)?;
            let dim = cfg.dim()?;
            let points = io::run_sk(&cfg, &out, &opts)?;
            print!("{}", io::sk_csv(dim, &points));
            Ok(true)
        }
        Cmd::Replay { manifest, out } => match io::replay(&manifest, &out, &opts)? {
            Some(report) => {
                print_report(&report);
                Ok(report.pass)
            }
            None => Ok(true),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let hyperlat::Error::UnknownRecipe(_) = e {
                eprintln!("known recipes: {}", RECIPES.join(", "));
            }
            ExitCode::from(2)
        }
    }
}
