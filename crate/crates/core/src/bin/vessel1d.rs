//! Command-line driver: `run`, `compare`, `converge`, `postprocess`, `profiles`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vessel1d::geometry::Severity;
use vessel1d::harness::{
    compare_models, convergence_from_config, load_config, postprocess_case, run_case, write_profiles, HarnessError,
    RunConfig,
};
use vessel1d::model::Correction;

#[derive(Parser)]
#[command(name = "vessel1d", version, about = "1D blood flow in stenotic compliant arteries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Momentum-equation variant.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Correction>,
    /// Stenosis severity in percent.
    #[arg(long, value_parser = parse_severity)]
    severity: Option<Severity>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case and write records plus `summary.json`.
    Run {
        #[command(flatten)]
        common: Common,
        /// Stop as soon as the steady criterion is met.
        #[arg(long)]
        steady: bool,
    },
    /// Run all three variants and compare the final mean velocities.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steady: bool,
    },
    /// Self-convergence study on a smooth pulse.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the 2D velocity field from a finished run directory (`--out`).
    Postprocess {
        #[command(flatten)]
        common: Common,
        /// Drop the time-derivative terms and use the last record only.
        #[arg(long)]
        steady: bool,
    },
    /// Emit reference-radius tables.
    Profiles {
        #[command(flatten)]
        common: Common,
        /// Number of samples per table.
        #[arg(long, default_value_t = 601)]
        samples: usize,
    },
}

fn parse_variant(s: &str) -> Result<Correction, String> {
    s.parse::<Correction>().map_err(|e| e.to_string())
}

fn parse_severity(s: &str) -> Result<Severity, String> {
    let v: u32 = s.trim_end_matches('%').parse().map_err(|e| format!("{e}"))?;
    Severity::try_from(v)
}

fn prepare(common: &Common) -> Result<(RunConfig, PathBuf), HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.variant {
        cfg.solver.correction = v;
    }
    if let Some(s) = common.severity {
        cfg.severity = s;
    }
    cfg.validate()?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Run { common, steady } => {
            let (mut cfg, out) = prepare(&common)?;
            cfg.solver.stop_at_steady |= steady;
            let report = run_case(&cfg, Some(&out))?;
            let s = &report.summary;
            match &s.error {
                Some(e) => eprintln!("run failed: {e}"),
                None => eprintln!(
                    "{} {}: {} steps to t = {:.6} s, steady at {}, peak U {:.4} cm/s ({:.2} s)",
                    s.geometry,
                    s.correction.name(),
                    s.steps,
                    s.final_time,
                    s.steady_time.map_or("never".to_string(), |t| format!("{t:.6} s")),
                    s.peak_u.unwrap_or(f64::NAN),
                    s.wall_clock_s
                ),
            }
            println!("{}", out.join("summary.json").display());
            Ok(s.exit_code)
        }
        Command::Compare { common, steady } => {
            let (mut cfg, out) = prepare(&common)?;
            cfg.solver.stop_at_steady |= steady;
            let report = compare_models(&cfg, Some(&out))?;
            for p in &report.pairs {
                eprintln!(
                    "{} vs {}: max rel {:.3e}, L2 rel {:.3e}, peak diff {:.4e} cm/s",
                    p.first.name(),
                    p.second.name(),
                    p.max_relative,
                    p.l2_relative,
                    p.peak_difference
                );
            }
            println!("{}", out.join("comparison.json").display());
            let failed = report.variants.iter().any(|v| v.status != "ok");
            Ok(if failed { 3 } else { 0 })
        }
        Command::Converge { common } => {
            let (cfg, out) = prepare(&common)?;
            for t in convergence_from_config(&cfg, Some(&out))? {
                eprintln!(
                    "k = {}: fitted rate A {:.3}, Q {:.3}, monotone {}",
                    t.degree, t.fitted_rate_a, t.fitted_rate_q, t.monotone
                );
            }
            println!("{}", out.join("convergence.json").display());
            Ok(0)
        }
        Command::Postprocess { common, steady } => {
            let (cfg, out) = prepare(&common)?;
            let field = postprocess_case(&cfg, &out, steady)?;
            eprintln!("{} points on {} slices", field.points.len(), field.slices.len());
            println!("{}", out.join("field2d.csv").display());
            Ok(0)
        }
        Command::Profiles { common, samples } => {
            let (cfg, out) = prepare(&common)?;
            let severities: Vec<Severity> = match common.severity {
                Some(s) => vec![s],
                None => Severity::ALL.to_vec(),
            };
            for path in write_profiles(&cfg, &severities, samples, &out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
