use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use hkdlab::cli::{cmd_check, cmd_norms, cmd_reproduce, configure_threads, OutputFormat, RunConfig};
use hkdlab::error::Error;
use hkdlab::norms::NormKind;
use hkdlab::report::ReportDocument;

/// Numerical verification of (h,k)-dichotomies for evolution operators.
#[derive(Parser)]
#[command(name = "hkdlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run structural checks and envelope estimation for one system.
    Check(CheckArgs),
    /// Emit Lyapunov-type norm tables with certified bounds.
    Norms(NormsArgs),
    /// Re-run a pinned configuration and compare against golden values.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Gallery example: scalar-ulnu, dicho-2d-literal, dicho-2d-repaired,
    /// dicho-2d-constantP or growth-not-dicho.
    #[arg(long, default_value = "dicho-2d-constantP")]
    example: String,
    /// Rate specifier for h: exp:<a>, poly:<a>, logpoly or table:<path.csv>.
    #[arg(long, default_value = "exp:1")]
    h: String,
    /// Rate specifier for k.
    #[arg(long, default_value = "exp:1")]
    k: String,
    /// Scalar profile for scalar-ulnu (exp-shift:<a>).
    #[arg(long)]
    u: Option<String>,
    /// Grid horizon.
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    /// Number of grid points on [0, tmax].
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    /// Structural tolerance (composition, invariance, kernel-inverse identities).
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Envelope and admissibility tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol_envelope: f64,
    /// Seed for the pseudo-random probe vectors.
    #[arg(long, default_value_t = 0x5EED)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        RunConfig::new(
            &self.example,
            &self.h,
            &self.k,
            self.u.as_deref(),
            self.tmax,
            self.grid_points,
            self.tol,
            self.tol_envelope,
            self.seed,
            &self.format,
        )
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also classify the growth envelope's uniformity with the two-horizon test.
    #[arg(long)]
    classify_growth: bool,
}

#[derive(Args)]
struct NormsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Norm family kind: growth or dichotomy.
    #[arg(long, default_value = "dichotomy")]
    kind: String,
    /// Probe vector as comma-separated components; repeatable.
    #[arg(long = "probe")]
    probes: Vec<String>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Artifact name: nonuniform-example, growth-not-dicho, theorem1 or theorem2.
    name: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

fn parse_probe(raw: &str) -> Result<Vec<f64>, Error> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Spec {
                    spec: raw.into(),
                    reason: format!("bad probe component `{part}`"),
                })
        })
        .collect()
}

fn run(cli: Cli) -> Result<(ReportDocument, OutputFormat, Option<PathBuf>), Error> {
    match cli.command {
        Cmd::Check(args) => {
            let cfg = args.common.config()?;
            let doc = cmd_check(&cfg, args.classify_growth)?;
            Ok((doc, cfg.format, args.common.out))
        }
        Cmd::Norms(args) => {
            let cfg = args.common.config()?;
            let kind = NormKind::parse(&args.kind)?;
            let probes = args
                .probes
                .iter()
                .map(|raw| parse_probe(raw))
                .collect::<Result<Vec<_>, _>>()?;
            let doc = cmd_norms(&cfg, kind, &probes)?;
            Ok((doc, cfg.format, args.common.out))
        }
        Cmd::Reproduce(args) => {
            let format = OutputFormat::parse(&args.format)?;
            let doc = cmd_reproduce(&args.name)?;
            Ok((doc, format, args.out))
        }
    }
}

/// Usage and configuration problems exit with 2, check failures with 1.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Spec { .. }
        | Error::UnknownExample(_)
        | Error::Domain(_)
        | Error::Grid(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let started = Instant::now();
    match run(cli) {
        Ok((doc, format, out)) => {
            let rendered = format.render(&doc);
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, rendered) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
                eprintln!("report written to {}", path.display());
            } else {
                print!("{rendered}");
            }
            eprintln!("completed in {} ms", started.elapsed().as_millis());
            if doc.all_pass() {
                ExitCode::SUCCESS
            } else {
                for v in &doc.violations {
                    eprintln!("failed: {}: {}", v.source, v.detail);
                }
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
