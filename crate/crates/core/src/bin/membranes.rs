use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use membranes::grid::DomainShape;
use membranes::runner::{run, Command, ConfigFile, RunConfig};

#[derive(Parser)]
#[command(name = "membranes", version, about = "Ordered membranes: solve, diagnose, classify")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the constrained problem and write the stack
    Solve(Flags),
    /// Weiss energy sweep at the highest-multiplicity node nearest the origin
    Weiss(Flags),
    /// Blow-ups of a solved instance at shrinking scales
    Blowup(Flags),
    /// Classify a fixture (with --category) or a blow-up of a solved instance
    Classify(Flags),
    /// Write an analytic category stack with its Weiss value
    Fixtures(Flags),
    /// Run seeded invariant suites; non-zero exit on any violation
    Verify(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML file with the same keys; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long, value_parser = parse_shape)]
    shape: Option<DomainShape>,
    #[arg(long = "N")]
    n_membranes: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    forcing: Option<Vec<f64>>,
    /// NAME[:params], e.g. example46-ii:30, radial-eps:0.05, layered
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    category: Option<String>,
    /// Degrees
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
    /// pava, solver, geometry, weiss, blowup, profiles or all
    #[arg(long)]
    suite: Option<String>,
}

fn parse_shape(s: &str) -> Result<DomainShape, String> {
    match s {
        "disk" => Ok(DomainShape::Disk),
        "square" => Ok(DomainShape::Square),
        _ => Err(format!("unknown shape '{s}' (expected disk or square)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, f) = match cli.command {
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Weiss(f) => (Command::Weiss, f),
        Sub::Blowup(f) => (Command::Blowup, f),
        Sub::Classify(f) => (Command::Classify, f),
        Sub::Fixtures(f) => (Command::Fixtures, f),
        Sub::Verify(f) => (Command::Verify, f),
    };
    let base = match &f.config {
        Some(p) => match ConfigFile::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        command: Some(command),
        n: f.n,
        radius: f.radius,
        shape: f.shape,
        n_membranes: f.n_membranes,
        forcing: f.forcing,
        bc: f.bc,
        omega: f.omega,
        tol: f.tol,
        max_sweeps: f.max_sweeps,
        radii: f.radii,
        out: f.out,
        seed: f.seed,
        category: f.category,
        angle: f.angle,
        suite: f.suite,
    };
    let cfg = match RunConfig::resolve(base.overridden_by(flags)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.summary["results"]).unwrap_or_default();
            let _ = writeln!(std::io::stdout(), "{text}");
            if out.exit_code == 0 {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} invariant violation(s); see {}", out.summary["results"]["violations"].as_array().map_or(0, |v| v.len()), cfg.out.join("violations.json").display());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
