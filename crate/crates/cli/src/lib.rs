//! Command-line front end: geometry specs in, check reports out.

pub mod report;
pub mod spec;
pub mod suites;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use report::{ReportBuilder, Tolerances};
use spec::{LoadedSpec, Mode};
use suites::{Points, Run, Suite, TransportArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "projprolong", version, about = "Projective curvature, tractor connections and parallel transport on coordinate charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Geometry spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Overrides the spec's sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the spec's arithmetic mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Threshold override, NAME=VALUE or a bare VALUE for every check.
    #[arg(long = "tol")]
    pub tol: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curvature tensors at sample points, with identity checks.
    Curvature {
        #[command(flatten)]
        common: Common,
        /// Evaluate at this point instead of the samples, e.g. "0.1,0.2".
        #[arg(long)]
        point: Option<String>,
    },
    /// Runs a verification suite.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Restricts the holonomy suite to one bundle.
        #[arg(long)]
        bundle: Option<String>,
        /// RK4 steps per holonomy loop.
        #[arg(long, default_value_t = projprolong::transport::DEFAULT_STEPS)]
        steps: usize,
    },
    /// Transports a random section along a curve.
    Transport {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tractor")]
        bundle: String,
        /// line:A:B, circle:BASE:i,j:R or rect:BASE:i,j:W,H.
        #[arg(long)]
        curve: Option<String>,
        /// Requires a closed curve and checks that the loop acts as the identity.
        #[arg(long = "loop")]
        closed: bool,
        #[arg(long, default_value_t = projprolong::transport::DEFAULT_STEPS)]
        steps: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Curvature { common, .. } | Command::Check { common, .. } | Command::Transport { common, .. } => common,
        }
    }
}

fn parse_point(text: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let p: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Input(format!("--point {text:?}: not a number list"))))
        .collect::<Result<_, _>>()?;
    if p.len() != n {
        return Err(CliError::Input(format!("--point has {} coordinates, the chart has {n}", p.len())));
    }
    Ok(p)
}

/// Executes a parsed command and returns the report.
pub fn execute(cli: &Cli) -> Result<report::Report, CliError> {
    let common = cli.command.common();
    let loaded = LoadedSpec::load(&common.spec)?;
    let tol = Tolerances::parse(&common.tol).map_err(CliError::Input)?;
    let mode = common.mode.unwrap_or(loaded.spec.mode);
    let seed = loaded.seed(common.seed);
    let mut float_points = loaded.float_points(common.seed);
    let (name, steps, bundle) = match &cli.command {
        Command::Curvature { point, .. } => {
            if let Some(p) = point {
                float_points = vec![parse_point(p, loaded.dim())?];
            }
            ("curvature", 0, None)
        }
        Command::Check { steps, bundle, .. } => ("check", *steps, bundle.clone()),
        Command::Transport { steps, .. } => ("transport", *steps, None),
    };
    if matches!(cli.command, Command::Check { .. } | Command::Transport { .. }) && steps == 0 {
        return Err(CliError::Input("--steps must be positive".into()));
    }
    let run = Run {
        spec: &loaded,
        mode,
        points: Points::new(&float_points, mode),
        float_points,
        seed,
        steps,
        bundle,
    };
    let mut b = ReportBuilder::new(&tol);
    let command = match &cli.command {
        Command::Curvature { .. } => {
            suites::curvature(&run, &mut b)?;
            name.to_string()
        }
        Command::Check { suite, .. } => {
            suites::run_suite(*suite, &run, &mut b)?;
            format!("check {}", suite.name())
        }
        Command::Transport { bundle, curve, closed, .. } => {
            let args = TransportArgs { bundle, curve: curve.as_deref(), closed: *closed };
            suites::transport_command(&run, &args, &mut b)?;
            name.to_string()
        }
    };
    Ok(b.finish(&command, &loaded, mode.name(), seed))
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let report = match execute(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    print!("{}", report.render());
    if let Some(path) = &cli.command.common().json {
        let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
        if let Err(source) = std::fs::write(path, text) {
            eprintln!("error: {}", CliError::Io { path: path.display().to_string(), source });
            return EXIT_INPUT;
        }
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
