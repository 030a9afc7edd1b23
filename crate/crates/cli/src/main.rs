//! `liftgait`: connection fields, simulation, gait optimization, momentum
//! sweeps, circular-gait analysis, baselines and the acceptance checks.

mod commands;
mod runspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liftgait::linkage::Direction;

use runspec::RunSpec;

/// Environment variable overriding the output directory of the run spec.
pub const OUTPUT_ENV: &str = "LIFTGAIT_OUT";
const DEFAULT_OUTPUT: &str = "liftgait-out";

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 1.
    Invalid(String),
    /// Computation or output failure: exit code 2.
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Failed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "invalid input: {m}"),
            Self::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<liftgait::Error> for CliError {
    fn from(e: liftgait::Error) -> Self {
        use liftgait::Error::*;
        match e {
            InvalidGeometry(_) | InvalidGait(_) | InvalidArgument(_) | Json(_) => Self::Invalid(e.to_string()),
            LogBranch(_) | NotPositiveDefinite(..) | Numerical(_) => Self::Failed(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "liftgait", version, about = "Geometric gait analysis for planar chains with conserved momentum")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run spec; flags below override its fields.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// System preset: swimmer or snake.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Direction of motion: x or theta.
    #[arg(long, global = true, value_parser = parse_direction)]
    direction: Option<Direction>,
    /// Grid nodes per side of the shape torus.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Output directory (default: $LIFTGAIT_OUT, then the run spec, then ./liftgait-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Connection, momentum factor, frame change and locked inertia on the grid.
    Fields {
        /// Also write the curvature of the lifted connection.
        #[arg(long)]
        ccf: bool,
        /// Momentum along the direction for the curvature.
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
    },
    /// Integrate one cycle of a gait.
    Simulate {
        /// Gait JSON file.
        #[arg(long)]
        gait: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
        /// Integration steps per cycle.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Optimize a gait at one momentum level.
    Optimize {
        #[arg(long, default_value_t = 0.0)]
        momentum: f64,
        /// Starting gait JSON (default: a small loop at the strongest curvature).
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Optimal gaits over ascending momentum levels, with both baselines.
    Sweep {
        /// Comma-separated levels starting at 0 (default: 12 levels up to 4x the crossover).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Circles tangent to the folded shape over radii and momentum levels.
    CircleSweep {
        #[arg(long, default_value_t = liftgait::verify::CIRCLE_RADII)]
        radii: usize,
        #[arg(long, default_value_t = liftgait::verify::CIRCLE_MAX_RADIUS)]
        max_radius: f64,
        /// Comma-separated levels (default: low, crossover and 4x crossover).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Kinematic and momentum baselines and their crossover.
    Baselines {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Run the acceptance checks.
    Verify {
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<usize>>,
    },
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "x" => Ok(Direction::X),
        "theta" => Ok(Direction::Theta),
        other => Err(format!("expected x or theta, got '{other}'")),
    }
}

/// Run spec with flag overrides applied, plus the resolved output directory.
fn resolve(common: &Common) -> Result<(RunSpec, PathBuf), CliError> {
    let mut spec = match &common.spec {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    if let Some(name) = &common.system {
        spec.system = runspec::SystemSpec::Preset(name.clone());
    }
    if let Some(d) = common.direction {
        spec.direction = Some(d);
    }
    if let Some(n) = common.resolution {
        spec.resolution = n;
    }
    spec.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    Ok((spec, out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (spec, out) = resolve(&cli.common)?;
    let ctx = commands::Context::new(spec, out)?;
    match cli.command {
        Command::Fields { ccf, momentum } => ctx.fields(ccf, momentum),
        Command::Simulate { gait, momentum, steps } => ctx.simulate(&gait, momentum, steps),
        Command::Optimize { momentum, initial } => ctx.optimize(momentum, initial.as_deref()),
        Command::Sweep { levels } => ctx.sweep(levels),
        Command::CircleSweep { radii, max_radius, levels } => ctx.circle_sweep(radii, max_radius, levels),
        Command::Baselines { levels } => ctx.baselines(levels),
        Command::Verify { criteria } => ctx.verify(criteria),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liftgait: {e}");
            ExitCode::from(e.code())
        }
    }
}
