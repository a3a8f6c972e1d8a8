//! `cfsdim`: dimension computations for common-fixed-point systems and
//! 4-corner sets.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use cfsdim_core::CfsError;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cfsdim", version, about = "Dimension of self-similar systems with common fixed points")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "CFSDIM_THREADS")]
    pub threads: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// System descriptor (JSON file).
    pub system: PathBuf,
    /// Probabilities: "uniform", "natural" (4-corner only) or an inline JSON
    /// array such as '[[0.5,0.2],[0.3]]'. Overrides the descriptor.
    #[arg(long)]
    pub p: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hausdorff dimension of the self-similar measure.
    MeasureDim {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Hausdorff dimension of the attractor.
    AttractorDim {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Also compute the graph-directed roots s_1..s_k.
        #[arg(long)]
        gd_depth: Option<usize>,
        /// Also estimate the box-counting dimension.
        #[arg(long = "box")]
        box_count: bool,
        #[arg(long, default_value_t = 6)]
        m_min: u32,
        #[arg(long, default_value_t = 20)]
        m_max: u32,
    },
    /// Overlap correction of the entropy.
    Phi {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum, default_value_t = PhiMethodArg::Series)]
        method: PhiMethodArg,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Monte-Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Random-walk entropy of the distribution of composed maps.
    RwEntropy {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum, default_value_t = RwMethodArg::Closed)]
        method: RwMethodArg,
        /// Word length for the brute-force method.
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u128,
    },
    /// Smallest same-ratio gaps between non-identical compositions.
    EscProbe {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u128,
    },
    /// Conditions, measure dimension and set dimension of a 4-corner set.
    Fourcorner {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Draw a 4-corner set: cylinder rectangles (SVG) or a chaos-game cloud (PPM/PNG).
    Render {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum, default_value_t = RenderModeArg::Cylinders)]
        mode: RenderModeArg,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 200_000)]
        points: usize,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        /// Raster side length in pixels.
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical dimension estimates.
    Estimate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum, default_value_t = EstimateKind::Box)]
        kind: EstimateKind,
        #[arg(long, default_value_t = 6)]
        m_min: u32,
        #[arg(long, default_value_t = 20)]
        m_max: u32,
        /// Scales dropped from each end of the fit.
        #[arg(long, default_value_t = 2)]
        trim: u32,
        /// Points (4-corner box counting) or samples (entropy).
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u128,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhiMethodArg {
    Series,
    MonteCarlo,
    LowerBound,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RwMethodArg {
    Closed,
    BruteForce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderModeArg {
    Cylinders,
    Attractor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimateKind {
    Box,
    Entropy,
}

/// 0 ok, 1 input or IO, 2 validation, 3 budget or convergence.
fn exit_code(e: &CfsError) -> u8 {
    match e {
        CfsError::Io(_) | CfsError::Json(_) | CfsError::Parse(_) => 1,
        CfsError::BudgetExceeded { .. }
        | CfsError::SeriesTooLong { .. }
        | CfsError::RunTooLong { .. }
        | CfsError::NonConvergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(out) => {
            print!("{}", out.render(cli.format));
            ExitCode::SUCCESS
        }
        Err(commands::Failure { error, partial }) => {
            if let Some(out) = partial {
                print!("{}", out.render(cli.format));
            }
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
