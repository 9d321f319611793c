//! Command-line front end: JSON file formats and the `sklar` subcommands.

pub mod commands;
pub mod format;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sklar_core::{Error, Label};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const COMPATIBILITY: i32 = 3;
    pub const UNSUPPORTED: i32 = 4;
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("incompatible inputs: {0}")]
    Compatibility(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::PARSE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Compatibility(_) => exit::COMPATIBILITY,
            CliError::Unsupported(_) => exit::UNSUPPORTED,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Index(_) | Error::Dimension(_) | Error::IncompatibleOrder { .. } => {
                CliError::Compatibility(msg)
            }
            Error::Unsupported(_) => CliError::Unsupported(msg),
            _ => CliError::Validation(msg),
        }
    }
}

/// What a command writes to standard output and standard error.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser, Debug)]
#[command(name = "sklar", version, about = "Copula measures, Sklar composition and fdd distances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    /// Three well-separated copulas plus noise below eps/2.
    Clusters,
    Constant,
    /// Independence and comonotone copulas in turn.
    Alternating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FunctionalName {
    /// Random coefficients drawn from the seed.
    Linear,
    MaxCell,
    SumOfSquares,
    Constant,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a document: copula invariants, marginal validity, or family consistency.
    Validate { path: PathBuf },
    /// Push a copula through marginal quantiles and write the discrete joint.
    Compose {
        copula: PathBuf,
        marginals: PathBuf,
        /// Comma-separated labels; defaults to all labels of the copula.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<Label>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the order-n copula of a joint with continuous marginals.
    Decompose {
        joint: PathBuf,
        marginals: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transport distance between two measures, or the fdd distance between families.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        fdd: bool,
        #[arg(long, default_value_t = 7)]
        depth: usize,
    },
    /// Greedy eps-clustering of a generated copula sequence.
    CompactDemo {
        #[arg(long, default_value_t = 300)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Pattern::Clusters)]
        pattern: Pattern,
    },
    /// Maximize a convex functional over permutation copulas.
    Extremal {
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum)]
        functional: FunctionalName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        midpoint_checks: usize,
        /// Value of the constant functional.
        #[arg(long, default_value_t = 1.0)]
        value: f64,
    },
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Validate { path } => commands::validate(path),
        Command::Compose {
            copula,
            marginals,
            subset,
            out,
        } => commands::compose(copula, marginals, subset.as_deref(), out.as_deref()),
        Command::Decompose {
            joint,
            marginals,
            order,
            out,
        } => commands::decompose(joint, marginals, *order, out.as_deref()),
        Command::Distance { a, b, fdd, depth } => commands::distance(a, b, *fdd, *depth),
        Command::CompactDemo {
            count,
            order,
            eps,
            seed,
            pattern,
        } => commands::compact_demo(*count, *order, *eps, *seed, *pattern),
        Command::Extremal {
            order,
            functional,
            seed,
            samples,
            midpoint_checks,
            value,
        } => commands::extremal(*order, *functional, *seed, *samples, *midpoint_checks, *value),
    }
}

/// `x` with 12 significant digits, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        let s = format!("{:.11e}", x);
        let (mant, e) = s.split_once('e').expect("exponent");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
