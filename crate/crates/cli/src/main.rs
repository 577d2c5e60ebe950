//! `lilac`: batch front end for detection, rewriting, harness generation,
//! normalization and interpretation.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::Failure;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (formats lir-1 lilac-1)");

#[derive(Parser, Debug)]
#[command(name = "lilac", version = VERSION, about = "Find linear algebra loops and hand them to libraries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Only look for this computation.
    #[arg(long)]
    pub what: Option<String>,
    /// Maximum number of alternatives the matcher may try per loop.
    #[arg(long, default_value_t = lilac_core::matcher::DEFAULT_BUDGET)]
    pub budget: u64,
    pub spec: std::path::PathBuf,
    pub program: std::path::PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a specification file.
    Check { spec: std::path::PathBuf },
    /// List the loop nests that implement a computation.
    Detect {
        #[command(flatten)]
        args: DetectArgs,
        /// Include the search trace of every match.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Replace detected loop nests by harness calls.
    Rewrite {
        #[command(flatten)]
        args: DetectArgs,
        /// Call this library harness instead of the reference harness.
        #[arg(long)]
        harness: Option<String>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Emit C++ source for library harnesses.
    GenHarness {
        /// Only generate this harness.
        #[arg(long)]
        harness: Option<String>,
        spec: std::path::PathBuf,
        /// Directory for the generated files; standard output otherwise.
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
        #[arg(long, default_value = "gen.cpp")]
        ext: String,
    },
    /// Run the normalization passes.
    Normalize {
        input: std::path::PathBuf,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Interpret a function on a JSON dataset.
    Run {
        program: std::path::PathBuf,
        #[arg(long)]
        entry: Option<String>,
        #[arg(long)]
        data: std::path::PathBuf,
        /// Specification whose computations and harnesses serve harness calls.
        #[arg(long, value_name = "SPEC")]
        with_reference_harness: Option<std::path::PathBuf>,
        /// Change detection for marshaled harnesses; defaults to the
        /// LILAC_MARSHAL_STRATEGY environment variable, then pageprotect.
        #[arg(long)]
        marshal_strategy: Option<String>,
        /// Print marshaling counters after the run.
        #[arg(long)]
        stats: bool,
        #[arg(long, default_value_t = lilac_core::interp::DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Failure>().map_or(1, |f| f.code);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_names_the_formats() {
        assert!(VERSION.ends_with(&format!("(formats {})", lilac_core::FORMAT_VERSION)));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "lilac",
            "rewrite",
            "--harness",
            "mkl_spmv",
            "s.lilac",
            "in.lir",
            "-o",
            "out.lir",
        ])
        .unwrap();
        let Command::Rewrite { harness, args, .. } = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(harness.as_deref(), Some("mkl_spmv"));
        assert_eq!(args.budget, lilac_core::matcher::DEFAULT_BUDGET);
    }
}
