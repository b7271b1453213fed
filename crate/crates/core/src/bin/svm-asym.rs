use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use svm_asym::report::commands::{self, CompareArgs, CommandError, Format, Output, SimulateArgs, EXIT_USAGE};

/// Limiting theory of the soft-margin SVM in high dimensions and Monte Carlo
/// checks against it.
#[derive(Parser)]
#[command(name = "svm-asym", version)]
struct Cli {
    /// Output format: json or csv.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel work (default: $SVM_ASYM_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for (alpha*, gamma*, sigma*) and the derived predictions.
    Solve {
        /// null | logistic:<c> | indicator
        #[arg(long)]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
    },
    /// Limiting objective along a grid of alpha values.
    Landscape {
        #[arg(long)]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        /// lo:step:hi or a comma separated list.
        #[arg(long, default_value = "0:0.02:1", allow_hyphen_values = true)]
        alpha_grid: String,
    },
    /// Predicted coefficient CDF, margin CDF and margin-input density.
    Curves {
        #[arg(long)]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value = "-3:0.01:3", allow_hyphen_values = true)]
        grid: String,
    },
    /// Penalty minimizing the limiting misclassification error.
    TuneLambda {
        #[arg(long)]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 1e-2)]
        lo: f64,
        #[arg(long, default_value_t = 1e2)]
        hi: f64,
    },
    /// Fit SVMs on simulated data and compare with the theory.
    Simulate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value_t = 100_000)]
        n_test: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_epochs: usize,
    },
    /// Write a simulated dataset to a binary file.
    Generate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        file: PathBuf,
    },
    /// Fit a stored dataset and compare with the theory.
    Compare {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 100_000)]
        n_test: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_epochs: usize,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CommandError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("SVM_ASYM_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CommandError {
            code: EXIT_USAGE,
            message: format!("SVM_ASYM_THREADS must be a positive integer, got {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<Output, CommandError> {
    if let Some(n) = threads(cli.threads)? {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let f = cli.format;
    match cli.command {
        Command::Solve { model, delta, lambda } => commands::solve(&model, delta, lambda, f),
        Command::Landscape {
            model,
            delta,
            lambda,
            alpha_grid,
        } => commands::landscape(&model, delta, lambda, &commands::parse_grid(&alpha_grid)?, f),
        Command::Curves {
            model,
            delta,
            lambda,
            grid,
        } => commands::curves(&model, delta, lambda, &commands::parse_grid(&grid)?, f),
        Command::TuneLambda { model, delta, lo, hi } => commands::tune_lambda(&model, delta, lo, hi, f),
        Command::Simulate {
            model,
            n,
            p,
            lambda,
            seed,
            replicates,
            n_test,
            tol,
            max_epochs,
        } => commands::simulate(
            &SimulateArgs {
                model,
                n,
                p,
                lambda,
                seed,
                replicates,
                n_test,
                tol,
                max_epochs,
            },
            f,
        ),
        Command::Generate { model, n, p, seed, file } => commands::generate(&model, n, p, seed, &file),
        Command::Compare {
            file,
            model,
            lambda,
            n_test,
            tol,
            max_epochs,
        } => commands::compare(
            &file,
            &CompareArgs {
                model,
                lambda,
                n_test,
                tol,
                max_epochs,
            },
            f,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match run(cli) {
        Ok(output) => {
            for note in &output.notes {
                eprintln!("svm-asym: {note}");
            }
            let written = match &out {
                Some(path) => fs::write(path, &output.body),
                None => std::io::stdout().write_all(output.body.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("svm-asym: cannot write output: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
            ExitCode::from(output.code as u8)
        }
        Err(e) => {
            eprintln!("svm-asym: error: {e}");
            if e.code == EXIT_USAGE {
                eprintln!("\nFor usage, run 'svm-asym --help'.");
            }
            ExitCode::from(e.code as u8)
        }
    }
}
