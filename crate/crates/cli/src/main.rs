use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ensemble_minimax_cli::commands::{self, GenArgs, PipelineArgs, PosteriorSpec, VerifyInstance};
use ensemble_minimax_cli::report::render;
use ensemble_minimax_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "ensemble-minimax",
    version,
    about = "Minimax prediction from ensemble votes"
)]
struct Cli {
    /// Omit environment metadata so output is byte-stable.
    #[arg(long, global = true)]
    canonical: bool,

    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the prediction game for a vote profile.
    Solve {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Solve the game with abstention at cost alpha.
    Abstain {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Posterior, correlation bound and minimax predictions from data files.
    Pipeline {
        #[arg(long)]
        train_pred: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        test_pred: PathBuf,
        /// `uniform`, `exp:<eta>`, or a weights JSON file.
        #[arg(long, default_value = "uniform")]
        posterior: String,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        alpha: Option<f64>,
        /// Recorded in the report.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certify the closed forms against the oracles on random instances.
    Verify {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        /// Certify this profile instead of random instances.
        #[arg(long, requires = "lambda")]
        votes: Option<PathBuf>,
        #[arg(long, requires = "votes")]
        lambda: Option<f64>,
        #[arg(long, requires = "votes")]
        alpha: Option<f64>,
    },
    /// Write synthetic train/test prediction files to the --out directory.
    Gen {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        hypotheses: usize,
        #[arg(long, default_value_t = 0.1)]
        base_error: f64,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let canonical = cli.canonical;
    let out = cli.out.as_ref();
    match cli.command {
        Command::Solve { votes, lambda } => {
            emit(&render(&commands::solve(&votes, lambda)?, canonical), out)
        }
        Command::Abstain {
            votes,
            lambda,
            alpha,
        } => emit(
            &render(&commands::abstain(&votes, lambda, alpha)?, canonical),
            out,
        ),
        Command::Pipeline {
            train_pred,
            train_labels,
            test_pred,
            posterior,
            delta,
            alpha,
            seed,
        } => {
            let args = PipelineArgs {
                train_pred,
                train_labels,
                test_pred,
                posterior: PosteriorSpec::parse(&posterior)?,
                delta,
                alpha,
                seed,
            };
            emit(&render(&commands::pipeline(&args)?, canonical), out)
        }
        Command::Verify {
            count,
            seed,
            nmax,
            votes,
            lambda,
            alpha,
        } => {
            let instance = votes.zip(lambda).map(|(votes, lambda)| VerifyInstance {
                votes,
                lambda,
                alpha,
            });
            let report = commands::verify(count, seed, nmax, instance.as_ref())?;
            emit(&render(&report, canonical), out)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::CertificationFailed)
            }
        }
        Command::Gen {
            seed,
            m,
            n,
            hypotheses,
            base_error,
        } => {
            let dir = out
                .cloned()
                .ok_or_else(|| CliError::invalid("gen needs --out <directory>"))?;
            let summary = commands::generate(&GenArgs {
                seed,
                m,
                n,
                hypotheses,
                base_error,
                out: dir,
            })?;
            emit(&render(&summary, canonical), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::CertificationFailed) => ExitCode::from(1),
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
