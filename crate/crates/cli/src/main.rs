//! `timerefine`: generate refinement training data, parse and decode model
//! outputs, evaluate grounding, and run decode-strategy simulations.
//!
//! Exit codes: 0 success (possibly with per-record diagnostics on stderr),
//! 1 configuration or usage error, 2 I/O error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use timerefine::decode::DecodeStrategy;

use crate::config::{InputFormat, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "timerefine", version, about = "Iterative time-refinement tooling for video temporal grounding")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed (overrides the config file and TIMEREFINE_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert grounding annotations into refinement training samples (JSONL).
    Generate {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Annotation format of --input.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// JSON object mapping video id to duration (Charades-STA only).
        #[arg(long)]
        durations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse raw model outputs, one per line, into JSONL.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode parsed JSONL into final segments.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        strategy: Option<DecodeStrategy>,
        /// Auxiliary predictions, one `[s, e]` or `null` per line.
        #[arg(long)]
        aux: Option<PathBuf>,
        /// Decode first_step from the raw step-0 segment, without offsets.
        #[arg(long)]
        first_step_raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score raw model outputs against ground truth.
    Eval {
        /// Raw model outputs, one per line, aligned with --gt.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Ground-truth JSONL.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<DecodeStrategy>,
        #[arg(long)]
        aux: Option<PathBuf>,
        #[arg(long)]
        first_step_raw: bool,
        /// Where to write the report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare decode strategies on a synthetic noisy predictor.
    Simulate {
        #[arg(long)]
        gt: Option<PathBuf>,
        /// JSON predictor model (step_error_stds, offset_error_stds, seed).
        #[arg(long)]
        model_config: Option<PathBuf>,
        /// Comma-separated strategies; all four when omitted.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<DecodeStrategy>,
        #[arg(long)]
        first_step_raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as JSON.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let options = |raw: bool| {
        let mut o = cfg.decode_options();
        if raw {
            o.first_step_offsets = false;
        }
        o
    };
    match cli.command {
        Command::Generate {
            input,
            format,
            durations,
            out,
        } => commands::generate(
            &cfg,
            commands::GenerateArgs {
                input,
                format,
                durations,
                out,
                seed: cli.seed,
            },
        ),
        Command::Parse { input, out } => commands::parse_texts(&input, out.or(cfg.paths.output.clone()).as_deref()),
        Command::Decode {
            input,
            strategy,
            aux,
            first_step_raw,
            out,
        } => commands::decode_parsed(
            &input,
            cfg.strategy(strategy),
            aux.or(cfg.paths.aux.clone()).as_deref(),
            options(first_step_raw),
            out.or(cfg.paths.output.clone()).as_deref(),
        ),
        Command::Eval {
            pred,
            gt,
            strategy,
            aux,
            first_step_raw,
            out,
        } => commands::eval(commands::EvalArgs {
            pred: pred
                .or(cfg.paths.pred.clone())
                .ok_or_else(|| CliError::Config("missing --pred".into()))?,
            gt: gt
                .or(cfg.paths.gt.clone())
                .ok_or_else(|| CliError::Config("missing --gt".into()))?,
            strategy: cfg.strategy(strategy),
            aux: aux.or(cfg.paths.aux.clone()),
            options: options(first_step_raw),
            out: out.or(cfg.paths.output.clone()),
        }),
        Command::Simulate {
            gt,
            model_config,
            strategies,
            first_step_raw,
            out,
        } => {
            let model = model_config.as_deref().map(commands::load_model).transpose()?;
            commands::simulate(
                &cfg,
                commands::SimulateArgs {
                    gt: gt
                        .or(cfg.paths.gt.clone())
                        .ok_or_else(|| CliError::Config("missing --gt".into()))?,
                    model,
                    strategies,
                    seed: cli.seed,
                    options: options(first_step_raw),
                    out: out.or(cfg.paths.output.clone()),
                },
            )
        }
        Command::Config => commands::show_config(&cfg, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
