//! `imfilm`: dataset generation, training, evaluation, segmentation and
//! closed-loop imitation from one command line.

pub mod commands;
pub mod error;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use imfilm::StyleLabel;

use crate::commands::{EvalPart, Stage};
use crate::error::{CliError, CliResult};
use crate::run::{resolve_config, Run};

#[derive(Debug, Parser)]
#[command(name = "imfilm", version, about = "Synthetic one-shot imitation filming experiments")]
pub struct Cli {
    /// Config file (key = value lines). Defaults to <out>/config.txt when it
    /// exists, otherwise the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set style.train.epochs=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Run directory.
    #[arg(long, global = true, env = "IMFILM_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus into <out>/data.
    GenData {
        /// Only these styles (comma separated).
        #[arg(long, value_delimiter = ',')]
        styles: Vec<StyleLabel>,
        /// Replace an existing corpus.
        #[arg(long)]
        force: bool,
    },
    /// Train one stage; later stages need the earlier ones.
    Train {
        #[arg(value_enum)]
        stage: Stage,
    },
    /// Evaluate trained models and write reports under <out>/reports.
    Eval {
        /// Run a single part of the evaluation.
        #[arg(long, value_enum)]
        only: Option<EvalPart>,
    },
    /// Segment a video into single-style parts.
    Segment {
        /// Corpus id, benchmark mixture (mix-NNN) or video directory.
        video: String,
    },
    /// Film a new scene imitating a demo video.
    Imitate {
        /// Corpus id, benchmark mixture (mix-NNN) or video directory.
        demo: String,
        /// Seed of the new scene (default: eval.recapture_seed).
        #[arg(long)]
        scene_seed: Option<u64>,
        /// Print the segment plan and stop.
        #[arg(long)]
        dry_run: bool,
    },
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = resolve_config(cli.config.as_deref(), &cli.sets, cli.out.as_deref())?;
    let run = Run::new(cfg);
    match cli.command {
        Command::GenData { styles, force } => commands::gen_data(run, &styles, force),
        Command::Train { stage } => commands::train(run, stage),
        Command::Eval { only } => commands::eval(run, only),
        Command::Segment { video } => commands::segment(run, &video),
        Command::Imitate {
            demo,
            scene_seed,
            dry_run,
        } => commands::imitate_cmd(run, &demo, scene_seed, dry_run),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("imfilm")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Argument(e.to_string()))?;
    dispatch(cli)
}
