//! `scenemorph`: prepare frame datasets, train a two-domain scene translator,
//! translate datasets, test steering models against the translated scenes
//! and aggregate the inconsistency reports.

mod config;
mod error;
mod prepare;
mod render;
mod report;
mod testing;
mod train;
mod translate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, Settings};
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "scenemorph", version, about = "Metamorphic testing of steering models with scene translation")]
struct Cli {
    /// Stage configuration file (`key = value` lines, `[stage]` sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice of the stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract, normalize and list frames as a dataset manifest.
    Prepare(prepare::Args),
    /// Train the translator on two unpaired manifests.
    Train(train::Args),
    /// Translate every included frame of a manifest into the other domain.
    Translate(translate::Args),
    /// Run steering models on original and transformed streams.
    Test(testing::Args),
    /// Merge report files into a table and plots.
    Report(report::Args),
}

/// Flags shared by every stage.
pub struct Common {
    config: Option<ConfigFile>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Common {
    pub fn settings(&self, section: &'static str, known: &[&str]) -> CliResult<Settings<'_>> {
        Settings::new(self.config.as_ref(), section, known)
    }

    pub fn seed(&self, s: &Settings<'_>) -> CliResult<u64> {
        s.or(self.seed, "seed", 0)
    }

    /// Creates the output directory if needed.
    pub fn out_dir(&self, s: &Settings<'_>) -> CliResult<PathBuf> {
        let dir = s.required_path(self.out.clone(), "out")?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let common = Common {
        config: cli.config.as_deref().map(ConfigFile::read).transpose()?,
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Prepare(a) => prepare::run(a, &common),
        Command::Train(a) => train::run(a, &common),
        Command::Translate(a) => translate::run(a, &common),
        Command::Test(a) => testing::run(a, &common),
        Command::Report(a) => report::run(a, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code())
        }
    }
}
