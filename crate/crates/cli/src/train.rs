use std::path::{Path, PathBuf};

use log::info;
use scenemorph_core::dataset::{load_stream_sized, DatasetManifest, Domain};
use scenemorph_core::raster::Image;
use scenemorph_core::translator::{write_training_log, Architecture, Checkpoint, Distance, LossWeights, Objective, TrainConfig, Trainer};

use crate::error::{CliError, CliResult, Context};
use crate::Common;

const KEYS: &[&str] = &[
    "s1",
    "s2",
    "arch",
    "steps",
    "batch-size",
    "lr-g",
    "lr-d",
    "vae-weight",
    "gan-weight",
    "cycle-weight",
    "distance",
    "checkpoint-interval",
    "resume",
];

pub const CHECKPOINT_FILE: &str = "translator.ckpt";
pub const LOG_FILE: &str = "train_log.csv";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Manifest of the source domain (tagged S1).
    #[arg(long)]
    s1: Option<PathBuf>,
    /// Manifest of the target domain (tagged S2).
    #[arg(long)]
    s2: Option<PathBuf>,
    /// Architecture preset: tiny, toy or full.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Generator and encoder learning rate.
    #[arg(long)]
    lr_g: Option<f64>,
    /// Discriminator learning rate.
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    vae_weight: Option<f64>,
    #[arg(long)]
    gan_weight: Option<f64>,
    #[arg(long)]
    cycle_weight: Option<f64>,
    /// Pixel distance of reconstruction terms: l1 or l2.
    #[arg(long)]
    distance: Option<String>,
    /// Steps between checkpoint writes; 0 writes only at the end.
    #[arg(long)]
    checkpoint_interval: Option<u64>,
    /// Continue from this checkpoint up to --steps.
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn parse_distance(text: &str) -> CliResult<Distance> {
    match text.to_ascii_lowercase().as_str() {
        "l1" => Ok(Distance::L1),
        "l2" => Ok(Distance::L2),
        other => Err(CliError::usage(format!("unknown distance {other:?} (expected l1 or l2)"))),
    }
}

fn read_manifest(path: &Path, expected: Domain) -> CliResult<DatasetManifest> {
    let m = DatasetManifest::read(path)?;
    if m.domain.domain != expected {
        return Err(CliError::data(format!(
            "{} is tagged {}, expected {expected}",
            path.display(),
            m.domain.domain
        )));
    }
    if m.included_count() == 0 {
        return Err(CliError::data(format!("{} has no included frames", path.display())));
    }
    Ok(m)
}

fn load_images(m: &DatasetManifest, arch: &Architecture) -> CliResult<Vec<Image>> {
    Ok(load_stream_sized(m, arch.height, arch.width)?.into_iter().map(|r| r.image).collect())
}

pub fn run(args: Args, common: &Common) -> CliResult<()> {
    let s = common.settings("train", KEYS)?;
    let s1 = read_manifest(&s.required_path(args.s1, "s1")?, Domain::S1)?;
    let s2 = read_manifest(&s.required_path(args.s2, "s2")?, Domain::S2)?;
    let defaults = TrainConfig::default();
    let resume = s.path(args.resume, "resume")?;

    let mut trainer = match &resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path).context(format!("checkpoint {}", path.display()))?;
            let steps = s.or(args.steps, "steps", ckpt.config.steps)?;
            let mut t = Trainer::from_checkpoint(ckpt)?;
            t.set_total_steps(steps);
            t
        }
        None => {
            let arch_name = s.or(args.arch, "arch", "toy".to_string())?;
            let arch = Architecture::preset(&arch_name).ok_or_else(|| CliError::usage(format!("unknown architecture {arch_name:?}")))?;
            let objective = Objective {
                weights: LossWeights {
                    vae: s.or(args.vae_weight, "vae-weight", defaults.objective.weights.vae)?,
                    gan: s.or(args.gan_weight, "gan-weight", defaults.objective.weights.gan)?,
                    cycle: s.or(args.cycle_weight, "cycle-weight", defaults.objective.weights.cycle)?,
                },
                distance: s.value(args.distance, "distance")?.map(|d| parse_distance(&d)).transpose()?.unwrap_or_default(),
            };
            let config = TrainConfig {
                steps: s.or(args.steps, "steps", defaults.steps)?,
                batch_size: s.or(args.batch_size, "batch-size", defaults.batch_size)?,
                lr_generator: s.or(args.lr_g, "lr-g", defaults.lr_generator)?,
                lr_discriminator: s.or(args.lr_d, "lr-d", defaults.lr_discriminator)?,
                objective,
                seed: common.seed(&s)?,
                checkpoint_interval: s.or(args.checkpoint_interval, "checkpoint-interval", defaults.checkpoint_interval)?,
                ..defaults
            };
            Trainer::initialized(arch, config)?
        }
    };
    trainer = trainer.with_domains([s1.domain.clone(), s2.domain.clone()]);

    let arch = trainer.params().architecture().clone();
    let (c1, c2) = (load_images(&s1, &arch)?, load_images(&s2, &arch)?);
    let out = common.out_dir(&s)?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    trainer = trainer.with_checkpoint_path(&ckpt_path);
    info!(
        "training {} ({} parameters) on {} + {} frames from step {} to {}",
        arch.name,
        trainer.params().param_count(),
        c1.len(),
        c2.len(),
        trainer.step(),
        trainer.config().steps
    );
    let start = trainer.step();
    let log = trainer.run(&c1, &c2).map_err(|e| {
        let note = if ckpt_path.exists() {
            format!("training stopped; the last checkpoint in {} is kept", ckpt_path.display())
        } else {
            "training stopped before the first checkpoint".to_string()
        };
        CliError::from(e).context(note)
    })?;

    let log_path = out.join(LOG_FILE);
    let mut text = Vec::new();
    write_training_log(&mut text, &log)?;
    if resume.is_some() && log_path.exists() {
        // keep earlier rows up to the resume point, then append the new ones
        let previous = std::fs::read_to_string(&log_path)?;
        let mut merged: Vec<&str> = previous
            .lines()
            .enumerate()
            .filter(|(i, line)| *i == 0 || line.split(',').next().and_then(|v| v.parse::<u64>().ok()).is_some_and(|st| st <= start))
            .map(|(_, l)| l)
            .collect();
        let fresh = String::from_utf8(text).expect("csv output is utf-8");
        merged.extend(fresh.lines().skip(1));
        std::fs::write(&log_path, merged.join("\n") + "\n")?;
    } else {
        std::fs::write(&log_path, text)?;
    }
    if let Some(last) = log.last() {
        info!("step {} total loss {:.5}", last.step, last.losses.total);
    }
    info!("wrote {} and {}", ckpt_path.display(), log_path.display());
    Ok(())
}
