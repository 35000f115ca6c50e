use std::path::{Path, PathBuf};

use log::{info, warn};
use scenemorph_core::dataset::{load_stream_sized, DatasetManifest, Domain, DomainTag, FrameRecord, ManifestEntry};
use scenemorph_core::harness::{apply_relation, MetamorphicRelation};
use scenemorph_core::raster::Image;
use scenemorph_core::translator::{Architecture, Checkpoint};

use crate::error::{CliError, CliResult, Context};
use crate::Common;

const KEYS: &[&str] = &["checkpoint", "manifest", "to", "alias", "arch"];

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Translator checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Manifest of the frames to translate.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Target domain; defaults to the other domain of the manifest.
    #[arg(long)]
    to: Option<Domain>,
    /// Alias recorded in the new manifest; defaults to the checkpoint's.
    #[arg(long)]
    alias: Option<String>,
    /// Fail unless the checkpoint uses this architecture preset.
    #[arg(long)]
    arch: Option<String>,
}

/// Loads the included frames at the size of the first one, so that frames
/// written by `prepare` are read back unchanged.
pub fn load_native(manifest: &DatasetManifest) -> CliResult<Vec<FrameRecord>> {
    let Some((_, first)) = manifest.included().next() else {
        return Ok(Vec::new());
    };
    let path = manifest.resolve(first);
    let probe = Image::load(&path).map_err(|e| CliError::data(format!("frame {}: {e}", first.frame_id())))?;
    Ok(load_stream_sized(manifest, probe.height(), probe.width())?)
}

pub fn load_checkpoint(path: &Path, arch: Option<&str>) -> CliResult<Checkpoint> {
    let ckpt = match arch {
        Some(name) => {
            let expected = Architecture::preset(name).ok_or_else(|| CliError::usage(format!("unknown architecture {name:?}")))?;
            Checkpoint::load_expecting(path, &expected)
        }
        None => Checkpoint::load(path),
    };
    ckpt.context(format!("checkpoint {}", path.display()))
}

pub fn run(args: Args, common: &Common) -> CliResult<()> {
    let s = common.settings("translate", KEYS)?;
    let ckpt_path = s.required_path(args.checkpoint, "checkpoint")?;
    let manifest_path = s.required_path(args.manifest, "manifest")?;
    let arch = s.value(args.arch, "arch")?;
    let ckpt = load_checkpoint(&ckpt_path, arch.as_deref())?;
    let source = DatasetManifest::read(&manifest_path)?;
    let from = source.domain.domain;
    let to = s.or(args.to, "to", from.other())?;
    if to == from {
        return Err(CliError::usage(format!("manifest is already in domain {from}")));
    }
    let known = &ckpt.domains[from.index()];
    if !known.alias.is_empty() && known.alias != source.domain.alias {
        warn!("manifest alias {:?} differs from the checkpoint's {:?} for {from}", source.domain.alias, known.alias);
    }
    let alias = s.or(args.alias, "alias", ckpt.domains[to.index()].alias.clone())?;
    let out = common.out_dir(&s)?;

    let frames = load_native(&source)?;
    info!("translating {} frames {from} -> {to} ({})", frames.len(), alias);
    let relation = MetamorphicRelation::translator(ckpt.params, from, to);
    let translated = apply_relation(&relation, &frames)?;

    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let mut manifest = DatasetManifest::new(format!("{}-{alias}", source.dataset_id), DomainTag::new(to, alias), &out);
    manifest.provenance = format!("translated from {} ({from} to {to}) at training step {}", source.dataset_id, ckpt.step);
    let labels = source.included().map(|(_, e)| e.steering_degrees);
    for (record, label) in translated.iter().zip(labels) {
        let name = format!("{}.png", record.frame_id);
        record.image.save_png(&frames_dir.join(&name))?;
        manifest.entries.push(ManifestEntry::new(Path::new("frames").join(name), label));
    }
    let path = out.join("manifest.tsv");
    manifest.write(&path)?;
    info!("wrote {} frames and {}", manifest.entries.len(), path.display());
    Ok(())
}
