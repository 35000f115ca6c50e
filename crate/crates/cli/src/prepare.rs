use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use scenemorph_core::dataset::{
    extract_frames, filter_frames, normalize_frame_to, stride_for_budget, DatasetManifest, Domain, DomainTag, ManifestEntry, FRAME_HEIGHT,
    FRAME_WIDTH,
};
use scenemorph_core::harness::read_predictions;
use scenemorph_core::synthetic;

use crate::error::{CliError, CliResult, Context};
use crate::Common;

const KEYS: &[&str] = &["input", "synthetic", "stride", "budget", "exclude", "labels", "domain", "alias", "dataset-id", "height", "width"];

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of still images, an animated GIF/PNG, or one image.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate this many procedural road frames instead of reading input.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Keep every N-th source frame.
    #[arg(long)]
    stride: Option<usize>,
    /// Keep at most this many frames, evenly strided.
    #[arg(long, conflicts_with = "stride")]
    budget: Option<usize>,
    /// File with one frame id per line to mark excluded.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// CSV `frame_id,angle_degrees` with steering labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    domain: Option<Domain>,
    /// Human-readable domain name, e.g. "snowy".
    #[arg(long)]
    alias: Option<String>,
    #[arg(long)]
    dataset_id: Option<String>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
}

fn read_exclusions(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read exclusion list {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn read_labels(path: &Path) -> CliResult<HashMap<String, f64>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("cannot read labels {}: {e}", path.display())))?;
    let rows = read_predictions(file).context(format!("labels {}", path.display()))?;
    Ok(rows.into_iter().map(|p| (p.frame_id, p.degrees)).collect())
}

pub fn run(args: Args, common: &Common) -> CliResult<()> {
    let s = common.settings("prepare", KEYS)?;
    let input = s.path(args.input, "input")?;
    let synthetic_count = s.value(args.synthetic, "synthetic")?;
    let stride = s.value(args.stride, "stride")?;
    let budget = s.value(args.budget, "budget")?;
    let domain = s.or(args.domain, "domain", Domain::S1)?;
    let alias = s.or(args.alias, "alias", domain.to_string())?;
    let height = s.or(args.height, "height", FRAME_HEIGHT)?;
    let width = s.or(args.width, "width", FRAME_WIDTH)?;
    let seed = common.seed(&s)?;
    if height == 0 || width == 0 {
        return Err(CliError::usage("frame size must be positive"));
    }
    if stride.is_some() && budget.is_some() {
        return Err(CliError::usage("--stride and --budget are exclusive"));
    }
    if stride == Some(0) {
        return Err(CliError::usage("--stride must be at least 1"));
    }
    let exclusions = s.path(args.exclude, "exclude")?.map(|p| read_exclusions(&p)).transpose()?.unwrap_or_default();
    let labels = s.path(args.labels, "labels")?.map(|p| read_labels(&p)).transpose()?;
    let out = common.out_dir(&s)?;
    let tag = DomainTag::new(domain, alias);

    let mut manifest = match (input, synthetic_count) {
        (Some(_), Some(_)) => return Err(CliError::usage("--input and --synthetic are exclusive")),
        (None, None) => return Err(CliError::usage("missing --input (or --synthetic)")),
        (None, Some(n)) => {
            let mut m = synthetic::write_corpus(&out.join("frames"), tag, n, height, width, seed)?;
            // entries are relative to the frames directory; rebase onto out
            for e in &mut m.entries {
                e.path = Path::new("frames").join(&e.path);
            }
            m.base_dir = out.clone();
            std::fs::remove_file(out.join("frames").join("manifest.tsv"))?;
            m
        }
        (Some(input), None) => {
            let dataset_id = s.or(args.dataset_id, "dataset-id", {
                input.file_stem().map_or_else(|| "dataset".to_string(), |n| n.to_string_lossy().into_owned())
            })?;
            ingest(&input, &out, stride, budget, height, width, tag, dataset_id)?
        }
    };

    if let Some(labels) = &labels {
        let mut missing = 0;
        for e in &mut manifest.entries {
            match labels.get(&e.frame_id()) {
                Some(&d) => e.steering_degrees = Some(d),
                None => missing += 1,
            }
        }
        if missing > 0 {
            warn!("{missing} frames have no steering label");
        }
    }
    if !exclusions.is_empty() {
        let outcome = filter_frames(&manifest, &exclusions);
        if !outcome.unknown_ids.is_empty() {
            warn!("exclusion ids not in the dataset: {}", outcome.unknown_ids.join(", "));
        }
        manifest = outcome.manifest;
    }
    let path = out.join("manifest.tsv");
    manifest.write(&path)?;
    info!(
        "wrote {} ({} frames, {} included)",
        path.display(),
        manifest.entries.len(),
        manifest.included_count()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ingest(
    input: &Path,
    out: &Path,
    stride: Option<usize>,
    budget: Option<usize>,
    height: usize,
    width: usize,
    tag: DomainTag,
    dataset_id: String,
) -> CliResult<DatasetManifest> {
    let frames = match budget {
        Some(b) => {
            let all = extract_frames(input, 1)?;
            let stride = stride_for_budget(all.len(), b);
            all.into_iter().filter(|f| f.index % stride == 0).collect()
        }
        None => extract_frames(input, stride.unwrap_or(1))?,
    };
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let mut manifest = DatasetManifest::new(dataset_id, tag, out);
    manifest.provenance = format!(
        "{} stride={} size={height}x{width}",
        input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        stride.map_or_else(|| format!("budget:{}", budget.unwrap_or(0)), |s| s.to_string())
    );
    for f in frames {
        let image = normalize_frame_to(&f.image, height, width)?;
        let name = format!("frame_{:06}.png", f.index);
        image.save_png(&frames_dir.join(&name))?;
        manifest.entries.push(ManifestEntry::new(Path::new("frames").join(name), None));
    }
    Ok(manifest)
}
