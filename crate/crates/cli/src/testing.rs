use std::path::{Path, PathBuf};

use log::info;
use scenemorph_core::dataset::{load_stream_sized, DatasetManifest, FrameRecord};
use scenemorph_core::harness::{
    affine, apply_relation, blur, fog, pair_predictions, rain, run_model, write_flags, write_predictions, write_reports, ErrorBound,
    InconsistencyReport, MetamorphicRelation, RainParams, DEFAULT_BOUNDS,
};
use scenemorph_core::models::ModelSpec;

use crate::error::{CliError, CliResult};
use crate::render::{self, GridRow};
use crate::translate::{load_checkpoint, load_native};
use crate::Common;

const KEYS: &[&str] = &["original", "transformed", "transform", "model", "scene", "bounds", "flags", "grid"];

/// Upper limit on grid rows per model, whatever `--grid` asks for.
pub const MAX_GRID_ROWS: usize = 64;

pub const REPORT_FILE: &str = "report.csv";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Manifest of the original frames.
    #[arg(long)]
    original: Option<PathBuf>,
    /// Manifest of transformed frames aligned with the original by frame id.
    #[arg(long)]
    transformed: Option<PathBuf>,
    /// Transform applied on the fly instead: identity, fog:W, blur:SIGMA,
    /// rain:SEED, affine:A,B,C,D,E,F or translate:CHECKPOINT.
    #[arg(long, conflicts_with = "transformed")]
    transform: Option<String>,
    /// Model spec; repeat for several models.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Scene name in the report; defaults to the transformed domain alias.
    #[arg(long)]
    scene: Option<String>,
    /// Comma-separated ascending error bounds in degrees.
    #[arg(long)]
    bounds: Option<String>,
    /// Also write per-frame violation flags.
    #[arg(long)]
    flags: bool,
    /// Write side-by-side grids of up to N frames per model.
    #[arg(long)]
    grid: Option<usize>,
}

pub fn parse_bounds(text: &str) -> CliResult<Vec<ErrorBound>> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad error bound {v:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ErrorBound::list(&values)?)
}

fn numbers(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad {what} parameter {v:?}"))))
        .collect()
}

pub fn parse_transform(spec: &str, source: &DatasetManifest) -> CliResult<MetamorphicRelation> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let one = |what| -> CliResult<f64> {
        match numbers(rest, what)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(CliError::usage(format!("{what} takes one parameter"))),
        }
    };
    Ok(match kind {
        "identity" => MetamorphicRelation::identity(),
        "fog" => fog(one("fog")?)?,
        "blur" => blur(one("blur")?)?,
        "rain" => rain(RainParams {
            seed: rest.trim().parse().map_err(|_| CliError::usage(format!("bad rain seed {rest:?}")))?,
            ..RainParams::default()
        })?,
        "affine" => match numbers(rest, "affine")?.as_slice() {
            &[a, b, c, d, e, f] => affine([[a, b, c], [d, e, f]])?,
            _ => return Err(CliError::usage("affine takes six parameters")),
        },
        "translate" if !rest.is_empty() => {
            let ckpt = load_checkpoint(Path::new(rest), None)?;
            let from = source.domain.domain;
            MetamorphicRelation::translator(ckpt.params, from, from.other())
        }
        _ => return Err(CliError::usage(format!("unknown transform {spec:?}"))),
    })
}

fn included_ids(m: &DatasetManifest) -> Vec<String> {
    m.included().map(|(_, e)| e.frame_id()).collect()
}

/// Checks that both manifests list the same included frames in the same order.
pub fn check_alignment(original: &DatasetManifest, transformed: &DatasetManifest) -> CliResult<()> {
    let (a, b) = (included_ids(original), included_ids(transformed));
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if x != y {
            return Err(CliError::data(format!(
                "manifests are misaligned at position {i}: original frame {x} vs transformed frame {y}"
            )));
        }
    }
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Greater => Err(CliError::data(format!("frame {} is missing from the transformed manifest", a[b.len()]))),
        std::cmp::Ordering::Less => Err(CliError::data(format!("frame {} is missing from the original manifest", b[a.len()]))),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

/// File-name-safe stem for the `index`-th model.
fn model_stem(index: usize, model_id: &str) -> String {
    let slug: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .take(40)
        .collect();
    format!("{}_{slug}", index + 1)
}

fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn run(args: Args, common: &Common) -> CliResult<()> {
    let s = common.settings("test", KEYS)?;
    let original_path = s.required_path(args.original, "original")?;
    let transformed_path = s.path(args.transformed, "transformed")?;
    let transform = s.value(args.transform, "transform")?;
    let bounds = match s.value(args.bounds, "bounds")? {
        Some(text) => parse_bounds(&text)?,
        None => ErrorBound::list(&DEFAULT_BOUNDS)?,
    };
    let with_flags = s.flag(args.flags, "flags")?;
    let grid = s.value(args.grid, "grid")?.map(|n| n.min(MAX_GRID_ROWS)).filter(|&n| n > 0);
    let specs = s
        .list(args.models, "model")
        .iter()
        .map(|m| m.parse::<ModelSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    if specs.is_empty() {
        return Err(CliError::usage("no --model given"));
    }
    let seed = common.seed(&s)?;

    let original = DatasetManifest::read(&original_path)?;
    let (transformed_manifest, relation) = match (transformed_path, transform) {
        (Some(p), None) => {
            let m = DatasetManifest::read(&p)?;
            check_alignment(&original, &m)?;
            (Some(m), None)
        }
        (None, Some(t)) => (None, Some(parse_transform(&t, &original)?)),
        (Some(_), Some(_)) => return Err(CliError::usage("--transformed and --transform are exclusive")),
        (None, None) => return Err(CliError::usage("missing --transformed (or --transform)")),
    };
    let scene = match s.value(args.scene, "scene")? {
        Some(scene) => scene,
        None => match (&transformed_manifest, &relation) {
            (Some(m), _) => m.domain.alias.clone(),
            (None, Some(r)) => r.name().to_string(),
            (None, None) => unreachable!("one source is required above"),
        },
    };
    let out = common.out_dir(&s)?;

    let stream = load_native(&original)?;
    if stream.is_empty() {
        return Err(CliError::data(format!("{} has no included frames", original_path.display())));
    }
    let moved: Vec<FrameRecord> = match (&transformed_manifest, &relation) {
        (Some(m), _) => load_stream_sized(m, stream[0].image.height(), stream[0].image.width())?,
        (None, Some(r)) => apply_relation(r, &stream)?,
        (None, None) => unreachable!("one source is required above"),
    };

    let predictions_dir = out.join("predictions");
    std::fs::create_dir_all(&predictions_dir)?;
    let mut reports = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let mut model = spec.build(seed)?;
        let id = model.model_id().to_string();
        info!("running {id} on {} frames of scene {scene}", stream.len());
        let before = run_model(model.as_mut(), &stream)?;
        let after = run_model(model.as_mut(), &moved)?;
        let stem = model_stem(k, &id);
        write_predictions(create(&predictions_dir.join(format!("{stem}_original.csv")))?, &before)?;
        write_predictions(create(&predictions_dir.join(format!("{stem}_transformed.csv")))?, &after)?;
        let pairs = pair_predictions(&before, &after)?;
        let report = InconsistencyReport::build(&id, &scene, &pairs, &bounds, with_flags)?;
        if let Some(flags) = &report.per_frame_flags {
            let dir = out.join("flags");
            std::fs::create_dir_all(&dir)?;
            write_flags(create(&dir.join(format!("{stem}.csv")))?, flags)?;
        }
        if let Some(rows) = grid {
            let dir = out.join("grids");
            std::fs::create_dir_all(&dir)?;
            let n = rows.min(stream.len());
            let picks: Vec<GridRow<'_>> = (0..n)
                .map(|i| i * stream.len() / n)
                .map(|j| GridRow {
                    original: &stream[j].image,
                    transformed: &moved[j].image,
                    angle_original: before[j].degrees,
                    angle_transformed: after[j].degrees,
                })
                .collect();
            render::grid(&picks).save_png(&dir.join(format!("{stem}.png")))?;
        }
        for row in &report.rows {
            println!("{id}\t{scene}\teps={}\t{}/{}", row.epsilon, row.count, row.total_frames);
        }
        reports.push(report);
    }
    write_reports(create(&out.join(REPORT_FILE))?, &reports)?;
    info!("wrote {}", out.join(REPORT_FILE).display());
    Ok(())
}
