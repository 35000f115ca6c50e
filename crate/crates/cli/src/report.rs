use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;
use scenemorph_core::harness::{check_monotone, read_reports, InconsistencyReport};

use crate::error::{CliError, CliResult, Context};
use crate::render::counts_plot;
use crate::Common;

const KEYS: &[&str] = &["input"];

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Report CSV written by `test`; repeat to merge several.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
}

/// Cells of the merged table: one row per (scene, model), one column per bound.
pub struct Table {
    pub bounds: Vec<f64>,
    /// `(scene, model, total_frames, counts)` with `None` for missing bounds.
    pub rows: Vec<(String, String, usize, Vec<Option<usize>>)>,
}

impl Table {
    pub fn build(reports: &[InconsistencyReport]) -> Self {
        let mut bounds: Vec<f64> = reports.iter().flat_map(|r| r.rows.iter().map(|row| row.epsilon)).collect();
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        let mut scenes: Vec<&str> = Vec::new();
        for r in reports {
            if !scenes.contains(&r.scene_id.as_str()) {
                scenes.push(&r.scene_id);
            }
        }
        let mut rows = Vec::new();
        for scene in scenes {
            for r in reports.iter().filter(|r| r.scene_id == scene) {
                let counts = bounds.iter().map(|b| r.rows.iter().find(|row| row.epsilon == *b).map(|row| row.count)).collect();
                let total = r.rows.first().map_or(0, |row| row.total_frames);
                rows.push((r.scene_id.clone(), r.model_id.clone(), total, counts));
            }
        }
        Self { bounds, rows }
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(|r| r.3.iter().flatten().count()).sum()
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["scene_id".to_string(), "model_id".to_string(), "total_frames".to_string()];
        header.extend(self.bounds.iter().map(|b| format!("eps_{b}")));
        w.write_record(&header).map_err(CliError::runtime)?;
        for (scene, model, total, counts) in &self.rows {
            let mut record = vec![scene.clone(), model.clone(), total.to_string()];
            record.extend(counts.iter().map(|c| c.map_or_else(String::new, |c| c.to_string())));
            w.write_record(&record).map_err(CliError::runtime)?;
        }
        w.into_inner().map_err(CliError::runtime)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::from("| scene | model | frames |");
        for b in &self.bounds {
            let _ = write!(md, " {b}° |");
        }
        md.push_str("\n|---|---|---:|");
        md.push_str(&"---:|".repeat(self.bounds.len()));
        md.push('\n');
        for (scene, model, total, counts) in &self.rows {
            let _ = write!(md, "| {scene} | {model} | {total} |");
            for c in counts {
                let _ = write!(md, " {} |", c.map_or_else(|| "-".to_string(), |c| c.to_string()));
            }
            md.push('\n');
        }
        md
    }
}

/// File-name-safe version of a scene id.
fn slug(text: &str) -> String {
    text.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn run(args: Args, common: &Common) -> CliResult<()> {
    let s = common.settings("report", KEYS)?;
    let inputs = s.path_list(args.inputs, "input");
    if inputs.is_empty() {
        return Err(CliError::usage("no --input report given"));
    }
    let mut reports: Vec<InconsistencyReport> = Vec::new();
    for path in &inputs {
        let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        for r in read_reports(file).context(format!("report {}", path.display()))? {
            if reports.iter().any(|o| o.model_id == r.model_id && o.scene_id == r.scene_id) {
                return Err(CliError::data(format!(
                    "model {} on scene {} appears in more than one input ({})",
                    r.model_id,
                    r.scene_id,
                    path.display()
                )));
            }
            reports.push(r);
        }
    }
    let out = common.out_dir(&s)?;
    let table = Table::build(&reports);
    std::fs::write(out.join("table.csv"), table.to_csv()?)?;
    let markdown = table.to_markdown();
    std::fs::write(out.join("table.md"), &markdown)?;
    print!("{markdown}");

    let plots = out.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut scenes: Vec<&str> = table.rows.iter().map(|r| r.0.as_str()).collect();
    scenes.dedup();
    for scene in scenes {
        let series: Vec<(String, Vec<(f64, usize)>)> = reports
            .iter()
            .filter(|r| r.scene_id == scene)
            .map(|r| {
                let mut pts: Vec<(f64, usize)> = r.rows.iter().map(|row| (row.epsilon, row.count)).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                (r.model_id.clone(), pts)
            })
            .collect();
        std::fs::write(plots.join(format!("{}.svg", slug(scene))), counts_plot(scene, &series))?;
    }
    info!("merged {} reports into {} table cells", reports.len(), table.cell_count());

    let violations = check_monotone(&reports);
    if !violations.is_empty() {
        let mut text = String::from("model_id,scene_id,lower_epsilon,lower_count,higher_epsilon,higher_count\n");
        for v in &violations {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                v.model_id, v.scene_id, v.lower.epsilon, v.lower.count, v.higher.epsilon, v.higher.count
            );
        }
        std::fs::write(out.join("violations.csv"), &text)?;
        let first = &violations[0];
        return Err(CliError::data(format!(
            "{} monotonicity violation(s), first: {} on {} has {} at {}° but {} at {}°",
            violations.len(),
            first.model_id,
            first.scene_id,
            first.lower.count,
            first.lower.epsilon,
            first.higher.count,
            first.higher.epsilon
        )));
    }
    Ok(())
}
