use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{normalize_frame_to, DatasetError, Domain, DomainTag, FrameRecord, FRAME_HEIGHT, FRAME_WIDTH};
use crate::raster::Image;

/// One manifest line: frame file, optional steering label, include flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub steering_degrees: Option<f64>,
    pub include: bool,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>, steering_degrees: Option<f64>) -> Self {
        Self {
            path: path.into(),
            steering_degrees,
            include: true,
        }
    }

    /// File stem of the frame path.
    pub fn frame_id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.to_string_lossy().into_owned())
    }
}

/// Ordered frame list for one dataset in one domain.
///
/// Text form (UTF-8, tab separated):
///
/// ```text
/// #dataset_id=<id>\t#domain=<S1|S2>\t#alias=<text>
/// #provenance=<text>                      (optional)
/// <relative_path>\t<steering_degrees|NA>\t<0|1>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub domain: DomainTag,
    pub entries: Vec<ManifestEntry>,
    pub provenance: String,
    /// Directory relative entry paths resolve against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(dataset_id: impl Into<String>, domain: DomainTag, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            domain,
            entries: Vec::new(),
            provenance: String::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn included(&self) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries.iter().enumerate().filter(|(_, e)| e.include)
    }

    pub fn included_count(&self) -> usize {
        self.entries.iter().filter(|e| e.include).count()
    }

    pub fn frame_ids(&self) -> Vec<String> {
        self.entries.iter().map(ManifestEntry::frame_id).collect()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#dataset_id={}\t#domain={}\t#alias={}\n",
            self.dataset_id, self.domain.domain, self.domain.alias
        );
        if !self.provenance.is_empty() {
            let _ = writeln!(out, "#provenance={}", self.provenance.replace('\n', " "));
        }
        for e in &self.entries {
            let steering = e.steering_degrees.map_or_else(|| "NA".to_string(), |d| d.to_string());
            let _ = writeln!(out, "{}\t{}\t{}", path_text(&e.path), steering, u8::from(e.include));
        }
        out
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let err = |line: usize, message: String| DatasetError::ManifestParse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;

        let mut dataset_id = None;
        let mut domain = None;
        let mut alias = String::new();
        for field in header.split('\t') {
            match field.split_once('=') {
                Some(("#dataset_id", v)) => dataset_id = Some(v.to_string()),
                Some(("#domain", v)) => domain = Some(v.parse::<Domain>().map_err(|e| err(1, e.to_string()))?),
                Some(("#alias", v)) => alias = v.to_string(),
                _ => return Err(err(1, format!("unexpected header field {field:?}"))),
            }
        }
        let mut manifest = DatasetManifest::new(
            dataset_id.ok_or_else(|| err(1, "missing #dataset_id".into()))?,
            DomainTag::new(domain.ok_or_else(|| err(1, "missing #domain".into()))?, alias),
            base_dir,
        );

        let mut seen = HashSet::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(p) = rest.strip_prefix("provenance=") {
                    manifest.provenance = p.to_string();
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [path, steering, include] = cols.as_slice() else {
                return Err(err(n, format!("expected 3 tab-separated fields, got {}", cols.len())));
            };
            let steering_degrees = match *steering {
                "NA" => None,
                s => Some(
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(n, format!("bad steering value {s:?}")))?,
                ),
            };
            let include = match *include {
                "1" => true,
                "0" => false,
                other => return Err(err(n, format!("include flag must be 0 or 1, got {other:?}"))),
            };
            let entry = ManifestEntry {
                path: PathBuf::from(path),
                steering_degrees,
                include,
            };
            if !seen.insert(entry.frame_id()) {
                return Err(err(n, format!("duplicate frame id {:?}", entry.frame_id())));
            }
            manifest.entries.push(entry);
        }
        Ok(manifest)
    }

    /// Reads a manifest file; entry paths resolve against its directory.
    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Ingestion {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn path_text(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Result of [`filter_frames`]: the filtered copy and any ids that were not
/// in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub manifest: DatasetManifest,
    pub unknown_ids: Vec<String>,
}

/// Marks every entry whose frame id is in `exclusions` as excluded.
pub fn filter_frames<S: AsRef<str>>(manifest: &DatasetManifest, exclusions: &[S]) -> FilterOutcome {
    let wanted: BTreeSet<&str> = exclusions.iter().map(AsRef::as_ref).collect();
    let mut out = manifest.clone();
    let mut matched = HashSet::new();
    for entry in &mut out.entries {
        let id = entry.frame_id();
        if wanted.contains(id.as_str()) {
            entry.include = false;
            matched.insert(id);
        }
    }
    let unknown_ids = wanted
        .into_iter()
        .filter(|id| !matched.contains(*id))
        .map(str::to_string)
        .collect();
    FilterOutcome {
        manifest: out,
        unknown_ids,
    }
}

/// Excludes entries for which `keep` returns false, e.g. a wiper detector.
pub fn filter_frames_with(manifest: &DatasetManifest, mut keep: impl FnMut(&ManifestEntry) -> bool) -> DatasetManifest {
    let mut out = manifest.clone();
    for entry in &mut out.entries {
        if entry.include && !keep(entry) {
            entry.include = false;
        }
    }
    out
}

/// Loads every included frame at the canonical 240×320.
pub fn load_stream(manifest: &DatasetManifest) -> Result<Vec<FrameRecord>, DatasetError> {
    load_stream_sized(manifest, FRAME_HEIGHT, FRAME_WIDTH)
}

/// Loads every included frame in manifest order, normalized to `height`×`width`.
/// `sequence_index` is the entry's position in the manifest.
pub fn load_stream_sized(manifest: &DatasetManifest, height: usize, width: usize) -> Result<Vec<FrameRecord>, DatasetError> {
    manifest
        .included()
        .map(|(index, entry)| {
            let path = manifest.resolve(entry);
            let frame_id = entry.frame_id();
            let raw = Image::load(&path).map_err(|source| DatasetError::MissingFrame {
                frame_id: frame_id.clone(),
                path: path.display().to_string(),
                source,
            })?;
            let image = normalize_frame_to(&raw, height, width)?;
            let path_still_matches = raw.height() == height && raw.width() == width;
            Ok(FrameRecord {
                frame_id,
                source_id: manifest.dataset_id.clone(),
                image,
                steering_label: entry.steering_degrees,
                sequence_index: index,
                source_path: path_still_matches.then(|| std::path::absolute(&path).unwrap_or(path)),
            })
        })
        .collect()
}
