//! Driving-frame ingestion: extraction, normalization, manifests and streams.

mod frames;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Image, RasterError};

pub use frames::{extract_frames, kept_frame_count, normalize_frame, normalize_frame_to, parse_duration, stride_for_budget, RawFrame};
pub use manifest::{filter_frames, filter_frames_with, load_stream, load_stream_sized, DatasetManifest, FilterOutcome, ManifestEntry};

/// Canonical frame height after normalization.
pub const FRAME_HEIGHT: usize = 240;
/// Canonical frame width after normalization.
pub const FRAME_WIDTH: usize = 320;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot ingest {path}: {reason}")]
    Ingestion { path: String, reason: String },
    #[error("no decodable frames in {0}")]
    EmptyInput(String),
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("expected a 3-channel image, got {0} channels")]
    Format(usize),
    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("frame {frame_id} ({path}): {source}")]
    MissingFrame {
        frame_id: String,
        path: String,
        #[source]
        source: RasterError,
    },
    #[error("unknown domain {0:?} (expected S1 or S2)")]
    UnknownDomain(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// One of the two visual domains of a translation job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    S1,
    S2,
}

impl Domain {
    pub fn index(self) -> usize {
        match self {
            Domain::S1 => 0,
            Domain::S2 => 1,
        }
    }

    pub fn other(self) -> Domain {
        match self {
            Domain::S1 => Domain::S2,
            Domain::S2 => Domain::S1,
        }
    }

    pub const BOTH: [Domain; 2] = [Domain::S1, Domain::S2];
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::S1 => "S1",
            Domain::S2 => "S2",
        })
    }
}

impl FromStr for Domain {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "S1" | "s1" => Ok(Domain::S1),
            "S2" | "s2" => Ok(Domain::S2),
            other => Err(DatasetError::UnknownDomain(other.to_string())),
        }
    }
}

/// A domain with its human-readable alias, e.g. `S2 = "snowy"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTag {
    pub domain: Domain,
    pub alias: String,
}

impl DomainTag {
    pub fn new(domain: Domain, alias: impl Into<String>) -> Self {
        Self {
            domain,
            alias: alias.into(),
        }
    }
}

/// A normalized driving frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: String,
    pub source_id: String,
    pub image: Image,
    /// Degrees; positive and negative sign follow the source labels.
    pub steering_label: Option<f64>,
    pub sequence_index: usize,
    /// File the image was decoded from, if it still matches `image`.
    pub source_path: Option<PathBuf>,
}

impl FrameRecord {
    pub fn in_memory(frame_id: impl Into<String>, sequence_index: usize, image: Image) -> Self {
        Self {
            frame_id: frame_id.into(),
            source_id: "memory".into(),
            image,
            steering_label: None,
            sequence_index,
            source_path: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_parsing_and_other() {
        assert_eq!("S2".parse::<Domain>().unwrap(), Domain::S2);
        assert!("S3".parse::<Domain>().is_err());
        assert_eq!(Domain::S1.other(), Domain::S2);
        assert_eq!(Domain::S2.to_string(), "S2");
    }
}
