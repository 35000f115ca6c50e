use std::fmt;

use scenemorph_core::dataset::DatasetError;
use scenemorph_core::harness::HarnessError;
use scenemorph_core::models::ModelError;
use scenemorph_core::raster::RasterError;
use scenemorph_core::translator::TranslatorError;

/// Failure class, mapped one-to-one onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Runtime,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Runtime => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self { kind, error: error.into() }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self::new(Kind::Usage, anyhow::anyhow!("{message}"))
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Self::new(Kind::Data, anyhow::anyhow!("{message}"))
    }

    pub fn runtime(message: impl fmt::Display) -> Self {
        Self::new(Kind::Runtime, anyhow::anyhow!("{message}"))
    }

    pub fn context(self, message: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Attaches a message to a fallible call while keeping its error class.
pub trait Context<T> {
    fn context(self, message: impl fmt::Display + Send + Sync + 'static) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, message: impl fmt::Display + Send + Sync + 'static) -> CliResult<T> {
        self.map_err(|e| e.into().context(message))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Kind::Runtime, e)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let kind = match e {
            DatasetError::InvalidStride => Kind::Usage,
            DatasetError::Io(_) => Kind::Runtime,
            _ => Kind::Data,
        };
        Self::new(kind, e)
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        Self::new(Kind::Runtime, e)
    }
}

impl From<TranslatorError> for CliError {
    fn from(e: TranslatorError) -> Self {
        let kind = match e {
            TranslatorError::Config(_) | TranslatorError::InvalidParams(_) => Kind::Usage,
            TranslatorError::Dataset(_)
            | TranslatorError::Checkpoint(_)
            | TranslatorError::ArchitectureMismatch { .. }
            | TranslatorError::EmptyCorpus(_)
            | TranslatorError::Dimension { .. } => Kind::Data,
            _ => Kind::Runtime,
        };
        Self::new(kind, e)
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let kind = match e {
            HarnessError::InvalidBound(_) | HarnessError::UnsortedBounds(_) | HarnessError::InvalidParameters(_) => Kind::Usage,
            HarnessError::Pairing(_) | HarnessError::Schema { .. } | HarnessError::Csv(_) => Kind::Data,
            _ => Kind::Runtime,
        };
        Self::new(kind, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::Config(_) => Kind::Usage,
            ModelError::Unlabeled { .. } | ModelError::EmptyTrainingSet | ModelError::Dataset(_) => Kind::Data,
            _ => Kind::Runtime,
        };
        Self::new(kind, e)
    }
}
