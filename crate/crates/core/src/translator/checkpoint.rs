//! Single-file versioned checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! b"SMTRCKPT"  u32 version  u32 header_len  header (JSON)
//! per slot:            u64 n, n × f64 parameters
//! per slot (optional): u64 adam_step, u64 n, n × f64 m, n × f64 v
//! ```
//!
//! The JSON header carries the architecture, training config (and with it
//! the seed), completed step count and domain aliases.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Slot, TrainConfig, TranslatorError, TranslatorParams};
use crate::dataset::DomainTag;

const MAGIC: &[u8; 8] = b"SMTRCKPT";
const VERSION: u32 = 1;

/// Saved optimizer state of one slot: `(step, first moment, second moment)`.
pub type OptimizerState = (u64, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: TranslatorParams,
    pub config: TrainConfig,
    pub step: u64,
    pub domains: [DomainTag; 2],
    pub optimizers: Option<Vec<OptimizerState>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    config: TrainConfig,
    step: u64,
    domains: [DomainTag; 2],
    has_optimizer: bool,
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], TranslatorError> {
        if self.bytes.len() < n {
            return Err(TranslatorError::Checkpoint("truncated checkpoint".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, TranslatorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, TranslatorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, TranslatorError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| TranslatorError::Checkpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn vector(&mut self) -> Result<Vec<f64>, TranslatorError> {
        let n = self.u64()? as usize;
        self.f64s(n)
    }
}

impl Checkpoint {
    /// Parameters only, no optimizer state.
    pub fn of_params(params: TranslatorParams, config: TrainConfig, domains: [DomainTag; 2]) -> Self {
        Self {
            params,
            config,
            step: 0,
            domains,
            optimizers: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            architecture: self.params.architecture().clone(),
            config: self.config.clone(),
            step: self.step,
            domains: self.domains.clone(),
            has_optimizer: self.optimizers.is_some(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for slot in Slot::ALL {
            put_f64s(&mut out, self.params.net(slot).params());
        }
        if let Some(states) = &self.optimizers {
            for (step, m, v) in states {
                out.extend_from_slice(&step.to_le_bytes());
                put_f64s(&mut out, m);
                out.extend(v.iter().flat_map(|x| x.to_le_bytes()));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TranslatorError> {
        let mut r = Reader { bytes };
        if r.take(8)? != MAGIC {
            return Err(TranslatorError::Checkpoint("not a translator checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(TranslatorError::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| TranslatorError::Checkpoint(format!("bad header: {e}")))?;
        let mut params = TranslatorParams::zeros(header.architecture)?;
        for slot in Slot::ALL {
            let values = r.vector()?;
            params
                .net_mut(slot)
                .set_params(values)
                .map_err(|e| TranslatorError::Checkpoint(format!("{slot:?}: {e}")))?;
        }
        let optimizers = if header.has_optimizer {
            let mut states = Vec::with_capacity(8);
            for slot in Slot::ALL {
                let step = r.u64()?;
                let m = r.vector()?;
                let v = r.f64s(m.len())?;
                if m.len() != params.net(slot).param_count() {
                    return Err(TranslatorError::Checkpoint(format!("{slot:?}: optimizer state has wrong length")));
                }
                states.push((step, m, v));
            }
            Some(states)
        } else {
            None
        };
        if !r.bytes.is_empty() {
            return Err(TranslatorError::Checkpoint(format!("{} trailing bytes", r.bytes.len())));
        }
        Ok(Self {
            params,
            config: header.config,
            step: header.step,
            domains: header.domains,
            optimizers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TranslatorError> {
        // the previous checkpoint survives a failed write
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TranslatorError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks that the stored architecture equals `expected`.
    pub fn load_expecting(path: &Path, expected: &Architecture) -> Result<Self, TranslatorError> {
        let ckpt = Self::load(path)?;
        if ckpt.params.architecture() != expected {
            return Err(TranslatorError::ArchitectureMismatch {
                expected: expected.name.clone(),
                found: ckpt.params.architecture().name.clone(),
            });
        }
        Ok(ckpt)
    }
}
