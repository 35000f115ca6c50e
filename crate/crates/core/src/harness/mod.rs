//! Metamorphic relation, model runs and inconsistency counting.
//!
//! For a model `p`, an input transform `τ` and an output transform `f_O`
//! (identity for steering), frame `i` is inconsistent at bound `ε` when
//! `|f_O(p(i)) - p(τ(i))| > ε`.

mod report;
mod transforms;

use std::sync::Arc;

use thiserror::Error;

use crate::dataset::{Domain, FrameRecord};
use crate::models::{ModelError, SteeringModel};
use crate::raster::Image;
use crate::translator::TranslatorParams;

pub use report::{
    check_monotone, read_predictions, read_reports, write_flags, write_predictions, write_reports, FrameFlag, InconsistencyReport, MonotonicityViolation,
    ReportRow,
};
pub use transforms::{affine, blur, fog, gaussian_blur, rain, RainParams};

/// Bounds used when none are configured, in degrees.
pub const DEFAULT_BOUNDS: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("transform {relation} failed on frame {frame_id}: {message}")]
    Transform {
        relation: String,
        frame_id: String,
        message: String,
    },
    #[error("model {model_id} failed on frame {frame_id}: {source}")]
    Model {
        model_id: String,
        frame_id: String,
        #[source]
        source: Box<ModelError>,
    },
    #[error("model {model_id} returned non-finite angle {value} for frame {frame_id}")]
    NonFinite { model_id: String, frame_id: String, value: f64 },
    #[error("cannot pair predictions: {0}")]
    Pairing(String),
    #[error("invalid error bound {0}: must be positive and finite")]
    InvalidBound(f64),
    #[error("error bounds must be non-empty and strictly ascending, got {0:?}")]
    UnsortedBounds(Vec<f64>),
    #[error("invalid transform parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed {what} at line {line}: {message}")]
    Schema { what: String, line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type InputTransform = dyn Fn(&Image) -> Result<Image, String> + Send + Sync;
type OutputTransform = dyn Fn(f64) -> f64 + Send + Sync;

/// An input transform on images paired with the expected effect on outputs.
#[derive(Clone)]
pub struct MetamorphicRelation {
    name: String,
    input: Arc<InputTransform>,
    output: Arc<OutputTransform>,
    identity: bool,
}

impl std::fmt::Debug for MetamorphicRelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetamorphicRelation").field("name", &self.name).finish_non_exhaustive()
    }
}

impl MetamorphicRelation {
    /// `τ` with identity output transform.
    pub fn new(name: impl Into<String>, input: impl Fn(&Image) -> Result<Image, String> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            input: Arc::new(input),
            output: Arc::new(|v| v),
            identity: false,
        }
    }

    pub fn identity() -> Self {
        Self {
            identity: true,
            ..Self::new("identity", |im| Ok(im.clone()))
        }
    }

    /// Replaces the output transform `f_O`.
    pub fn with_output(mut self, output: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.output = Arc::new(output);
        self
    }

    /// `τ(x) = G_to(E_from(x))`. Frames are resized to the translator's
    /// resolution and the result resized back to the frame's size.
    pub fn translator(params: TranslatorParams, from: Domain, to: Domain) -> Self {
        let (h, w) = (params.architecture().height, params.architecture().width);
        Self::new(format!("translate:{from}->{to}"), move |im| {
            let t = params.translate(&im.resized(h, w), from, to).map_err(|e| e.to_string())?;
            Ok(t.image.resized(im.height(), im.width()).clamp01())
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn transform_input(&self, image: &Image) -> Result<Image, String> {
        (self.input)(image)
    }

    pub fn transform_output(&self, degrees: f64) -> f64 {
        (self.output)(degrees)
    }
}

/// Applies the input transform to every frame; ids and order are kept.
pub fn apply_relation(mr: &MetamorphicRelation, stream: &[FrameRecord]) -> Result<Vec<FrameRecord>, HarnessError> {
    if mr.identity {
        return Ok(stream.to_vec());
    }
    stream
        .iter()
        .map(|f| {
            let image = mr.transform_input(&f.image).map_err(|message| HarnessError::Transform {
                relation: mr.name.clone(),
                frame_id: f.frame_id.clone(),
                message,
            })?;
            Ok(FrameRecord {
                image,
                source_path: None,
                ..f.clone()
            })
        })
        .collect()
}

/// One model output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub frame_id: String,
    pub degrees: f64,
}

/// Resets the model, then predicts every frame in order.
pub fn run_model(model: &mut dyn SteeringModel, stream: &[FrameRecord]) -> Result<Vec<Prediction>, HarnessError> {
    let model_error = |model: &dyn SteeringModel, frame_id: &str, source: ModelError| HarnessError::Model {
        model_id: model.model_id().to_string(),
        frame_id: frame_id.to_string(),
        source: Box::new(source),
    };
    let first = stream.first().map_or("<start>", |f| f.frame_id.as_str());
    model.reset().map_err(|e| model_error(model, first, e))?;
    let mut out = Vec::with_capacity(stream.len());
    for f in stream {
        let degrees = model.predict(f).map_err(|e| model_error(model, &f.frame_id, e))?;
        if !degrees.is_finite() {
            return Err(HarnessError::NonFinite {
                model_id: model.model_id().to_string(),
                frame_id: f.frame_id.clone(),
                value: degrees,
            });
        }
        out.push(Prediction {
            frame_id: f.frame_id.clone(),
            degrees,
        });
    }
    Ok(out)
}

/// Predictions for the same frame on the original and the transformed stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionPair<'a> {
    pub frame_id: &'a str,
    pub angle_original: f64,
    pub angle_transformed: f64,
}

impl PredictionPair<'_> {
    pub fn deviation(&self) -> f64 {
        (self.angle_original - self.angle_transformed).abs()
    }
}

/// Pairs element-wise; lengths and ids must agree.
pub fn pair_predictions<'a>(original: &'a [Prediction], transformed: &'a [Prediction]) -> Result<Vec<PredictionPair<'a>>, HarnessError> {
    if original.len() != transformed.len() {
        return Err(HarnessError::Pairing(format!(
            "{} original vs {} transformed predictions",
            original.len(),
            transformed.len()
        )));
    }
    original
        .iter()
        .zip(transformed)
        .enumerate()
        .map(|(i, (a, b))| {
            if a.frame_id != b.frame_id {
                return Err(HarnessError::Pairing(format!("position {i}: frame {} vs {}", a.frame_id, b.frame_id)));
            }
            Ok(PredictionPair {
                frame_id: &a.frame_id,
                angle_original: a.degrees,
                angle_transformed: b.degrees,
            })
        })
        .collect()
}

/// Runs the model on the original and the transformed stream. The first
/// list holds `f_O(p(i))`, the second `p(τ(i))`.
pub fn relation_predictions(
    model: &mut dyn SteeringModel,
    mr: &MetamorphicRelation,
    stream: &[FrameRecord],
) -> Result<(Vec<Prediction>, Vec<Prediction>), HarnessError> {
    let transformed = apply_relation(mr, stream)?;
    let mut original = run_model(model, stream)?;
    for p in &mut original {
        p.degrees = mr.transform_output(p.degrees);
    }
    let moved = run_model(model, &transformed)?;
    Ok((original, moved))
}

/// Tolerated steering deviation in degrees; positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ErrorBound(f64);

impl ErrorBound {
    pub fn new(epsilon: f64) -> Result<Self, HarnessError> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Self(epsilon))
        } else {
            Err(HarnessError::InvalidBound(epsilon))
        }
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn defaults() -> Vec<ErrorBound> {
        DEFAULT_BOUNDS.iter().map(|&e| ErrorBound(e)).collect()
    }

    /// Validates a strictly ascending list.
    pub fn list(values: &[f64]) -> Result<Vec<ErrorBound>, HarnessError> {
        let bounds = values.iter().map(|&v| ErrorBound::new(v)).collect::<Result<Vec<_>, _>>()?;
        ensure_ascending(&bounds)?;
        Ok(bounds)
    }

    pub fn violated_by(self, pair: &PredictionPair<'_>) -> bool {
        pair.deviation() > self.0
    }
}

fn ensure_ascending(bounds: &[ErrorBound]) -> Result<(), HarnessError> {
    if bounds.is_empty() || bounds.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(HarnessError::UnsortedBounds(bounds.iter().map(|b| b.0).collect()));
    }
    Ok(())
}

/// Number of pairs whose deviation is strictly greater than the bound.
pub fn inconsistency_count(pairs: &[PredictionPair<'_>], bound: ErrorBound) -> usize {
    pairs.iter().filter(|p| bound.violated_by(p)).count()
}

/// One row per bound; bounds must be strictly ascending.
pub fn sweep_bounds(pairs: &[PredictionPair<'_>], bounds: &[ErrorBound]) -> Result<Vec<ReportRow>, HarnessError> {
    ensure_ascending(bounds)?;
    Ok(bounds
        .iter()
        .map(|&b| ReportRow {
            epsilon: b.degrees(),
            count: inconsistency_count(pairs, b),
            total_frames: pairs.len(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BrightnessModel, ConstantModel};

    fn preds(values: &[(&str, f64)]) -> Vec<Prediction> {
        values
            .iter()
            .map(|&(id, d)| Prediction {
                frame_id: id.into(),
                degrees: d,
            })
            .collect()
    }

    fn stream(n: usize) -> Vec<FrameRecord> {
        (0..n)
            .map(|i| FrameRecord::in_memory(format!("f{i}"), i, Image::filled(4, 4, 3, (i % 10) as f32 / 10.0)))
            .collect()
    }

    #[test]
    fn strict_inequality_at_the_bound() {
        let (a, b) = (preds(&[("x", 10.0), ("y", 0.0), ("z", -5.0)]), preds(&[("x", 25.0), ("y", 2.0), ("z", -5.0)]));
        let pairs = pair_predictions(&a, &b).unwrap();
        assert_eq!(inconsistency_count(&pairs, ErrorBound::new(10.0).unwrap()), 1);
        let (c, d) = (preds(&[("x", 10.0)]), preds(&[("x", 20.0)]));
        assert_eq!(inconsistency_count(&pair_predictions(&c, &d).unwrap(), ErrorBound::new(10.0).unwrap()), 0);
    }

    #[test]
    fn pairing_contract() {
        let a = preds(&[("a", 10.0)]);
        let b = preds(&[("a", 25.0)]);
        let pairs = pair_predictions(&a, &b).unwrap();
        assert_eq!(
            pairs,
            vec![PredictionPair {
                frame_id: "a",
                angle_original: 10.0,
                angle_transformed: 25.0
            }]
        );
        assert!(pair_predictions(&a, &preds(&[("b", 25.0)])).is_err());
        assert!(pair_predictions(&a, &[]).is_err());
        assert!(pair_predictions(&[], &[]).unwrap().is_empty());
    }

    #[test]
    fn bounds_are_validated() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(ErrorBound::new(bad).is_err());
        }
        assert!(ErrorBound::list(&[20.0, 10.0]).is_err());
        assert!(ErrorBound::list(&[10.0, 10.0]).is_err());
        assert!(ErrorBound::list(&[]).is_err());
        assert_eq!(ErrorBound::list(&DEFAULT_BOUNDS).unwrap(), ErrorBound::defaults());
        assert!(matches!(sweep_bounds(&[], &[]), Err(HarnessError::UnsortedBounds(_))));
    }

    #[test]
    fn identity_relation_leaves_stream_untouched() {
        let s = stream(5);
        assert_eq!(apply_relation(&MetamorphicRelation::identity(), &s).unwrap(), s);
    }

    #[test]
    fn constant_transform_and_failure_naming() {
        let s = stream(4);
        let mr = MetamorphicRelation::new("gray", |im| Ok(Image::filled(im.height(), im.width(), 3, 0.25)));
        let out = apply_relation(&mr, &s).unwrap();
        assert!(out.iter().all(|f| f.image.data().iter().all(|&v| v == 0.25)));
        assert_eq!(out.iter().map(|f| &f.frame_id).collect::<Vec<_>>(), s.iter().map(|f| &f.frame_id).collect::<Vec<_>>());
        let failing = MetamorphicRelation::new("boom", |im| if im.mean() > 0.15 { Err("too bright".into()) } else { Ok(im.clone()) });
        match apply_relation(&failing, &s) {
            Err(HarnessError::Transform { frame_id, .. }) => assert_eq!(frame_id, "f2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_model_orders_and_resets() {
        let s = stream(10);
        let mut m = ConstantModel::new(0.0).unwrap();
        let p = run_model(&mut m, &s).unwrap();
        assert_eq!(p.len(), 10);
        assert!(p.iter().all(|x| x.degrees == 0.0));
        let mut b = BrightnessModel::new(7.0).unwrap();
        assert_eq!(run_model(&mut b, &s).unwrap(), run_model(&mut b, &s).unwrap());
    }

    #[test]
    fn output_transform_is_applied_to_originals() {
        let s = stream(3);
        let mut m = ConstantModel::new(4.0).unwrap();
        let mr = MetamorphicRelation::identity().with_output(|d| -d);
        let (orig, moved) = relation_predictions(&mut m, &mr, &s).unwrap();
        assert!(orig.iter().all(|p| p.degrees == -4.0));
        assert!(moved.iter().all(|p| p.degrees == 4.0));
    }
}
