//! Steering-model adapters driven by the harness.
//!
//! Angles are degrees throughout.

mod cnn;
mod external;

use std::collections::VecDeque;
use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::{DatasetError, FrameRecord};

pub use cnn::{train_toy_cnn, CnnConfig, CnnTraining, ToyCnnModel};
pub use external::ExternalModel;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("frame {frame_id} has no steering label")]
    Unlabeled { frame_id: String },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("external model {command:?} failed: {message}; stderr: {stderr}")]
    Process { command: String, message: String, stderr: String },
    #[error("external model {command:?} sent malformed line {line:?}; stderr: {stderr}")]
    Protocol { command: String, line: String, stderr: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contract between the harness and a steering model.
///
/// Frames arrive in stream order. `predict` must be deterministic given the
/// frames seen since the last `reset`.
pub trait SteeringModel {
    fn model_id(&self) -> &str;

    /// Number of frames one prediction looks at; 1 for stateless models.
    fn window_size(&self) -> usize {
        1
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError>;

    fn reset(&mut self) -> Result<(), ModelError>;
}

impl<M: SteeringModel + ?Sized> SteeringModel for Box<M> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn window_size(&self) -> usize {
        (**self).window_size()
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError> {
        (**self).predict(frame)
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        (**self).reset()
    }
}

fn finite(name: &str, v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::Config(format!("{name} must be finite, got {v}")))
    }
}

/// Always predicts the same angle.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    id: String,
    angle: f64,
}

impl ConstantModel {
    pub fn new(angle: f64) -> Result<Self, ModelError> {
        Ok(Self {
            id: format!("constant:{angle}"),
            angle: finite("angle", angle)?,
        })
    }
}

impl SteeringModel for ConstantModel {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict(&mut self, _frame: &FrameRecord) -> Result<f64, ModelError> {
        Ok(self.angle)
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        Ok(())
    }
}

/// Predicts `gain * (mean pixel value - 0.5)`.
#[derive(Debug, Clone)]
pub struct BrightnessModel {
    id: String,
    gain: f64,
}

impl BrightnessModel {
    pub fn new(gain: f64) -> Result<Self, ModelError> {
        Ok(Self {
            id: format!("brightness:{gain}"),
            gain: finite("gain", gain)?,
        })
    }
}

impl SteeringModel for BrightnessModel {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError> {
        Ok(self.gain * (frame.image.mean() - 0.5))
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        Ok(())
    }
}

/// Combines the inner predictions inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
    /// Prediction for the newest frame only.
    Last,
}

impl std::str::FromStr for Aggregator {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "median" => Ok(Aggregator::Median),
            "last" => Ok(Aggregator::Last),
            other => Err(ModelError::Config(format!("unknown aggregator {other:?}"))),
        }
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregator::Mean => "mean",
            Aggregator::Median => "median",
            Aggregator::Last => "last",
        })
    }
}

impl Aggregator {
    fn apply(self, values: &VecDeque<f64>) -> f64 {
        match self {
            Aggregator::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregator::Median => {
                let mut v: Vec<f64> = values.iter().copied().collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
            Aggregator::Last => *values.back().expect("window is never empty"),
        }
    }
}

/// Wraps a stateless model into a `W`-frame window.
///
/// Until `W` frames have been seen the window is left-padded with the first
/// frame, so every frame gets a prediction.
pub struct WindowedModel<M> {
    id: String,
    inner: M,
    window: usize,
    aggregator: Aggregator,
    history: VecDeque<f64>,
}

impl<M: SteeringModel> WindowedModel<M> {
    pub fn new(inner: M, window: usize, aggregator: Aggregator) -> Result<Self, ModelError> {
        if window == 0 {
            return Err(ModelError::Config("window size must be at least 1".into()));
        }
        Ok(Self {
            id: format!("windowed:{window}:{aggregator}:{}", inner.model_id()),
            inner,
            window,
            aggregator,
            history: VecDeque::with_capacity(window),
        })
    }
}

impl<M: SteeringModel> SteeringModel for WindowedModel<M> {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn window_size(&self) -> usize {
        self.window
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError> {
        let p = self.inner.predict(frame)?;
        if self.history.is_empty() {
            self.history.extend(std::iter::repeat_n(p, self.window - 1));
        } else if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(p);
        Ok(self.aggregator.apply(&self.history))
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        self.history.clear();
        self.inner.reset()
    }
}

/// Parsed model specification, e.g. `brightness:100` or `windowed:100:mean:constant:0`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Constant(f64),
    Brightness(f64),
    Windowed {
        window: usize,
        aggregator: Aggregator,
        inner: Box<ModelSpec>,
    },
    /// Shell command speaking the line protocol.
    External(String),
    /// Toy CNN trained on a labeled manifest.
    Cnn(PathBuf),
}

impl std::str::FromStr for ModelSpec {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::Config(format!("cannot parse model spec {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let number = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match kind {
            "constant" => Ok(ModelSpec::Constant(number(rest)?)),
            "brightness" => Ok(ModelSpec::Brightness(number(rest)?)),
            "external" if !rest.trim().is_empty() => Ok(ModelSpec::External(rest.to_string())),
            "cnn" if !rest.is_empty() => Ok(ModelSpec::Cnn(PathBuf::from(rest))),
            "windowed" => {
                let (w, rest) = rest.split_once(':').ok_or_else(bad)?;
                let window = w.parse::<usize>().map_err(|_| bad())?;
                // optional aggregator before the inner spec
                let (aggregator, inner) = match rest.split_once(':') {
                    Some((a, inner)) if a.parse::<Aggregator>().is_ok() => (a.parse()?, inner),
                    _ => (Aggregator::Mean, rest),
                };
                Ok(ModelSpec::Windowed {
                    window,
                    aggregator,
                    inner: Box::new(inner.parse()?),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl ModelSpec {
    /// Builds the adapter. `seed` is used by models that train.
    pub fn build(&self, seed: u64) -> Result<Box<dyn SteeringModel>, ModelError> {
        Ok(match self {
            ModelSpec::Constant(a) => Box::new(ConstantModel::new(*a)?),
            ModelSpec::Brightness(g) => Box::new(BrightnessModel::new(*g)?),
            ModelSpec::Windowed { window, aggregator, inner } => Box::new(WindowedModel::new(inner.build(seed)?, *window, *aggregator)?),
            ModelSpec::External(cmd) => Box::new(ExternalModel::new(cmd)?),
            ModelSpec::Cnn(path) => {
                let manifest = crate::dataset::DatasetManifest::read(path)?;
                let config = CnnConfig {
                    seed,
                    ..CnnConfig::default()
                };
                Box::new(train_toy_cnn(&crate::dataset::load_stream_sized(&manifest, config.height, config.width)?, &config)?.model.with_id(format!("cnn:{}", path.display())))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Image;

    fn frame(v: f32) -> FrameRecord {
        FrameRecord::in_memory("f", 0, Image::filled(4, 4, 3, v))
    }

    /// Replays a fixed list of angles.
    struct Script(Vec<f64>, usize);

    impl SteeringModel for Script {
        fn model_id(&self) -> &str {
            "script"
        }
        fn predict(&mut self, _: &FrameRecord) -> Result<f64, ModelError> {
            self.1 += 1;
            Ok(self.0[self.1 - 1])
        }
        fn reset(&mut self) -> Result<(), ModelError> {
            self.1 = 0;
            Ok(())
        }
    }

    #[test]
    fn brightness_closed_form() {
        let mut m = BrightnessModel::new(100.0).unwrap();
        assert_eq!(m.predict(&frame(0.5)).unwrap(), 0.0);
        assert!((m.predict(&frame(0.7)).unwrap() - 20.0).abs() < 1e-5);
        assert!(BrightnessModel::new(f64::NAN).is_err());
    }

    #[test]
    fn window_mean_at_third_frame() {
        let mut m = WindowedModel::new(Script(vec![0.0, 30.0, 30.0], 0), 3, Aggregator::Mean).unwrap();
        let out: Vec<f64> = (0..3).map(|_| m.predict(&frame(0.0)).unwrap()).collect();
        assert_eq!(out[2], 20.0);
        // warm-up pads with the first prediction: (0,0,30)
        assert_eq!(out[1], 10.0);
        assert_eq!(m.window_size(), 3);
    }

    #[test]
    fn median_and_last() {
        let seq = vec![5.0, -1.0, 9.0, 2.0];
        let run = |agg| {
            let mut m = WindowedModel::new(Script(seq.clone(), 0), 3, agg).unwrap();
            (0..4).map(|_| m.predict(&frame(0.0)).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(Aggregator::Last), seq);
        assert_eq!(run(Aggregator::Median), vec![5.0, 5.0, 5.0, 2.0]);
    }

    #[test]
    fn reset_replays_identically() {
        let mut m = WindowedModel::new(Script(vec![1.0, 4.0, 7.0, 1.0, 4.0, 7.0], 0), 2, Aggregator::Mean).unwrap();
        let a: Vec<f64> = (0..3).map(|_| m.predict(&frame(0.0)).unwrap()).collect();
        m.reset().unwrap();
        let b: Vec<f64> = (0..3).map(|_| m.predict(&frame(0.0)).unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_window_is_rejected() {
        assert!(WindowedModel::new(ConstantModel::new(0.0).unwrap(), 0, Aggregator::Mean).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("constant:-3.5".parse::<ModelSpec>().unwrap(), ModelSpec::Constant(-3.5));
        assert_eq!(
            "windowed:100:brightness:2".parse::<ModelSpec>().unwrap(),
            ModelSpec::Windowed {
                window: 100,
                aggregator: Aggregator::Mean,
                inner: Box::new(ModelSpec::Brightness(2.0))
            }
        );
        assert_eq!(
            "windowed:5:median:constant:1".parse::<ModelSpec>().unwrap(),
            ModelSpec::Windowed {
                window: 5,
                aggregator: Aggregator::Median,
                inner: Box::new(ModelSpec::Constant(1.0))
            }
        );
        assert_eq!("external:python3 m.py --x".parse::<ModelSpec>().unwrap(), ModelSpec::External("python3 m.py --x".into()));
        for bad in ["constant", "constant:abc", "windowed:x:constant:1", "nope:1", "external:"] {
            assert!(bad.parse::<ModelSpec>().is_err(), "{bad}");
        }
    }
}
