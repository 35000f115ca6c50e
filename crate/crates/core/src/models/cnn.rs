use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelError, SteeringModel};
use crate::dataset::FrameRecord;
use crate::nn::{Adam, LayerSpec, Network, Tensor};
use crate::raster::Image;

/// Training setup of the toy steering regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    /// Frames are resized to this resolution (both multiples of 4).
    pub height: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Network outputs are multiplied by this to give degrees.
    pub degrees_scale: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            height: 24,
            width: 32,
            epochs: 40,
            batch_size: 8,
            learning_rate: 1e-3,
            degrees_scale: 25.0,
            seed: 0,
        }
    }
}

const LRELU: LayerSpec = LayerSpec::LeakyRelu { slope: 0.1 };

fn layers(height: usize, width: usize) -> Vec<LayerSpec> {
    let conv = |i, o| LayerSpec::Conv2d {
        in_channels: i,
        out_channels: o,
        kernel: 4,
        stride: 2,
        padding: 1,
    };
    vec![
        conv(3, 8),
        LRELU,
        conv(8, 16),
        LRELU,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_features: 16 * (height / 4) * (width / 4),
            out_features: 1,
        },
    ]
}

/// Small convolutional image-to-angle regressor. Stateless.
#[derive(Debug, Clone)]
pub struct ToyCnnModel {
    id: String,
    net: Network,
    height: usize,
    width: usize,
    degrees_scale: f64,
}

impl ToyCnnModel {
    fn input(&self, image: &Image) -> Tensor {
        input_tensor(image, self.height, self.width)
    }

    pub fn predict_image(&self, image: &Image) -> f64 {
        let out = self.net.forward(&self.input(image)).expect("input shape is fixed");
        out.data()[0] * self.degrees_scale
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

fn input_tensor(image: &Image, height: usize, width: usize) -> Tensor {
    Tensor::from_image(&image.resized(height, width))
}

impl SteeringModel for ToyCnnModel {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict(&mut self, frame: &FrameRecord) -> Result<f64, ModelError> {
        Ok(self.predict_image(&frame.image))
    }

    fn reset(&mut self) -> Result<(), ModelError> {
        Ok(())
    }
}

/// A trained model and its mean squared error (normalized units) per epoch.
#[derive(Debug, Clone)]
pub struct CnnTraining {
    pub model: ToyCnnModel,
    pub epoch_losses: Vec<f64>,
}

/// Trains on every frame of `frames`; all must carry a steering label.
pub fn train_toy_cnn(frames: &[FrameRecord], config: &CnnConfig) -> Result<CnnTraining, ModelError> {
    if config.height == 0 || config.width == 0 || !config.height.is_multiple_of(4) || !config.width.is_multiple_of(4) {
        return Err(ModelError::Config("input size must be a positive multiple of 4".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) || !(config.degrees_scale > 0.0) {
        return Err(ModelError::Config("batch size, learning rate and scale must be positive".into()));
    }
    if frames.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut samples = Vec::with_capacity(frames.len());
    for f in frames {
        let label = f.steering_label.ok_or_else(|| ModelError::Unlabeled { frame_id: f.frame_id.clone() })?;
        samples.push((input_tensor(&f.image, config.height, config.width), label / config.degrees_scale));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::initialized(layers(config.height, config.width), &[3, config.height, config.width], &mut rng)
        .expect("layer shapes follow from the input size");
    let mut adam = Adam::new(net.param_count(), config.learning_rate, 0.9, 0.999);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; net.param_count()];
            for &i in chunk {
                let (x, target) = &samples[i];
                let trace = net.forward_traced(x).expect("input shape is fixed");
                let r = trace.output().data()[0] - target;
                loss_sum += r * r;
                net.backward(&trace, Tensor::new(vec![1], vec![2.0 * r / chunk.len() as f64]), &mut grad);
            }
            adam.update(net.params_mut(), &grad);
        }
        epoch_losses.push(loss_sum / samples.len() as f64);
    }
    Ok(CnnTraining {
        model: ToyCnnModel {
            id: "cnn".into(),
            net,
            height: config.height,
            width: config.width,
            degrees_scale: config.degrees_scale,
        },
        epoch_losses,
    })
}
