use serde::{Deserialize, Serialize};

use super::TranslatorError;
use crate::nn::{LayerSpec, Network};

/// Final activation of the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputSquash {
    /// Logistic squashing, 0.5 at zero pre-activation.
    Sigmoid,
    /// Hard clamp to `[0, 1]`, identity inside the interval.
    Clamp,
}

impl OutputSquash {
    fn layer(self) -> LayerSpec {
        match self {
            OutputSquash::Sigmoid => LayerSpec::Sigmoid,
            OutputSquash::Clamp => LayerSpec::Clamp01,
        }
    }
}

/// Layer layout of the six translator networks.
///
/// Encoder `E_i` is `encoder_shared ∘ encoder_private[i]` and generator
/// `G_i` is `generator_private[i] ∘ generator_shared`; the shared halves are
/// one set of weights used by both domains. Both discriminators use the
/// `discriminator` layout and emit one logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub encoder_private: Vec<LayerSpec>,
    pub encoder_shared: Vec<LayerSpec>,
    pub generator_shared: Vec<LayerSpec>,
    pub generator_private: Vec<LayerSpec>,
    pub discriminator: Vec<LayerSpec>,
}

/// Input shapes of each stack, derived by shape propagation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StackShapes {
    pub image: Vec<usize>,
    pub encoder_mid: Vec<usize>,
    pub latent: Vec<usize>,
    pub generator_mid: Vec<usize>,
}

fn conv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> LayerSpec {
    LayerSpec::Conv2d {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding,
    }
}

fn deconv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> LayerSpec {
    LayerSpec::ConvTranspose2d {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding,
    }
}

const LRELU: LayerSpec = LayerSpec::LeakyRelu { slope: 0.2 };

impl Architecture {
    /// 8×8 inputs, under 500 parameters across all networks.
    pub fn tiny() -> Self {
        Self {
            name: "tiny".into(),
            height: 8,
            width: 8,
            encoder_private: vec![conv(3, 4, 2, 2, 0), LRELU],
            encoder_shared: vec![conv(4, 4, 2, 2, 0)],
            generator_shared: vec![deconv(4, 4, 2, 2, 0), LRELU],
            generator_private: vec![deconv(4, 3, 2, 2, 0), LayerSpec::Sigmoid],
            discriminator: vec![conv(3, 2, 2, 2, 0), LRELU, conv(2, 1, 4, 4, 0), LayerSpec::Flatten],
        }
    }

    /// 32×32 inputs, 8×8×64 spatial latent.
    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            height: 32,
            width: 32,
            encoder_private: vec![conv(3, 32, 4, 2, 1), LRELU, conv(32, 64, 4, 2, 1), LRELU],
            encoder_shared: vec![conv(64, 64, 3, 1, 1)],
            generator_shared: vec![deconv(64, 64, 3, 1, 1), LRELU],
            generator_private: vec![deconv(64, 32, 4, 2, 1), LRELU, deconv(32, 3, 4, 2, 1), LayerSpec::Sigmoid],
            discriminator: vec![
                conv(3, 32, 4, 2, 1),
                LRELU,
                conv(32, 64, 4, 2, 1),
                LRELU,
                conv(64, 1, 8, 1, 0),
                LayerSpec::Flatten,
            ],
        }
    }

    /// Canonical 240×320 frames, 30×40×64 spatial latent.
    pub fn full() -> Self {
        Self {
            name: "full".into(),
            height: 240,
            width: 320,
            encoder_private: vec![conv(3, 16, 4, 2, 1), LRELU, conv(16, 32, 4, 2, 1), LRELU, conv(32, 64, 4, 2, 1), LRELU],
            encoder_shared: vec![conv(64, 64, 3, 1, 1)],
            generator_shared: vec![deconv(64, 64, 3, 1, 1), LRELU],
            generator_private: vec![
                deconv(64, 32, 4, 2, 1),
                LRELU,
                deconv(32, 16, 4, 2, 1),
                LRELU,
                deconv(16, 3, 4, 2, 1),
                LayerSpec::Sigmoid,
            ],
            discriminator: vec![
                conv(3, 16, 4, 2, 1),
                LRELU,
                conv(16, 32, 4, 2, 1),
                LRELU,
                conv(32, 64, 4, 2, 1),
                LRELU,
                conv(64, 1, 3, 1, 1),
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_features: 30 * 40,
                    out_features: 1,
                },
            ],
        }
    }

    /// Single dense layer per side with a flat latent of `latent_dim`; the
    /// shared stacks are empty. Useful for hand-built parameter sets.
    pub fn linear(height: usize, width: usize, latent_dim: usize, squash: OutputSquash) -> Self {
        let pixels = 3 * height * width;
        Self {
            name: format!("linear{latent_dim}"),
            height,
            width,
            encoder_private: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_features: pixels,
                    out_features: latent_dim,
                },
            ],
            encoder_shared: Vec::new(),
            generator_shared: Vec::new(),
            generator_private: vec![
                LayerSpec::Dense {
                    in_features: latent_dim,
                    out_features: pixels,
                },
                LayerSpec::Reshape {
                    shape: vec![3, height, width],
                },
                squash.layer(),
            ],
            discriminator: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_features: pixels,
                    out_features: 1,
                },
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "tiny" => Some(Self::tiny()),
            "toy" => Some(Self::toy()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }

    pub fn image_shape(&self) -> Vec<usize> {
        vec![3, self.height, self.width]
    }

    pub(crate) fn shapes(&self) -> Result<StackShapes, TranslatorError> {
        let image = self.image_shape();
        let encoder_mid = Network::new(self.encoder_private.clone(), &image)?.output_shape().to_vec();
        let latent = Network::new(self.encoder_shared.clone(), &encoder_mid)?.output_shape().to_vec();
        let generator_mid = Network::new(self.generator_shared.clone(), &latent)?.output_shape().to_vec();
        let generated = Network::new(self.generator_private.clone(), &generator_mid)?.output_shape().to_vec();
        if generated != image {
            return Err(TranslatorError::Architecture(format!(
                "generators produce {generated:?}, images are {image:?}"
            )));
        }
        let logits = Network::new(self.discriminator.clone(), &image)?.output_shape().to_vec();
        if logits != [1] {
            return Err(TranslatorError::Architecture(format!(
                "discriminator must emit one logit, emits {logits:?}"
            )));
        }
        Ok(StackShapes {
            image,
            encoder_mid,
            latent,
            generator_mid,
        })
    }

    pub fn latent_shape(&self) -> Result<Vec<usize>, TranslatorError> {
        Ok(self.shapes()?.latent)
    }

    pub fn latent_dim(&self) -> Result<usize, TranslatorError> {
        Ok(self.latent_shape()?.iter().product())
    }
}
