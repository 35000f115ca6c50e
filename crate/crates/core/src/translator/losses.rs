//! Elementwise loss terms and their gradients.

use serde::{Deserialize, Serialize};

use super::TranslatorError;
use crate::nn::{sigmoid, Tensor};

/// Pixel distance used by reconstruction and cycle terms (mean over pixels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Distance {
    /// Mean absolute error.
    #[default]
    L1,
    /// Mean squared error.
    L2,
}

impl Distance {
    pub fn value(self, output: &[f64], target: &[f64]) -> f64 {
        debug_assert_eq!(output.len(), target.len());
        let n = output.len().max(1) as f64;
        let sum: f64 = match self {
            Distance::L1 => output.iter().zip(target).map(|(a, b)| (a - b).abs()).sum(),
            Distance::L2 => output.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum(),
        };
        sum / n
    }

    /// `scale * d(value)/d(output)`, shaped like `output`.
    pub fn gradient(self, output: &Tensor, target: &Tensor, scale: f64) -> Tensor {
        let n = output.len().max(1) as f64;
        let data = output
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| {
                let r = a - b;
                match self {
                    Distance::L1 => {
                        if r > 0.0 {
                            scale / n
                        } else if r < 0.0 {
                            -scale / n
                        } else {
                            0.0
                        }
                    }
                    Distance::L2 => 2.0 * r * scale / n,
                }
            })
            .collect();
        Tensor::new(output.shape().to_vec(), data)
    }
}

/// KL divergence of `N(mu, exp(log_var))` from `N(0, 1)`, averaged over dimensions.
pub fn kl_to_unit_normal(mu: &[f64], log_var: &[f64]) -> f64 {
    debug_assert_eq!(mu.len(), log_var.len());
    let n = mu.len().max(1) as f64;
    mu.iter()
        .zip(log_var)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum::<f64>()
        / n
}

/// KL term for a unit-variance posterior: `0.5 * mean(mu^2)`.
pub fn kl_unit_variance(mu: &[f64]) -> f64 {
    0.5 * mu.iter().map(|m| m * m).sum::<f64>() / mu.len().max(1) as f64
}

pub(crate) fn kl_unit_variance_gradient(mu: &Tensor, scale: f64) -> Tensor {
    let n = mu.len().max(1) as f64;
    Tensor::new(mu.shape().to_vec(), mu.data().iter().map(|m| scale * m / n).collect())
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy GAN losses from discriminator probabilities.
///
/// Returns `(discriminator_loss, generator_loss)` with
/// `discriminator_loss = -mean ln D(real) - mean ln(1 - D(fake))` and the
/// non-saturating `generator_loss = -mean ln D(fake)`.
pub fn bce_gan_losses(real_probs: &[f64], fake_probs: &[f64]) -> Result<(f64, f64), TranslatorError> {
    if real_probs.is_empty() || fake_probs.is_empty() {
        return Err(TranslatorError::EmptyBatch);
    }
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&p| f(p)).sum::<f64>() / v.len() as f64;
    let d = -mean(real_probs, &|p| p.ln()) - mean(fake_probs, &|p| (1.0 - p).ln());
    let g = -mean(fake_probs, &|p| p.ln());
    Ok((d, g))
}

/// Same as [`bce_gan_losses`] but from logits, `D = sigmoid(logit)`.
pub fn bce_gan_losses_from_logits(real_logits: &[f64], fake_logits: &[f64]) -> Result<(f64, f64), TranslatorError> {
    if real_logits.is_empty() || fake_logits.is_empty() {
        return Err(TranslatorError::EmptyBatch);
    }
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&l| f(l)).sum::<f64>() / v.len() as f64;
    let d = mean(real_logits, &|l| softplus(-l)) + mean(fake_logits, &softplus);
    let g = mean(fake_logits, &|l| softplus(-l));
    Ok((d, g))
}

pub(crate) fn d_softplus(x: f64) -> f64 {
    sigmoid(x)
}
