//! The combined translator objective and its analytic gradient.
//!
//! For a sample `x` from domain `a` (other domain `b`) one pass computes
//!
//! ```text
//! mu_a  = E_a(x)             z_a  = mu_a + n1
//! rec   = G_a(z_a)           fake = G_b(z_a)
//! mu_ab = E_b(fake)          z_ab = mu_ab + n2
//! cyc   = G_a(z_ab)
//! ```
//!
//! and contributes `d(rec, x) + KL(mu_a)` to `vae_a`, `d(cyc, x)` to `cc_a`,
//! `-ln D_a(x)` to `gan_a` and `-ln(1 - D_b(fake))` to `gan_b`. The
//! noise terms `n1`, `n2` are unit normal when sampling is on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::losses::{d_softplus, kl_unit_variance, kl_unit_variance_gradient, softplus, Distance};
use super::{Slot, TranslatorError, TranslatorParams};
use crate::dataset::Domain;
use crate::nn::{Tensor, Trace};
use crate::raster::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub vae: f64,
    pub gan: f64,
    pub cycle: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            vae: 10.0,
            gan: 1.0,
            cycle: 10.0,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        vae: 0.0,
        gan: 0.0,
        cycle: 0.0,
    };
}

/// Loss weights plus the pixel distance of the reconstruction terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Objective {
    pub weights: LossWeights,
    pub distance: Distance,
}

/// The six loss terms and their weighted sum.
///
/// `gan_i` is the discriminator-side cross-entropy of `D_i`:
/// `-mean ln D_i(real_i) - mean ln(1 - D_i(G_i(E_j(x_j))))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub vae_1: f64,
    pub vae_2: f64,
    pub gan_1: f64,
    pub gan_2: f64,
    pub cc_1: f64,
    pub cc_2: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossBreakdown {
    pub fn new(vae: [f64; 2], gan: [f64; 2], cc: [f64; 2], weights: LossWeights) -> Self {
        let mut b = Self {
            vae_1: vae[0],
            vae_2: vae[1],
            gan_1: gan[0],
            gan_2: gan[1],
            cc_1: cc[0],
            cc_2: cc[1],
            total: 0.0,
            weights,
        };
        b.total = b.weighted_total();
        b
    }

    /// `λ_vae (vae_1 + vae_2) + λ_gan (gan_1 + gan_2) + λ_cc (cc_1 + cc_2)`.
    pub fn weighted_total(&self) -> f64 {
        self.weights.vae * (self.vae_1 + self.vae_2)
            + self.weights.gan * (self.gan_1 + self.gan_2)
            + self.weights.cycle * (self.cc_1 + self.cc_2)
    }

    pub fn is_finite(&self) -> bool {
        [self.vae_1, self.vae_2, self.gan_1, self.gan_2, self.cc_1, self.cc_2, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Latent sampling. Disabled means the encoder mean is used directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Disabled,
    Seeded(u64),
}

pub(crate) struct NoiseSource(Option<ChaCha8Rng>);

impl NoiseSource {
    pub(crate) fn new(noise: Noise) -> Self {
        match noise {
            Noise::Disabled => Self(None),
            Noise::Seeded(seed) => Self(Some(ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    fn perturb(&mut self, mu: &Tensor) -> Tensor {
        let mut z = mu.clone();
        if let Some(rng) = &mut self.0 {
            for v in z.data_mut() {
                *v += rng.sample::<f64, _>(StandardNormal);
            }
        }
        z
    }
}

/// Gradients laid out like [`TranslatorParams`], one vector per [`Slot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    slots: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &TranslatorParams) -> Self {
        Self {
            slots: Slot::ALL.iter().map(|&s| vec![0.0; params.net(s).param_count()]).collect(),
        }
    }

    pub fn slot(&self, slot: Slot) -> &[f64] {
        &self.slots[slot.index()]
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut [f64] {
        &mut self.slots[slot.index()]
    }

    /// All gradients concatenated in [`Slot::ALL`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.slots.concat()
    }
}

/// Traced forward pass through a chain of networks.
struct ChainPass {
    slots: Vec<Slot>,
    traces: Vec<Trace>,
}

impl ChainPass {
    fn run(params: &TranslatorParams, slots: &[Slot], input: &Tensor) -> Result<Self, TranslatorError> {
        let mut traces: Vec<Trace> = Vec::with_capacity(slots.len());
        for &slot in slots {
            let x = traces.last().map_or(input, Trace::output);
            let trace = params.net(slot).forward_traced(x)?;
            traces.push(trace);
        }
        Ok(Self {
            slots: slots.to_vec(),
            traces,
        })
    }

    fn output(&self) -> &Tensor {
        self.traces.last().expect("chains are non-empty").output()
    }

    fn backward(&self, params: &TranslatorParams, grad: Tensor, grads: &mut ParamGrads) -> Tensor {
        let mut g = grad;
        for (slot, trace) in self.slots.iter().zip(&self.traces).rev() {
            g = params.net(*slot).backward(trace, g, grads.slot_mut(*slot));
        }
        g
    }
}

/// Per-sample multipliers of each term in the differentiated scalar.
#[derive(Debug, Clone, Copy, Default)]
struct Coeffs {
    vae: f64,
    cycle: f64,
    d_real: f64,
    d_fake: f64,
    g_fake: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct SampleTerms {
    recon: f64,
    kl: f64,
    cycle: f64,
    /// `-ln D_a(x)`
    d_real: f64,
    /// `-ln(1 - D_b(fake))`
    d_fake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GradMode {
    None,
    /// Gradient of `LossBreakdown::total` with respect to every network.
    Total,
    /// Discriminator-side cross-entropy, discriminator slots only.
    Discriminator,
    /// Reconstruction, cycle and non-saturating generator terms.
    Generator,
}

pub(crate) struct Evaluation {
    pub breakdown: LossBreakdown,
    pub grads: Option<ParamGrads>,
}

fn logit(t: &Tensor) -> f64 {
    t.data()[0]
}

fn scalar(v: f64) -> Tensor {
    Tensor::new(vec![1], vec![v])
}

fn sample_pass(
    params: &TranslatorParams,
    x: &Tensor,
    a: Domain,
    distance: Distance,
    noise: &mut NoiseSource,
    discriminator_only: bool,
    coeffs: Coeffs,
    grads: Option<&mut ParamGrads>,
) -> Result<SampleTerms, TranslatorError> {
    let b = a.other();
    let enc_a = ChainPass::run(params, &Slot::encoder(a), x)?;
    let z_a = noise.perturb(enc_a.output());
    let gen_ab = ChainPass::run(params, &Slot::generator(b), &z_a)?;
    let disc_b = ChainPass::run(params, &[Slot::discriminator(b)], gen_ab.output())?;
    let disc_a = ChainPass::run(params, &[Slot::discriminator(a)], x)?;
    let (l_fake, l_real) = (logit(disc_b.output()), logit(disc_a.output()));

    let mut terms = SampleTerms {
        d_real: softplus(-l_real),
        d_fake: softplus(l_fake),
        ..Default::default()
    };

    if discriminator_only {
        if let Some(grads) = grads {
            disc_b.backward(params, scalar(coeffs.d_fake * d_softplus(l_fake)), grads);
            disc_a.backward(params, scalar(-coeffs.d_real * d_softplus(-l_real)), grads);
        }
        return Ok(terms);
    }

    let gen_aa = ChainPass::run(params, &Slot::generator(a), &z_a)?;
    let enc_b = ChainPass::run(params, &Slot::encoder(b), gen_ab.output())?;
    let z_ab = noise.perturb(enc_b.output());
    let gen_aba = ChainPass::run(params, &Slot::generator(a), &z_ab)?;

    terms.recon = distance.value(gen_aa.output().data(), x.data());
    terms.kl = kl_unit_variance(enc_a.output().data());
    terms.cycle = distance.value(gen_aba.output().data(), x.data());

    let Some(grads) = grads else {
        return Ok(terms);
    };

    let mut d_fake_img = Tensor::zeros(gen_ab.output().shape());
    if coeffs.cycle != 0.0 {
        let g_cyc = distance.gradient(gen_aba.output(), x, coeffs.cycle);
        let d_z_ab = gen_aba.backward(params, g_cyc, grads);
        d_fake_img.add_assign(&enc_b.backward(params, d_z_ab, grads));
    }
    let d_logit_fake = coeffs.d_fake * d_softplus(l_fake) - coeffs.g_fake * d_softplus(-l_fake);
    if d_logit_fake != 0.0 {
        d_fake_img.add_assign(&disc_b.backward(params, scalar(d_logit_fake), grads));
    }
    let mut d_z_a = gen_ab.backward(params, d_fake_img, grads);
    if coeffs.vae != 0.0 {
        let g_rec = distance.gradient(gen_aa.output(), x, coeffs.vae);
        d_z_a.add_assign(&gen_aa.backward(params, g_rec, grads));
        d_z_a.add_assign(&kl_unit_variance_gradient(enc_a.output(), coeffs.vae));
    }
    enc_a.backward(params, d_z_a, grads);
    if coeffs.d_real != 0.0 {
        disc_a.backward(params, scalar(-coeffs.d_real * d_softplus(-l_real)), grads);
    }
    Ok(terms)
}

pub(crate) fn evaluate(
    params: &TranslatorParams,
    batches: [&[Tensor]; 2],
    objective: &Objective,
    noise: Noise,
    mode: GradMode,
) -> Result<Evaluation, TranslatorError> {
    if batches.iter().any(|b| b.is_empty()) {
        return Err(TranslatorError::EmptyBatch);
    }
    let w = objective.weights;
    let mut noise = NoiseSource::new(noise);
    let mut grads = (mode != GradMode::None).then(|| ParamGrads::zeros_like(params));
    let (mut vae, mut gan, mut cc) = ([0.0; 2], [0.0; 2], [0.0; 2]);

    for a in Domain::BOTH {
        let batch = batches[a.index()];
        let n = batch.len() as f64;
        let coeffs = match mode {
            GradMode::None => Coeffs::default(),
            GradMode::Total => Coeffs {
                vae: w.vae / n,
                cycle: w.cycle / n,
                d_real: w.gan / n,
                d_fake: w.gan / n,
                g_fake: 0.0,
            },
            GradMode::Discriminator => Coeffs {
                d_real: w.gan / n,
                d_fake: w.gan / n,
                ..Default::default()
            },
            GradMode::Generator => Coeffs {
                vae: w.vae / n,
                cycle: w.cycle / n,
                g_fake: w.gan / n,
                ..Default::default()
            },
        };
        let b = a.other().index();
        for x in batch {
            let t = sample_pass(
                params,
                x,
                a,
                objective.distance,
                &mut noise,
                mode == GradMode::Discriminator,
                coeffs,
                grads.as_mut(),
            )?;
            vae[a.index()] += (t.recon + t.kl) / n;
            cc[a.index()] += t.cycle / n;
            gan[a.index()] += t.d_real / n;
            gan[b] += t.d_fake / n;
        }
    }
    Ok(Evaluation {
        breakdown: LossBreakdown::new(vae, gan, cc, w),
        grads,
    })
}

fn tensors(params: &TranslatorParams, images: &[Image]) -> Result<Vec<Tensor>, TranslatorError> {
    images.iter().map(|im| params.image_tensor(im)).collect()
}

/// All six terms over unpaired batches from S1 and S2.
pub fn total_objective(
    params: &TranslatorParams,
    batch_s1: &[Image],
    batch_s2: &[Image],
    objective: &Objective,
    noise: Noise,
) -> Result<LossBreakdown, TranslatorError> {
    let (b1, b2) = (tensors(params, batch_s1)?, tensors(params, batch_s2)?);
    Ok(evaluate(params, [&b1, &b2], objective, noise, GradMode::None)?.breakdown)
}

/// [`total_objective`] together with the gradient of its `total` with
/// respect to every parameter of every network.
pub fn objective_gradient(
    params: &TranslatorParams,
    batch_s1: &[Image],
    batch_s2: &[Image],
    objective: &Objective,
    noise: Noise,
) -> Result<(LossBreakdown, ParamGrads), TranslatorError> {
    let (b1, b2) = (tensors(params, batch_s1)?, tensors(params, batch_s2)?);
    let eval = evaluate(params, [&b1, &b2], objective, noise, GradMode::Total)?;
    Ok((eval.breakdown, eval.grads.expect("requested")))
}

/// Reconstruction and prior parts of the VAE term for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeTerms {
    pub reconstruction: f64,
    pub prior: f64,
}

impl VaeTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.prior
    }
}

/// `d(G_d(E_d(x)), x) + KL(E_d(x) || N(0, I))` with the encoder mean as latent.
pub fn vae_loss(params: &TranslatorParams, x: &Image, domain: Domain, distance: Distance) -> Result<VaeTerms, TranslatorError> {
    let xt = params.image_tensor(x)?;
    let mu = params.run_chain(&Slot::encoder(domain), &xt)?;
    let rec = params.run_chain(&Slot::generator(domain), &mu)?;
    Ok(VaeTerms {
        reconstruction: distance.value(rec.data(), xt.data()),
        prior: kl_unit_variance(mu.data()),
    })
}

/// `(discriminator_loss, generator_loss)` of `D_domain` on the given batches.
pub fn gan_loss(params: &TranslatorParams, real: &[Image], fake: &[Image], domain: Domain) -> Result<(f64, f64), TranslatorError> {
    if real.is_empty() || fake.is_empty() {
        return Err(TranslatorError::EmptyBatch);
    }
    let d = params.net(Slot::discriminator(domain));
    let logits = |batch: &[Image]| -> Result<Vec<f64>, TranslatorError> {
        batch.iter().map(|im| Ok(logit(&d.forward(&params.image_tensor(im)?)?))).collect()
    };
    super::losses::bce_gan_losses_from_logits(&logits(real)?, &logits(fake)?)
}

/// `d(x, G_from(E_to(G_to(E_from(x)))))` with encoder means as latents.
pub fn cycle_loss(params: &TranslatorParams, x: &Image, from: Domain, distance: Distance) -> Result<f64, TranslatorError> {
    let to = from.other();
    let xt = params.image_tensor(x)?;
    let mut t = params.run_chain(&Slot::encoder(from), &xt)?;
    t = params.run_chain(&Slot::generator(to), &t)?;
    t = params.run_chain(&Slot::encoder(to), &t)?;
    t = params.run_chain(&Slot::generator(from), &t)?;
    Ok(distance.value(t.data(), xt.data()))
}
