use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{evaluate, GradMode, LossBreakdown, Noise, Objective};
use super::{Architecture, Checkpoint, Slot, TranslatorError, TranslatorParams};
use crate::dataset::{load_stream_sized, DatasetManifest, Domain, DomainTag};
use crate::nn::{Adam, Tensor};
use crate::raster::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub objective: Objective,
    /// Determines initialization, batch sampling and latent noise.
    pub seed: u64,
    /// Steps between checkpoint writes; 0 writes only at the end.
    pub checkpoint_interval: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            batch_size: 4,
            lr_generator: 1e-4,
            lr_discriminator: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            objective: Objective::default(),
            seed: 0,
            checkpoint_interval: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TranslatorError> {
        let bad = |m: &str| Err(TranslatorError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        for (name, v) in [("lr_generator", self.lr_generator), ("lr_discriminator", self.lr_discriminator)] {
            if !v.is_finite() || v < 0.0 {
                return bad(&format!("{name} must be a finite non-negative number"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        let w = self.objective.weights;
        if [w.vae, w.gan, w.cycle].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("loss weights must be finite and non-negative");
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub losses: LossBreakdown,
}

/// Writes `step,vae_1,vae_2,gan_1,gan_2,cc_1,cc_2,total`.
pub fn write_training_log<W: Write>(out: W, rows: &[LogRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "vae_1", "vae_2", "gan_1", "gan_2", "cc_1", "cc_2", "total"])?;
    for r in rows {
        let l = &r.losses;
        w.write_record([
            r.step.to_string(),
            l.vae_1.to_string(),
            l.vae_2.to_string(),
            l.gan_1.to_string(),
            l.gan_2.to_string(),
            l.cc_1.to_string(),
            l.cc_2.to_string(),
            l.total.to_string(),
        ])?;
    }
    w.flush()
}

/// splitmix64 over the seed, step and stream tag.
fn derive_seed(seed: u64, step: u64, stream: u64) -> u64 {
    let mut z = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_BATCH: u64 = 1;
const STREAM_NOISE_D: u64 = 2;
const STREAM_NOISE_G: u64 = 3;

/// Alternating optimizer state over a [`TranslatorParams`].
#[derive(Debug, Clone)]
pub struct Trainer {
    params: TranslatorParams,
    config: TrainConfig,
    optimizers: Vec<Adam>,
    step: u64,
    domains: [DomainTag; 2],
    checkpoint_path: Option<PathBuf>,
}

impl Trainer {
    pub fn new(params: TranslatorParams, config: TrainConfig) -> Result<Self, TranslatorError> {
        config.validate()?;
        params.validate()?;
        let optimizers = Slot::ALL
            .iter()
            .map(|&s| {
                let lr = if s.is_discriminator() {
                    config.lr_discriminator
                } else {
                    config.lr_generator
                };
                Adam::new(params.net(s).param_count(), lr, config.beta1, config.beta2)
            })
            .collect();
        Ok(Self {
            params,
            config,
            optimizers,
            step: 0,
            domains: [DomainTag::new(Domain::S1, "S1"), DomainTag::new(Domain::S2, "S2")],
            checkpoint_path: None,
        })
    }

    /// Fresh parameters initialized from `config.seed`.
    pub fn initialized(arch: Architecture, config: TrainConfig) -> Result<Self, TranslatorError> {
        let params = TranslatorParams::initialized(arch, config.seed)?;
        Self::new(params, config)
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self, TranslatorError> {
        let mut trainer = Self::new(checkpoint.params, checkpoint.config)?;
        trainer.step = checkpoint.step;
        trainer.domains = checkpoint.domains;
        if let Some(states) = checkpoint.optimizers {
            for (opt, (t, m, v)) in trainer.optimizers.iter_mut().zip(states) {
                opt.restore(t, m, v);
            }
        }
        Ok(trainer)
    }

    pub fn with_domains(mut self, domains: [DomainTag; 2]) -> Self {
        self.domains = domains;
        self
    }

    /// Checkpoints are written here every `checkpoint_interval` steps and at the end of [`Trainer::run`].
    pub fn with_checkpoint_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint_path = Some(path.into());
        self
    }

    /// Changes the step count [`Trainer::run`] stops at, e.g. to extend a resumed run.
    pub fn set_total_steps(&mut self, steps: u64) {
        self.config.steps = steps;
    }

    pub fn params(&self) -> &TranslatorParams {
        &self.params
    }

    pub fn into_params(self) -> TranslatorParams {
        self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn domains(&self) -> &[DomainTag; 2] {
        &self.domains
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            config: self.config.clone(),
            step: self.step,
            domains: self.domains.clone(),
            optimizers: Some(
                self.optimizers
                    .iter()
                    .map(|o| {
                        let (m, v) = o.moments();
                        (o.steps_taken(), m.to_vec(), v.to_vec())
                    })
                    .collect(),
            ),
        }
    }

    fn apply(&mut self, grads: &super::ParamGrads, discriminators: bool) {
        for slot in Slot::ALL.into_iter().filter(|s| s.is_discriminator() == discriminators) {
            let opt = &mut self.optimizers[slot.index()];
            opt.update(self.params.net_mut(slot).params_mut(), grads.slot(slot));
        }
    }

    /// One alternating update: a discriminator step on the cross-entropy
    /// terms, then an encoder/generator step on reconstruction, cycle and
    /// non-saturating adversarial terms against the updated discriminators.
    ///
    /// The returned breakdown is evaluated between the two updates.
    pub fn train_step(&mut self, batch_s1: &[Image], batch_s2: &[Image]) -> Result<LossBreakdown, TranslatorError> {
        let to_tensors = |b: &[Image]| b.iter().map(|im| self.params.image_tensor(im)).collect::<Result<Vec<_>, _>>();
        let (b1, b2) = (to_tensors(batch_s1)?, to_tensors(batch_s2)?);
        self.step_tensors(&b1, &b2)
    }

    fn step_tensors(&mut self, b1: &[Tensor], b2: &[Tensor]) -> Result<LossBreakdown, TranslatorError> {
        let next = self.step + 1;
        let seed = self.config.seed;
        let objective = self.config.objective;

        let d_eval = evaluate(&self.params, [b1, b2], &objective, Noise::Seeded(derive_seed(seed, next, STREAM_NOISE_D)), GradMode::Discriminator)?;
        let d_grads = d_eval.grads.expect("requested");
        if d_grads.flatten().iter().any(|g| !g.is_finite()) {
            return Err(TranslatorError::Divergence {
                step: next,
                losses: Box::new(d_eval.breakdown),
            });
        }
        self.apply(&d_grads, true);

        let g_eval = evaluate(&self.params, [b1, b2], &objective, Noise::Seeded(derive_seed(seed, next, STREAM_NOISE_G)), GradMode::Generator)?;
        let losses = g_eval.breakdown;
        let g_grads = g_eval.grads.expect("requested");
        if !losses.is_finite() || g_grads.flatten().iter().any(|g| !g.is_finite()) {
            return Err(TranslatorError::Divergence {
                step: next,
                losses: Box::new(losses),
            });
        }
        self.apply(&g_grads, false);
        self.step = next;
        Ok(losses)
    }

    fn sample_batch(&self, corpus: &[Tensor], rng: &mut ChaCha8Rng) -> Vec<Tensor> {
        let k = self.config.batch_size.min(corpus.len());
        rand::seq::index::sample(rng, corpus.len(), k)
            .into_iter()
            .map(|i| corpus[i].clone())
            .collect()
    }

    /// Trains on unpaired corpora until `config.steps` steps are complete.
    pub fn run(&mut self, corpus_s1: &[Image], corpus_s2: &[Image]) -> Result<Vec<LogRow>, TranslatorError> {
        for (domain, corpus) in [(Domain::S1, corpus_s1), (Domain::S2, corpus_s2)] {
            if corpus.is_empty() {
                return Err(TranslatorError::EmptyCorpus(domain));
            }
        }
        let to_tensors = |b: &[Image]| b.iter().map(|im| self.params.image_tensor(im)).collect::<Result<Vec<_>, _>>();
        let (c1, c2) = (to_tensors(corpus_s1)?, to_tensors(corpus_s2)?);
        let mut log = Vec::new();
        while self.step < self.config.steps {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, self.step + 1, STREAM_BATCH));
            let b1 = self.sample_batch(&c1, &mut rng);
            let b2 = self.sample_batch(&c2, &mut rng);
            let losses = self.step_tensors(&b1, &b2)?;
            debug!("step {} total {:.5}", self.step, losses.total);
            log.push(LogRow { step: self.step, losses });
            let interval = self.config.checkpoint_interval;
            if interval > 0 && self.step.is_multiple_of(interval) && self.step < self.config.steps {
                self.save_checkpoint()?;
            }
        }
        self.save_checkpoint()?;
        Ok(log)
    }

    fn save_checkpoint(&self) -> Result<(), TranslatorError> {
        if let Some(path) = &self.checkpoint_path {
            self.checkpoint().save(path)?;
            info!("checkpoint at step {} written to {}", self.step, path.display());
        }
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: TranslatorParams,
    pub log: Vec<LogRow>,
}

/// Initializes from `config.seed` and trains for `config.steps` steps.
pub fn train(corpus_s1: &[Image], corpus_s2: &[Image], arch: Architecture, config: &TrainConfig) -> Result<TrainOutcome, TranslatorError> {
    let mut trainer = Trainer::initialized(arch, config.clone())?;
    let log = trainer.run(corpus_s1, corpus_s2)?;
    Ok(TrainOutcome {
        params: trainer.into_params(),
        log,
    })
}

/// Loads both manifests at the architecture's resolution and trains.
/// The S1 manifest must be tagged S1 and the S2 manifest S2.
pub fn train_from_manifests(
    manifest_s1: &DatasetManifest,
    manifest_s2: &DatasetManifest,
    arch: Architecture,
    config: &TrainConfig,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome, TranslatorError> {
    for (expected, m) in [(Domain::S1, manifest_s1), (Domain::S2, manifest_s2)] {
        if m.domain.domain != expected {
            return Err(TranslatorError::Config(format!(
                "manifest {} is tagged {}, expected {expected}",
                m.dataset_id, m.domain.domain
            )));
        }
        if m.included_count() == 0 {
            return Err(TranslatorError::EmptyCorpus(expected));
        }
    }
    let load = |m: &DatasetManifest| -> Result<Vec<Image>, TranslatorError> {
        Ok(load_stream_sized(m, arch.height, arch.width)?.into_iter().map(|r| r.image).collect())
    };
    let (c1, c2) = (load(manifest_s1)?, load(manifest_s2)?);
    let mut trainer = Trainer::initialized(arch, config.clone())?.with_domains([manifest_s1.domain.clone(), manifest_s2.domain.clone()]);
    if let Some(p) = checkpoint_path {
        trainer = trainer.with_checkpoint_path(p);
    }
    let log = trainer.run(&c1, &c2)?;
    Ok(TrainOutcome {
        params: trainer.into_params(),
        log,
    })
}
