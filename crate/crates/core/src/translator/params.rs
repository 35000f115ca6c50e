use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::StackShapes;
use super::{Architecture, TranslatorError};
use crate::dataset::Domain;
use crate::nn::{Network, Tensor};
use crate::raster::Image;

/// Storage slot of one network inside [`TranslatorParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    EncoderPrivate1,
    EncoderPrivate2,
    EncoderShared,
    GeneratorShared,
    GeneratorPrivate1,
    GeneratorPrivate2,
    Discriminator1,
    Discriminator2,
}

impl Slot {
    pub const ALL: [Slot; 8] = [
        Slot::EncoderPrivate1,
        Slot::EncoderPrivate2,
        Slot::EncoderShared,
        Slot::GeneratorShared,
        Slot::GeneratorPrivate1,
        Slot::GeneratorPrivate2,
        Slot::Discriminator1,
        Slot::Discriminator2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn encoder_private(domain: Domain) -> Slot {
        match domain {
            Domain::S1 => Slot::EncoderPrivate1,
            Domain::S2 => Slot::EncoderPrivate2,
        }
    }

    pub fn generator_private(domain: Domain) -> Slot {
        match domain {
            Domain::S1 => Slot::GeneratorPrivate1,
            Domain::S2 => Slot::GeneratorPrivate2,
        }
    }

    pub fn discriminator(domain: Domain) -> Slot {
        match domain {
            Domain::S1 => Slot::Discriminator1,
            Domain::S2 => Slot::Discriminator2,
        }
    }

    pub fn is_discriminator(self) -> bool {
        matches!(self, Slot::Discriminator1 | Slot::Discriminator2)
    }

    /// Networks applied, in order, by encoder `E_domain`.
    pub fn encoder(domain: Domain) -> [Slot; 2] {
        [Slot::encoder_private(domain), Slot::EncoderShared]
    }

    /// Networks applied, in order, by generator `G_domain`.
    pub fn generator(domain: Domain) -> [Slot; 2] {
        [Slot::GeneratorShared, Slot::generator_private(domain)]
    }
}

/// A point in the shared latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode(pub Tensor);

impl LatentCode {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        self.0.data()
    }
}

/// Output of [`TranslatorParams::translate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub image: Image,
    /// Set when source and target domain were the same, i.e. `image` is
    /// the reconstruction `G_d(E_d(x))`.
    pub reconstruction: bool,
}

/// Parameters of encoders, generators and discriminators for both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorParams {
    arch: Architecture,
    nets: Vec<Network>,
}

impl TranslatorParams {
    fn build(arch: Architecture, mut make: impl FnMut(Vec<crate::nn::LayerSpec>, &[usize]) -> Result<Network, crate::nn::NnError>) -> Result<Self, TranslatorError> {
        let StackShapes {
            image,
            encoder_mid,
            latent,
            generator_mid,
        } = arch.shapes()?;
        let mut nets = Vec::with_capacity(8);
        for slot in Slot::ALL {
            let net = match slot {
                Slot::EncoderPrivate1 | Slot::EncoderPrivate2 => make(arch.encoder_private.clone(), &image)?,
                Slot::EncoderShared => make(arch.encoder_shared.clone(), &encoder_mid)?,
                Slot::GeneratorShared => make(arch.generator_shared.clone(), &latent)?,
                Slot::GeneratorPrivate1 | Slot::GeneratorPrivate2 => make(arch.generator_private.clone(), &generator_mid)?,
                Slot::Discriminator1 | Slot::Discriminator2 => make(arch.discriminator.clone(), &image)?,
            };
            nets.push(net);
        }
        Ok(Self { arch, nets })
    }

    /// All parameters zero.
    pub fn zeros(arch: Architecture) -> Result<Self, TranslatorError> {
        Self::build(arch, Network::new)
    }

    /// Random initialization fully determined by `seed`.
    pub fn initialized(arch: Architecture, seed: u64) -> Result<Self, TranslatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(arch, |layers, shape| Network::initialized(layers, shape, &mut rng))
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn net(&self, slot: Slot) -> &Network {
        &self.nets[slot.index()]
    }

    pub fn net_mut(&mut self, slot: Slot) -> &mut Network {
        &mut self.nets[slot.index()]
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(Network::param_count).sum()
    }

    pub fn latent_shape(&self) -> &[usize] {
        self.net(Slot::GeneratorShared).input_shape()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_shape().iter().product()
    }

    /// Errors if any parameter is NaN or infinite.
    pub fn validate(&self) -> Result<(), TranslatorError> {
        for slot in Slot::ALL {
            if let Some(i) = self.net(slot).params().iter().position(|v| !v.is_finite()) {
                return Err(TranslatorError::InvalidParams(format!("{slot:?} parameter {i} is not finite")));
            }
        }
        Ok(())
    }

    pub(crate) fn image_tensor(&self, image: &Image) -> Result<Tensor, TranslatorError> {
        if image.channels() != 3 || image.height() != self.arch.height || image.width() != self.arch.width {
            return Err(TranslatorError::Dimension {
                expected: self.arch.image_shape(),
                got: vec![image.channels(), image.height(), image.width()],
            });
        }
        Ok(Tensor::from_image(image))
    }

    pub(crate) fn run_chain(&self, slots: &[Slot], input: &Tensor) -> Result<Tensor, TranslatorError> {
        let mut x = input.clone();
        for &slot in slots {
            x = self.net(slot).forward(&x)?;
        }
        Ok(x)
    }

    /// Mean latent code `E_domain(x)`; no sampling noise.
    pub fn encode(&self, image: &Image, domain: Domain) -> Result<LatentCode, TranslatorError> {
        let x = self.image_tensor(image)?;
        Ok(LatentCode(self.run_chain(&Slot::encoder(domain), &x)?))
    }

    /// `G_domain(z)` as an image in `[0, 1]`.
    pub fn generate(&self, z: &LatentCode, domain: Domain) -> Result<Image, TranslatorError> {
        if z.0.shape() != self.latent_shape() {
            return Err(TranslatorError::Dimension {
                expected: self.latent_shape().to_vec(),
                got: z.0.shape().to_vec(),
            });
        }
        Ok(self.run_chain(&Slot::generator(domain), &z.0)?.to_image())
    }

    /// `G_to(E_from(x))`, deterministic.
    pub fn translate(&self, image: &Image, from: Domain, to: Domain) -> Result<Translation, TranslatorError> {
        self.validate()?;
        let z = self.encode(image, from)?;
        Ok(Translation {
            image: self.generate(&z, to)?,
            reconstruction: from == to,
        })
    }
}
