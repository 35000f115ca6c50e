//! Procedural driving-like scenes for tests, demos and toy training.
//!
//! A scene is sky over a road whose centerline bends with a curvature in
//! `[-1, 1]`. The steering label is proportional to that curvature. Domain
//! S1 renders a bright daytime look; S2 renders the same geometry darker
//! with a speckle texture, so the two domains differ in brightness and
//! texture but share content.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetError, DatasetManifest, Domain, DomainTag, FrameRecord, ManifestEntry};
use crate::raster::Image;

/// Degrees of steering per unit curvature.
pub const DEGREES_PER_CURVATURE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    /// Road bend, `-1` (hard left) to `1` (hard right).
    pub curvature: f64,
    /// Fraction of the image height taken by sky.
    pub horizon: f64,
    /// Per-scene brightness jitter, added before the domain look.
    pub jitter: f64,
}

impl SceneSpec {
    pub fn steering_degrees(&self) -> f64 {
        DEGREES_PER_CURVATURE * self.curvature
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            curvature: rng.random_range(-1.0..=1.0),
            horizon: rng.random_range(0.3..0.45),
            jitter: rng.random_range(-0.04..0.04),
        }
    }
}

fn base_color(spec: &SceneSpec, h: usize, w: usize, y: usize, x: usize) -> [f32; 3] {
    let v = (y as f64 + 0.5) / h as f64;
    let u = (x as f64 + 0.5) / w as f64;
    if v < spec.horizon {
        return [0.55, 0.7, 0.95];
    }
    // depth 0 at the horizon, 1 at the bottom edge
    let depth = (v - spec.horizon) / (1.0 - spec.horizon);
    let center = 0.5 + 0.35 * spec.curvature * (1.0 - depth).powi(2);
    let half_width = 0.05 + 0.4 * depth;
    let d = (u - center).abs();
    if d < 0.03 * depth.max(0.2) {
        [0.95, 0.9, 0.4]
    } else if d < half_width {
        [0.45, 0.45, 0.48]
    } else {
        [0.35, 0.6, 0.3]
    }
}

/// Renders one scene. `texture_seed` drives the S2 speckle pattern.
pub fn render_scene(spec: &SceneSpec, domain: Domain, height: usize, width: usize, texture_seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(texture_seed);
    let speckle: Vec<f32> = (0..height * width).map(|_| rng.random_range(-0.08..0.08)).collect();
    Image::from_fn(height, width, |y, x, c| {
        let base = base_color(spec, height, width, y, x)[c] + spec.jitter as f32;
        let v = match domain {
            Domain::S1 => 0.15 + 0.85 * base,
            Domain::S2 => 0.45 * base + speckle[y * width + x],
        };
        v.clamp(0.0, 1.0)
    })
}

/// `n` labeled frames of one domain, fully determined by `seed`.
pub fn corpus(domain: Domain, n: usize, height: usize, width: usize, seed: u64) -> Vec<FrameRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let spec = SceneSpec::random(&mut rng);
            let image = render_scene(&spec, domain, height, width, rng.random());
            let mut record = FrameRecord::in_memory(format!("{}_{i:05}", domain.to_string().to_lowercase()), i, image);
            record.source_id = format!("synthetic-{domain}");
            record.steering_label = Some(spec.steering_degrees());
            record
        })
        .collect()
}

/// Images only, for translator training.
pub fn corpus_images(domain: Domain, n: usize, height: usize, width: usize, seed: u64) -> Vec<Image> {
    corpus(domain, n, height, width, seed).into_iter().map(|r| r.image).collect()
}

/// Writes a corpus as PNG files plus `manifest.tsv` into `dir`.
pub fn write_corpus(
    dir: &Path,
    tag: DomainTag,
    n: usize,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = DatasetManifest::new(format!("synthetic-{}", tag.alias), tag.clone(), dir);
    manifest.provenance = format!("synthetic seed={seed}");
    for record in corpus(tag.domain, n, height, width, seed) {
        let name = format!("{}.png", record.frame_id);
        record.image.save_png(&dir.join(&name)).map_err(|e| DatasetError::Ingestion {
            path: dir.join(&name).display().to_string(),
            reason: e.to_string(),
        })?;
        manifest.entries.push(ManifestEntry::new(name, record.steering_label));
    }
    manifest.write(&dir.join("manifest.tsv"))?;
    Ok(manifest)
}
