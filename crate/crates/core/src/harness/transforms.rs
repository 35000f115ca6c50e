//! Hand-made scene transforms used as baselines next to the translator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, MetamorphicRelation};
use crate::raster::Image;

fn invalid(message: impl Into<String>) -> HarnessError {
    HarnessError::InvalidParameters(message.into())
}

/// Warp where output pixel `(x, y)` (pixel-center coordinates) samples the
/// source at `m · (x, y, 1)`, bilinearly with edge clamping.
pub fn affine(m: [[f64; 3]; 2]) -> Result<MetamorphicRelation, HarnessError> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("affine matrix must be finite"));
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-12 {
        return Err(invalid("affine matrix is singular"));
    }
    Ok(MetamorphicRelation::new(format!("affine:{m:?}"), move |im| Ok(warp(im, &m))))
}

fn warp(im: &Image, m: &[[f64; 3]; 2]) -> Image {
    let (h, w, ch) = (im.height(), im.width(), im.channels());
    let mut out = Image::filled(h, w, ch, 0.0);
    for y in 0..h {
        for x in 0..w {
            let sx = (m[0][0] * x as f64 + m[0][1] * y as f64 + m[0][2]).clamp(0.0, (w - 1) as f64);
            let sy = (m[1][0] * x as f64 + m[1][1] * y as f64 + m[1][2]).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..ch {
                let p = |yy, xx| f64::from(im.get(yy, xx, c));
                let v = if fx == 0.0 && fy == 0.0 {
                    p(y0, x0)
                } else {
                    (p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx) * (1.0 - fy) + (p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx) * fy
                };
                out.set(y, x, c, v as f32);
            }
        }
    }
    out
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(im: &Image, sigma: f64) -> Image {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (h, w, ch) = (im.height(), im.width(), im.channels());
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (k, wt) in kernel.iter().enumerate() {
                        let d = k as i64 - r;
                        let (yy, xx) = if horizontal {
                            (y, (x as i64 + d).clamp(0, w as i64 - 1) as usize)
                        } else {
                            ((y as i64 + d).clamp(0, h as i64 - 1) as usize, x)
                        };
                        acc += wt * src[(yy * w + xx) * ch + c];
                    }
                    dst[(y * w + x) * ch + c] = acc;
                }
            }
        }
        dst
    };
    let src: Vec<f64> = im.data().iter().map(|&v| f64::from(v)).collect();
    let out = pass(&pass(&src, true), false);
    Image::new(h, w, ch, out.into_iter().map(|v| v as f32).collect()).expect("same size")
}

pub fn blur(sigma: f64) -> Result<MetamorphicRelation, HarnessError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    Ok(MetamorphicRelation::new(format!("blur:{sigma}"), move |im| Ok(gaussian_blur(im, sigma))))
}

/// Blends every pixel toward white: `x + weight · (1 - x)`.
pub fn fog(weight: f64) -> Result<MetamorphicRelation, HarnessError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(invalid(format!("fog weight must lie in [0, 1], got {weight}")));
    }
    let wt = weight as f32;
    Ok(MetamorphicRelation::new(format!("fog:{weight}"), move |im| Ok(im.map(|v| if wt == 1.0 { 1.0 } else { v + wt * (1.0 - v) }))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainParams {
    /// Streaks per pixel of image area.
    pub density: f64,
    /// Streak length in pixels.
    pub length: f64,
    /// Streak direction, degrees from vertical.
    pub angle_degrees: f64,
    /// Brightness added along a streak.
    pub intensity: f64,
    /// Blur applied after drawing; 0 disables it.
    pub blur_sigma: f64,
    pub seed: u64,
}

impl Default for RainParams {
    fn default() -> Self {
        Self {
            density: 0.004,
            length: 12.0,
            angle_degrees: 10.0,
            intensity: 0.35,
            blur_sigma: 0.7,
            seed: 0,
        }
    }
}

/// Additive streak overlay followed by a mild blur. Streak positions depend
/// on the seed and the image size only, so the transform is deterministic.
pub fn rain(p: RainParams) -> Result<MetamorphicRelation, HarnessError> {
    let ok = p.density.is_finite()
        && p.density >= 0.0
        && p.length.is_finite()
        && p.length > 0.0
        && p.angle_degrees.is_finite()
        && p.intensity.is_finite()
        && p.blur_sigma.is_finite()
        && p.blur_sigma >= 0.0;
    if !ok {
        return Err(invalid(format!("bad rain parameters {p:?}")));
    }
    Ok(MetamorphicRelation::new(format!("rain:{}", p.seed), move |im| {
        let (h, w) = (im.height(), im.width());
        let mut out = im.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let streaks = (p.density * (h * w) as f64).round() as usize;
        let (dx, dy) = (p.angle_degrees.to_radians().sin(), p.angle_degrees.to_radians().cos());
        let steps = p.length.ceil() as usize;
        for _ in 0..streaks {
            let (x0, y0) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
            for s in 0..steps {
                let (x, y) = (x0 + dx * s as f64, y0 + dy * s as f64);
                if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                    break;
                }
                for c in 0..im.channels() {
                    let v = out.get(y as usize, x as usize, c) + p.intensity as f32;
                    out.set(y as usize, x as usize, c, v.min(1.0));
                }
            }
        }
        Ok(if p.blur_sigma > 0.0 { gaussian_blur(&out, p.blur_sigma) } else { out })
    }))
}
