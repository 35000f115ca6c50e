//! Floating-point raster images in height × width × channels layout.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("pixel buffer has {actual} values, expected {expected} for {height}x{width}x{channels}")]
    BufferSize {
        height: usize,
        width: usize,
        channels: usize,
        expected: usize,
        actual: usize,
    },
    #[error("expected 3 channels, got {0}")]
    Channels(usize),
    #[error("failed to read image {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: Box<image::ImageError>,
    },
    #[error("failed to write image {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: Box<image::ImageError>,
    },
}

/// Interleaved image with `f32` channel values, row-major (`[y][x][c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(RasterError::BufferSize {
                height,
                width,
                channels,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds an RGB image by evaluating `f(y, x, c)` for every sample.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels: 3,
            data,
        }
    }

    /// Converts 8-bit samples to `[0, 1]`.
    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self, RasterError> {
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `height`×`width` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Image {
        assert!(top + height <= self.height && left + width <= self.width, "crop window out of bounds");
        let mut data = Vec::with_capacity(height * width * self.channels);
        for y in top..top + height {
            let start = (y * self.width + left) * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Image {
            height,
            width,
            channels: self.channels,
            data,
        }
    }

    /// Bilinear resize with half-pixel centers and edge clamping. Resizing
    /// to the current size returns an exact copy.
    pub fn resized(&self, height: usize, width: usize) -> Image {
        assert!(self.height > 0 && self.width > 0, "cannot resize an empty image");
        let taps = |dst: usize, scale: f64, len: usize| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        };
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let cols: Vec<_> = (0..width).map(|x| taps(x, sx, self.width)).collect();
        let mut data = Vec::with_capacity(height * width * self.channels);
        for y in 0..height {
            let (y0, y1, fy) = taps(y, sy, self.height);
            for &(x0, x1, fx) in &cols {
                for c in 0..self.channels {
                    let p = |yy: usize, xx: usize| f64::from(self.get(yy, xx, c));
                    let v = if fx == 0.0 && fy == 0.0 {
                        p(y0, x0)
                    } else {
                        let top_row = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                        let bottom_row = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                        top_row * (1.0 - fy) + bottom_row * fy
                    };
                    data.push(v as f32);
                }
            }
        }
        Image {
            height,
            width,
            channels: self.channels,
            data,
        }
    }

    pub fn clamp01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Quantizes to 8-bit samples with round-to-nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn load(path: &Path) -> Result<Image, RasterError> {
        let decoded = image::open(path).map_err(|source| RasterError::Read {
            path: path.display().to_string(),
            source: Box::new(source),
        })?;
        Ok(Self::from_rgb8(&decoded.to_rgb8()))
    }

    pub fn from_rgb8(buffer: &image::RgbImage) -> Image {
        let (w, h) = buffer.dimensions();
        Self::from_u8(h as usize, w as usize, 3, buffer.as_raw()).expect("rgb buffer is h*w*3")
    }

    /// Writes an 8-bit RGB PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        if self.channels != 3 {
            return Err(RasterError::Channels(self.channels));
        }
        image::save_buffer_with_format(
            path,
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| RasterError::Write {
            path: path.display().to_string(),
            source: Box::new(source),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_buffer_length() {
        assert!(matches!(
            Image::new(2, 2, 3, vec![0.0; 11]),
            Err(RasterError::BufferSize { expected: 12, .. })
        ));
    }

    #[test]
    fn u8_round_trip_is_exact() {
        let bytes: Vec<u8> = (0..=255u8).cycle().take(4 * 5 * 3).collect();
        let img = Image::from_u8(4, 5, 3, &bytes).unwrap();
        assert_eq!(img.to_u8(), bytes);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = Image::from_fn(6, 7, |y, x, c| ((y * 7 + x) * 3 + c) as f32 / 255.0);
        img.save_png(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
    }
}
