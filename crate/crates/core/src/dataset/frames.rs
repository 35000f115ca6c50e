use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::codecs::gif::GifDecoder;
use image::codecs::png::PngDecoder;
use image::{AnimationDecoder, DynamicImage};

use super::{DatasetError, FRAME_HEIGHT, FRAME_WIDTH};
use crate::raster::Image;

const STILL_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

/// A decoded frame and its index in the source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub index: usize,
    pub image: Image,
}

/// Frames kept by stride `stride` from an `n`-frame stream: indices
/// `0, stride, 2*stride, ...`.
pub fn kept_frame_count(n: usize, stride: usize) -> usize {
    n.div_ceil(stride)
}

/// Smallest stride keeping at most `budget` of `total` frames.
pub fn stride_for_budget(total: usize, budget: usize) -> usize {
    if budget == 0 {
        return total.max(1);
    }
    total.div_ceil(budget).max(1)
}

/// Parses `mm:ss` or `h:mm:ss` into seconds.
pub fn parse_duration(text: &str) -> Option<u64> {
    let parts: Vec<u64> = text.split(':').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts.as_slice() {
        [m, s] if *s < 60 => Some(m * 60 + s),
        [h, m, s] if *m < 60 && *s < 60 => Some(h * 3600 + m * 60 + s),
        _ => None,
    }
}

/// Decodes a frame source and keeps every `stride`-th frame starting at 0.
///
/// Sources are either a directory of still images (ordered by file name) or
/// an animated GIF/PNG file. A single still image is a one-frame stream.
pub fn extract_frames(path: &Path, stride: usize) -> Result<Vec<RawFrame>, DatasetError> {
    if stride == 0 {
        return Err(DatasetError::InvalidStride);
    }
    let ingestion = |reason: String| DatasetError::Ingestion {
        path: path.display().to_string(),
        reason,
    };
    let meta = std::fs::metadata(path).map_err(|e| ingestion(e.to_string()))?;
    let frames = if meta.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| ingestion(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && has_extension(p, STILL_EXTENSIONS))
            .collect();
        files.sort();
        files
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0)
            .map(|(index, file)| {
                Image::load(file)
                    .map(|image| RawFrame { index, image })
                    .map_err(|e| ingestion(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        decode_animation(path)
            .map_err(|e| ingestion(e.to_string()))?
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0)
            .map(|(index, image)| RawFrame { index, image })
            .collect()
    };
    if frames.is_empty() {
        return Err(DatasetError::EmptyInput(path.display().to_string()));
    }
    Ok(frames)
}

fn has_extension(path: &Path, allowed: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| allowed.iter().any(|a| a.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

fn decode_animation(path: &Path) -> Result<Vec<Image>, image::ImageError> {
    let open = || File::open(path).map(BufReader::new).map_err(image::ImageError::IoError);
    let rgba_frames = if has_extension(path, &["gif"]) {
        GifDecoder::new(open()?)?.into_frames().collect_frames()?
    } else if has_extension(path, &["png", "apng"]) {
        let decoder = PngDecoder::new(open()?)?;
        if decoder.is_apng()? {
            decoder.apng()?.into_frames().collect_frames()?
        } else {
            return Ok(vec![Image::from_rgb8(&DynamicImage::from_decoder(decoder)?.to_rgb8())]);
        }
    } else {
        return Ok(vec![Image::load(path).map_err(|e| match e {
            crate::raster::RasterError::Read { source, .. } => *source,
            other => image::ImageError::IoError(std::io::Error::other(other.to_string())),
        })?]);
    };
    Ok(rgba_frames
        .into_iter()
        .map(|f| Image::from_rgb8(&DynamicImage::ImageRgba8(f.into_buffer()).to_rgb8()))
        .collect())
}

/// Center-crops to 3:4 and resizes to the canonical 240×320.
pub fn normalize_frame(image: &Image) -> Result<Image, DatasetError> {
    normalize_frame_to(image, FRAME_HEIGHT, FRAME_WIDTH)
}

/// Center-crops `image` to the aspect ratio of `height`×`width`, then
/// bilinearly resizes (half-pixel centers, edge clamping) and clamps values
/// to `[0, 1]`. An image already at the target size passes through unchanged.
pub fn normalize_frame_to(image: &Image, height: usize, width: usize) -> Result<Image, DatasetError> {
    if image.channels() != 3 {
        return Err(DatasetError::Format(image.channels()));
    }
    let (h, w) = (image.height(), image.width());
    if h == 0 || w == 0 {
        return Err(DatasetError::EmptyInput("zero-sized image".into()));
    }
    // wider than target: trim columns, otherwise trim rows
    let (crop_h, crop_w) = if w * height > h * width {
        (h, ((h * width) as f64 / height as f64).round().max(1.0) as usize)
    } else {
        (((w * height) as f64 / width as f64).round().max(1.0) as usize, w)
    };
    let (top, left) = ((h - crop_h) / 2, (w - crop_w) / 2);
    Ok(image.crop(top, left, crop_h, crop_w).resized(height, width).clamp01())
}
