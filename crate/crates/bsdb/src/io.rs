//! Numbered image sequences, mask sequences and model files.

use std::fs;
use std::path::{Path, PathBuf};

use bsdb_core::dynamic::{decode_model, encode_model, DynamicBackground};
use bsdb_core::{BinaryMask, Datacube, Plane};
use image::{GrayImage, ImageBuffer, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_PATTERN: &str = "frame_%05d.png";
pub const DEFAULT_MASK_PATTERN: &str = "mask_%05d.png";

/// Where a sequence lives and how its files are named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub dir: PathBuf,
    /// File name with one `%d` or `%0Nd` index placeholder.
    pub pattern: String,
    pub channels: usize,
    pub truth_pattern: Option<String>,
}

impl SequenceManifest {
    pub fn new(dir: impl Into<PathBuf>, channels: usize) -> Self {
        SequenceManifest { dir: dir.into(), pattern: DEFAULT_FRAME_PATTERN.into(), channels, truth_pattern: None }
    }
}

/// A file-name pattern split around its index placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPattern {
    prefix: String,
    width: usize,
    suffix: String,
}

impl IndexPattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::Sequence(format!("pattern {pattern:?} needs exactly one %d or %0Nd placeholder"));
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        let d = rest.find('d').ok_or_else(bad)?;
        let spec = &rest[..d];
        let width = if spec.is_empty() {
            0
        } else if spec.starts_with('0') && spec.len() > 1 && spec.bytes().all(|b| b.is_ascii_digit()) {
            spec.parse().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        let suffix = &rest[d + 1..];
        if suffix.contains('%') {
            return Err(bad());
        }
        Ok(IndexPattern { prefix: pattern[..start].into(), width, suffix: suffix.into() })
    }

    pub fn format(&self, index: usize) -> String {
        format!("{}{:0width$}{}", self.prefix, index, self.suffix, width = self.width)
    }

    /// Index encoded in `name`, if it follows the pattern.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let digits = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if digits.is_empty() || digits.len() < self.width || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
}

/// Paths of a contiguous numbered sequence starting at index 0.
pub fn sequence_paths(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let pat = IndexPattern::parse(pattern)?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(|n| pat.index_of(n)) {
            indices.push(i);
        }
    }
    if indices.is_empty() {
        return Err(Error::Sequence(format!("no files matching {pattern:?} in {}", dir.display())));
    }
    indices.sort_unstable();
    indices.dedup();
    if let Some(gap) = (0..indices.len()).find(|&k| indices[k] != k) {
        return Err(Error::Sequence(format!(
            "{}: {} is missing; frames must be numbered contiguously from 0 (found up to index {})",
            dir.display(),
            pat.format(gap),
            indices[indices.len() - 1]
        )));
    }
    Ok(indices.iter().map(|&i| dir.join(pat.format(i))).collect())
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| Error::Image { path: path.into(), message: e.to_string() })
}

/// One frame as planar values in [0, 255].
pub fn read_frame(path: &Path, channels: usize) -> Result<(usize, usize, Vec<f64>)> {
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match channels {
        1 => img.to_luma8().into_raw().into_iter().map(f64::from).collect(),
        3 => {
            let raw = img.to_rgb8().into_raw();
            (0..3).flat_map(|c| raw.iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect::<Vec<_>>()).collect()
        }
        other => return Err(bsdb_core::Error::Parameter(format!("channel count must be 1 or 3, got {other}")).into()),
    };
    Ok((h, w, data))
}

pub fn load_sequence(manifest: &SequenceManifest) -> Result<Datacube> {
    let paths = sequence_paths(&manifest.dir, &manifest.pattern)?;
    let mut frames = Vec::with_capacity(paths.len());
    let mut size = None;
    for path in &paths {
        let (h, w, data) = read_frame(path, manifest.channels)?;
        match size {
            None => size = Some((h, w)),
            Some(s) if s != (h, w) => {
                return Err(bsdb_core::Error::Shape(format!(
                    "{} is {h}x{w}, earlier frames are {}x{}",
                    path.display(),
                    s.0,
                    s.1
                ))
                .into())
            }
            Some(_) => {}
        }
        frames.push(data);
    }
    let (h, w) = size.expect("sequence_paths returns at least one path");
    Ok(Datacube::new(h, w, manifest.channels, frames)?)
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

/// Output is always PNG, whatever the file extension.
fn write_png<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    create_parent(path)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.into(), message: e.to_string() })
}

/// Writes a plane as 8-bit grayscale, rounding and clamping to [0, 255].
pub fn save_plane(plane: &Plane, path: &Path) -> Result<()> {
    let img: GrayImage = ImageBuffer::from_raw(
        plane.width() as u32,
        plane.height() as u32,
        plane.as_slice().iter().map(|&v| to_byte(v)).collect(),
    )
    .expect("buffer length matches plane size");
    write_png(&img, path)
}

/// Writes frame `t` of a cube as a grayscale or RGB image.
pub fn save_frame(cube: &Datacube, t: usize, path: &Path) -> Result<()> {
    if cube.channels() == 1 {
        return save_plane(&cube.plane(t, 0), path);
    }
    let px = cube.pixel_count();
    let f = cube.frame(t);
    let raw: Vec<u8> = (0..px).flat_map(|i| (0..3).map(move |c| to_byte(f[c * px + i]))).collect();
    let img: RgbImage = ImageBuffer::from_raw(cube.width() as u32, cube.height() as u32, raw).expect("buffer length");
    write_png(&img, path)
}

pub fn save_sequence(cube: &Datacube, dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let pat = IndexPattern::parse(pattern)?;
    (0..cube.len())
        .map(|t| {
            let path = dir.join(pat.format(t));
            save_frame(cube, t, &path).map(|_| path)
        })
        .collect()
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let img: GrayImage =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, mask.to_bytes()).expect("buffer length");
    write_png(&img, path)
}

pub fn save_masks(masks: &[BinaryMask], dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let pat = IndexPattern::parse(pattern)?;
    masks
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let path = dir.join(pat.format(t));
            save_mask(m, &path).map(|_| path)
        })
        .collect()
}

/// Reads a mask sequence; gray levels of 128 and above are foreground.
pub fn load_masks(dir: &Path, pattern: &str) -> Result<Vec<BinaryMask>> {
    sequence_paths(dir, pattern)?
        .iter()
        .map(|path| {
            let img = open_image(path)?.to_luma8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            Ok(BinaryMask::from_bits(h, w, img.into_raw().into_iter().map(|v| v >= 128).collect()))
        })
        .collect()
}

pub fn write_model(model: &DynamicBackground, path: &Path) -> Result<()> {
    create_parent(path)?;
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<DynamicBackground> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_model(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_parsing() {
        let p = IndexPattern::parse("frame_%05d.png").unwrap();
        assert_eq!(p.format(42), "frame_00042.png");
        assert_eq!(p.index_of("frame_00042.png"), Some(42));
        assert_eq!(p.index_of("frame_42.png"), None);
        assert_eq!(p.index_of("frame_123456.png"), Some(123456));
        assert_eq!(p.index_of("other_00042.png"), None);
        let q = IndexPattern::parse("%d.png").unwrap();
        assert_eq!(q.format(7), "7.png");
        for bad in ["frame.png", "%5d.png", "%d_%d.png", "%x.png"] {
            assert!(IndexPattern::parse(bad).is_err(), "{bad}");
        }
    }
}
