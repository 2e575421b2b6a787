//! Frames, datacubes and the per-frame conversions used by every pipeline.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param_err, shape_err, Result};

/// Luma weights applied to (R, G, B).
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A single-channel H×W real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(shape_err!("plane of {height}x{width} needs {} values, got {}", height * width, data.len()));
        }
        Ok(Plane { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Plane { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Plane { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Plane {
        Plane::from_fn(height, width, |r, c| self.get(top + r, left + c))
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Ordered stack of `n` frames sharing H, W and channel count.
///
/// Each frame is stored planar: channel `c` occupies
/// `frame[c * H * W .. (c + 1) * H * W]`, each plane row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Datacube {
    height: usize,
    width: usize,
    channels: usize,
    frames: Vec<Vec<f64>>,
}

impl Datacube {
    pub fn new(height: usize, width: usize, channels: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(param_err!("channel count must be 1 or 3, got {channels}"));
        }
        if height == 0 || width == 0 {
            return Err(param_err!("frame size must be non-zero, got {height}x{width}"));
        }
        if frames.is_empty() {
            return Err(param_err!("a datacube needs at least one frame"));
        }
        let len = height * width * channels;
        for (t, f) in frames.iter().enumerate() {
            if f.len() != len {
                return Err(shape_err!("frame {t} has {} values, expected {len}", f.len()));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(param_err!("frame {t} contains non-finite values"));
            }
        }
        Ok(Datacube { height, width, channels, frames })
    }

    /// Grayscale cube from a list of equally sized planes.
    pub fn from_planes(planes: Vec<Plane>) -> Result<Self> {
        let first = planes.first().ok_or_else(|| param_err!("a datacube needs at least one frame"))?;
        let (h, w) = (first.height, first.width);
        if let Some((t, p)) = planes.iter().enumerate().find(|(_, p)| p.height != h || p.width != w) {
            return Err(shape_err!("frame {t} is {}x{}, expected {h}x{w}", p.height, p.width));
        }
        Datacube::new(h, w, 1, planes.into_iter().map(Plane::into_vec).collect())
    }

    /// Interleaves single-channel cubes into one multi-channel cube.
    pub fn from_channels(channels: &[Datacube]) -> Result<Self> {
        let first = channels.first().ok_or_else(|| param_err!("no channels given"))?;
        for c in channels {
            if c.channels != 1 {
                return Err(param_err!("from_channels expects single-channel inputs"));
            }
            if c.height != first.height || c.width != first.width || c.len() != first.len() {
                return Err(shape_err!("channel cubes differ in size or length"));
            }
        }
        let frames =
            (0..first.len()).map(|t| channels.iter().flat_map(|c| c.frame(t).iter().copied()).collect()).collect();
        Datacube::new(first.height, first.width, channels.len(), frames)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Number of frames.
    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// All channel planes of frame `t`, concatenated.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn channel_slice(&self, t: usize, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.frames[t][c * n..(c + 1) * n]
    }

    pub fn plane(&self, t: usize, c: usize) -> Plane {
        Plane { height: self.height, width: self.width, data: self.channel_slice(t, c).to_vec() }
    }

    /// Frame-vectors of a grayscale cube.
    pub fn frame_vectors(&self) -> Vec<&[f64]> {
        self.frames.iter().map(Vec::as_slice).collect()
    }

    /// Single-channel cube holding channel `c` of every frame.
    pub fn channel(&self, c: usize) -> Result<Datacube> {
        if c >= self.channels {
            return Err(param_err!("channel {c} out of range for a {}-channel cube", self.channels));
        }
        let frames = (0..self.len()).map(|t| self.channel_slice(t, c).to_vec()).collect();
        Ok(Datacube { height: self.height, width: self.width, channels: 1, frames })
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Datacube> {
        if start >= end || end > self.len() {
            return Err(param_err!("frame range {start}..{end} invalid for {} frames", self.len()));
        }
        Ok(Datacube { frames: self.frames[start..end].to_vec(), ..self.clone_header() })
    }

    /// Spatial crop applied to every frame and channel.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Datacube> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(shape_err!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{} frame",
                self.height,
                self.width
            ));
        }
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let mut out = Vec::with_capacity(height * width * self.channels);
                for c in 0..self.channels {
                    let plane = &f[c * self.pixel_count()..(c + 1) * self.pixel_count()];
                    for r in top..top + height {
                        out.extend_from_slice(&plane[r * self.width + left..r * self.width + left + width]);
                    }
                }
                out
            })
            .collect();
        Ok(Datacube { height, width, channels: self.channels, frames })
    }

    fn clone_header(&self) -> Datacube {
        Datacube { height: self.height, width: self.width, channels: self.channels, frames: Vec::new() }
    }
}

/// Luma conversion of an RGB cube.
pub fn to_grayscale(cube: &Datacube) -> Result<Datacube> {
    if cube.channels() != 3 {
        return Err(param_err!("grayscale conversion needs 3 channels, got {}", cube.channels()));
    }
    let n = cube.pixel_count();
    let frames = cube
        .frames()
        .iter()
        .map(|f| {
            (0..n)
                .map(|i| LUMA_WEIGHTS[0] * f[i] + LUMA_WEIGHTS[1] * f[n + i] + LUMA_WEIGHTS[2] * f[2 * n + i])
                .collect()
        })
        .collect();
    Datacube::new(cube.height(), cube.width(), 1, frames)
}

/// Affine rescale onto [0, 255]; a constant plane maps to all zeros.
pub fn normalize_0_255(plane: &Plane) -> Plane {
    let (lo, hi) = plane.min_max();
    normalize_with_bounds(plane, lo, hi)
}

/// Same affine map as [`normalize_0_255`] but with externally supplied bounds.
pub fn normalize_with_bounds(plane: &Plane, lo: f64, hi: f64) -> Plane {
    let data = if hi > lo {
        let span = hi - lo;
        plane.data.iter().map(|&v| (v - lo) / span * 255.0).collect()
    } else {
        vec![0.0; plane.data.len()]
    };
    Plane { height: plane.height, width: plane.width, data }
}

/// `frame - background`, negatives set to zero.
pub fn subtract_clamped(frame: &[f64], background: &[f64]) -> Vec<f64> {
    frame.iter().zip(background).map(|(s, b)| (s - b).max(0.0)).collect()
}
