//! Online static-background subtraction over a forward-looking sliding
//! window.
//!
//! Frame `s_i` is paired with the background of `W_i = (s_i, …, s_{i+m-1})`,
//! so output lags input by `m - 1` frames; the last `m - 1` frames reuse the
//! background of the final full window. The kernel scale is fixed by the
//! first window and the kernel is updated one row and column per slide.

use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::error::{param_err, shape_err, Result};
use crate::frame::{subtract_clamped, Datacube, Plane};
use crate::histogram::{apply_gray_threshold, build_histogram, threshold_gray};
use crate::linalg::SquareMatrix;
use crate::mask::BinaryMask;
use crate::spectral::{
    background_from_kernel, gaussian_kernel, kernel_entry, resolve_epsilon, BackgroundFrame, KernelMatrix,
    SpectralBasis,
};

/// The `m` most recent frame-vectors and their cached kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow {
    frames: Vec<Vec<f64>>,
    kernel: KernelMatrix,
}

impl SlidingWindow {
    pub fn new(frames: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        let kernel = gaussian_kernel(&frames, epsilon)?;
        Ok(SlidingWindow { frames, kernel })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.kernel.epsilon
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    /// Drops the oldest frame and appends `incoming`. Only the new kernel
    /// row and column are evaluated; the rest shifts up and left.
    pub fn slide(&mut self, incoming: Vec<f64>) -> Result<()> {
        let expected = self.frames[0].len();
        if incoming.len() != expected {
            return Err(shape_err!("incoming frame has {} values, window frames have {expected}", incoming.len()));
        }
        let m = self.frames.len();
        let eps = self.kernel.epsilon;
        self.frames.remove(0);
        let mut w = SquareMatrix::identity(m);
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                w.set(i, j, self.kernel.w.get(i + 1, j + 1));
            }
        }
        for (j, f) in self.frames.iter().enumerate() {
            let v = kernel_entry(f, &incoming, eps);
            w.set(m - 1, j, v);
            w.set(j, m - 1, v);
        }
        self.frames.push(incoming);
        self.kernel.w = w;
        Ok(())
    }

    pub fn background(&self, height: usize, width: usize, eta: usize) -> Result<(BackgroundFrame, SpectralBasis)> {
        background_from_kernel(&self.frames, &self.kernel, height, width, eta)
    }
}

/// One background per input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSequence {
    pub backgrounds: Vec<BackgroundFrame>,
}

/// A frame leaving the stream with its background and clamped residual.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    pub index: usize,
    /// Index of the window whose background this frame received.
    pub window: usize,
    pub background: BackgroundFrame,
    pub residual: Plane,
}

/// Incremental form of the static pipeline: push frames, receive residuals
/// in input order once their window is complete.
#[derive(Debug, Clone)]
pub struct SbsdbStream {
    config: PipelineConfig,
    height: usize,
    width: usize,
    warmup: Vec<Vec<f64>>,
    window: Option<SlidingWindow>,
    windows_done: usize,
    last_background: Option<BackgroundFrame>,
}

impl SbsdbStream {
    pub fn new(height: usize, width: usize, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(SbsdbStream {
            config: config.clone(),
            height,
            width,
            warmup: Vec::new(),
            window: None,
            windows_done: 0,
            last_background: None,
        })
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.window.as_ref().map(SlidingWindow::epsilon)
    }

    pub fn push(&mut self, frame: Vec<f64>) -> Result<Option<StreamFrame>> {
        if frame.len() != self.height * self.width {
            return Err(shape_err!("frame has {} values, stream expects {}x{}", frame.len(), self.height, self.width));
        }
        match &mut self.window {
            None => {
                self.warmup.push(frame);
                if self.warmup.len() < self.config.window {
                    return Ok(None);
                }
                let frames = core::mem::take(&mut self.warmup);
                let eps = resolve_epsilon(self.config.epsilon, &frames)?;
                self.window = Some(SlidingWindow::new(frames, eps)?);
            }
            Some(w) => w.slide(frame)?,
        }
        self.emit_head().map(Some)
    }

    fn emit_head(&mut self) -> Result<StreamFrame> {
        let window = self.window.as_ref().expect("window initialised before emit");
        let (background, _) = window.background(self.height, self.width, self.config.eta)?;
        let residual = subtract_clamped(&window.frames()[0], background.normalized.as_slice());
        let index = self.windows_done;
        self.windows_done += 1;
        self.last_background = Some(background.clone());
        Ok(StreamFrame { index, window: index, background, residual: Plane::new(self.height, self.width, residual)? })
    }

    /// Flushes the trailing `m - 1` frames with the last window's background.
    pub fn finish(self) -> Result<Vec<StreamFrame>> {
        let (window, background) = match (self.window, self.last_background) {
            (Some(w), Some(b)) => (w, b),
            _ => {
                return Err(param_err!(
                    "sequence has {} frames but the window size m is {}",
                    self.warmup.len(),
                    self.config.window
                ))
            }
        };
        let last = self.windows_done - 1;
        window.frames()[1..]
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let residual = subtract_clamped(f, background.normalized.as_slice());
                Ok(StreamFrame {
                    index: self.windows_done + k,
                    window: last,
                    background: background.clone(),
                    residual: Plane::new(self.height, self.width, residual)?,
                })
            })
            .collect()
    }
}

fn check_input(cube: &Datacube, config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    if cube.channels() != 1 {
        return Err(param_err!("static pipeline needs a grayscale cube, got {} channels", cube.channels()));
    }
    if cube.len() < config.window {
        return Err(param_err!("sequence has {} frames but the window size m is {}", cube.len(), config.window));
    }
    Ok(())
}

fn stream_cube(cube: &Datacube, config: &PipelineConfig) -> Result<Vec<StreamFrame>> {
    check_input(cube, config)?;
    let mut stream = SbsdbStream::new(cube.height(), cube.width(), config)?;
    let mut out = Vec::with_capacity(cube.len());
    for f in cube.frames() {
        out.extend(stream.push(f.clone())?);
    }
    out.extend(stream.finish()?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbsdbOutput {
    pub backgrounds: BackgroundSequence,
    pub residuals: Datacube,
    pub thresholds: Vec<u8>,
    pub masks: Vec<BinaryMask>,
}

/// Threshold of one clamped residual and the resulting mask.
pub fn threshold_residual(residual: &Plane, mu: f64) -> Result<(u8, BinaryMask)> {
    let th = threshold_gray(&build_histogram(residual.as_slice())?, mu);
    Ok((th, apply_gray_threshold(residual, th)))
}

pub fn run_sbsdb(cube: &Datacube, config: &PipelineConfig) -> Result<SbsdbOutput> {
    let frames = stream_cube(cube, config)?;
    let mut thresholds = Vec::with_capacity(frames.len());
    let mut masks = Vec::with_capacity(frames.len());
    for f in &frames {
        let (th, mask) = threshold_residual(&f.residual, config.mu)?;
        thresholds.push(th);
        masks.push(mask);
    }
    let residuals =
        Datacube::new(cube.height(), cube.width(), 1, frames.iter().map(|f| f.residual.as_slice().to_vec()).collect())?;
    let backgrounds = BackgroundSequence { backgrounds: frames.into_iter().map(|f| f.background).collect() };
    Ok(SbsdbOutput { backgrounds, residuals, thresholds, masks })
}

/// The clamped residual sequence, without thresholding.
pub fn run_sbsdb_no_threshold(cube: &Datacube, config: &PipelineConfig) -> Result<Datacube> {
    let frames = stream_cube(cube, config)?;
    Datacube::new(cube.height(), cube.width(), 1, frames.into_iter().map(|f| f.residual.into_vec()).collect())
}
