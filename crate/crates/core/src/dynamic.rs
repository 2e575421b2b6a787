//! Dynamic-background subtraction: iterative off-line training on a
//! foreground-free sequence, then grayscale and per-channel RGB
//! classification fused by graph search.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::error::{param_err, shape_err, Error, Result};
use crate::frame::{normalize_0_255, subtract_clamped, to_grayscale, Datacube, Plane};
use crate::histogram::{apply_rgb_threshold, build_histogram, threshold_rgb_two_sided};
use crate::mask::{dfs_fuse, BinaryMask};
use crate::spectral::{extract_background, BackgroundFrame};
use crate::window::{run_sbsdb_no_threshold, threshold_residual};

/// Mutable state of the training loop.
#[derive(Debug, Clone)]
pub struct TrainingState {
    residual: Datacube,
    accumulated: Vec<f64>,
    iteration: usize,
    rho: f64,
    max_iterations: usize,
    clamp: bool,
    trace: Vec<f64>,
}

/// Result of training one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBackground {
    /// Sum of the raw backgrounds of all iterations.
    pub raw: Plane,
    pub normalized: Plane,
    pub iterations: usize,
    /// Non-positive pixel fraction of the residual cube after each iteration.
    pub trace: Vec<f64>,
}

impl TrainingState {
    /// `clamp` zeroes negative residuals after each subtraction (grayscale).
    pub fn new(bgd: &Datacube, rho: f64, max_iterations: usize, clamp: bool) -> Result<Self> {
        if bgd.channels() != 1 {
            return Err(param_err!("training works on one channel at a time, got {}", bgd.channels()));
        }
        if bgd.len() < 2 {
            return Err(param_err!("training needs at least 2 background frames, got {}", bgd.len()));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(param_err!("rho must lie in (0, 1], got {rho}"));
        }
        if max_iterations == 0 {
            return Err(param_err!("max_iterations must be at least 1"));
        }
        Ok(TrainingState {
            accumulated: vec![0.0; bgd.pixel_count()],
            residual: bgd.clone(),
            iteration: 0,
            rho,
            max_iterations,
            clamp,
            trace: Vec::new(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn residual(&self) -> &Datacube {
        &self.residual
    }

    pub fn accumulated(&self) -> &[f64] {
        &self.accumulated
    }

    pub fn non_positive_fraction(&self) -> f64 {
        let total = self.residual.len() * self.residual.pixel_count();
        let hits: usize = self.residual.frames().iter().map(|f| f.iter().filter(|&&v| v <= 0.0).count()).sum();
        hits as f64 / total as f64
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.max_iterations || self.trace.last().is_some_and(|&fraction| fraction >= self.rho)
    }

    /// One iteration: extract, subtract the normalized background from every
    /// frame, add the raw background to the accumulator.
    pub fn step(&mut self, config: &PipelineConfig) -> Result<BackgroundFrame> {
        let bg = extract_background(&self.residual, config)?;
        let b = bg.normalized.as_slice();
        let frames = self
            .residual
            .frames()
            .iter()
            .map(|f| if self.clamp { subtract_clamped(f, b) } else { f.iter().zip(b).map(|(s, b)| s - b).collect() })
            .collect();
        self.residual = Datacube::new(self.residual.height(), self.residual.width(), 1, frames)?;
        for (acc, r) in self.accumulated.iter_mut().zip(bg.raw.as_slice()) {
            *acc += r;
        }
        self.iteration += 1;
        let fraction = self.non_positive_fraction();
        self.trace.push(fraction);
        Ok(bg)
    }

    pub fn finish(self) -> Result<TrainedBackground> {
        let raw = Plane::new(self.residual.height(), self.residual.width(), self.accumulated)?;
        Ok(TrainedBackground { normalized: normalize_0_255(&raw), raw, iterations: self.iteration, trace: self.trace })
    }
}

fn train_channel(bgd: &Datacube, config: &PipelineConfig, clamp: bool) -> Result<TrainedBackground> {
    let mut state = TrainingState::new(bgd, config.rho, config.max_iterations, clamp)?;
    while !state.is_done() {
        state.step(config)?;
    }
    state.finish()
}

/// Iterative training on a grayscale background sequence.
pub fn train_dynamic_background(bgd: &Datacube, config: &PipelineConfig) -> Result<TrainedBackground> {
    if bgd.is_empty() {
        return Err(param_err!("empty background sequence"));
    }
    train_channel(bgd, config, true)
}

/// Independent training per RGB channel; residuals keep their sign.
pub fn train_rgb(bgd: &Datacube, config: &PipelineConfig) -> Result<[TrainedBackground; 3]> {
    if bgd.channels() != 3 {
        return Err(param_err!("RGB training needs 3 channels, got {}", bgd.channels()));
    }
    let r = train_channel(&bgd.channel(0)?, config, false)?;
    let g = train_channel(&bgd.channel(1)?, config, false)?;
    let b = train_channel(&bgd.channel(2)?, config, false)?;
    Ok([r, g, b])
}

/// Normalized trained backgrounds consumed by classification.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicBackground {
    pub gray: Plane,
    pub rgb: [Plane; 3],
}

impl DynamicBackground {
    pub fn height(&self) -> usize {
        self.gray.height()
    }

    pub fn width(&self) -> usize {
        self.gray.width()
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> DynamicBackground {
        DynamicBackground {
            gray: self.gray.crop(top, left, height, width),
            rgb: self.rgb.clone().map(|p| p.crop(top, left, height, width)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbsdbTraining {
    pub gray: TrainedBackground,
    pub rgb: [TrainedBackground; 3],
}

impl DbsdbTraining {
    pub fn model(&self) -> DynamicBackground {
        DynamicBackground { gray: self.gray.normalized.clone(), rgb: self.rgb.clone().map(|t| t.normalized) }
    }
}

/// Both training phases on an RGB background sequence. The grayscale phase
/// trains on the clamped residuals of the static pipeline.
pub fn train_dbsdb(bgd: &Datacube, config: &PipelineConfig) -> Result<DbsdbTraining> {
    config.validate()?;
    let gray = to_grayscale(bgd)?;
    let residuals = run_sbsdb_no_threshold(&gray, config)?;
    Ok(DbsdbTraining { gray: train_dynamic_background(&residuals, config)?, rgb: train_rgb(bgd, config)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbsdbOutput {
    pub gray_masks: Vec<BinaryMask>,
    pub rgb_masks: Vec<BinaryMask>,
    pub fused: Vec<BinaryMask>,
}

fn check_model(rtd: &Datacube, model: &DynamicBackground) -> Result<()> {
    if rtd.channels() != 3 {
        return Err(param_err!("classification needs an RGB sequence, got {} channels", rtd.channels()));
    }
    if rtd.height() != model.height() || rtd.width() != model.width() {
        return Err(shape_err!(
            "model is {}x{} but frames are {}x{}",
            model.height(),
            model.width(),
            rtd.height(),
            rtd.width()
        ));
    }
    Ok(())
}

/// Grayscale classification: static residuals (`passes` times), minus the
/// trained grayscale background, clamped and thresholded.
pub fn gray_phase(rtd: &Datacube, model: &DynamicBackground, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    check_model(rtd, model)?;
    config.validate()?;
    let mut residual = to_grayscale(rtd)?;
    for _ in 0..config.passes {
        residual = run_sbsdb_no_threshold(&residual, config)?;
    }
    residual
        .frames()
        .iter()
        .map(|f| {
            let s = Plane::new(rtd.height(), rtd.width(), subtract_clamped(f, model.gray.as_slice()))?;
            threshold_residual(&s, config.mu).map(|(_, m)| m)
        })
        .collect()
}

/// RGB classification: per channel subtract, rescale, two-sided threshold,
/// then OR across channels.
pub fn rgb_phase(rtd: &Datacube, model: &DynamicBackground, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    check_model(rtd, model)?;
    config.validate()?;
    (0..rtd.len())
        .map(|t| {
            let mut planes = Vec::with_capacity(3);
            let mut thresholds = [(0u8, 0u8); 3];
            for (c, th) in thresholds.iter_mut().enumerate() {
                let diff: Vec<f64> =
                    rtd.channel_slice(t, c).iter().zip(model.rgb[c].as_slice()).map(|(s, b)| s - b).collect();
                let plane = normalize_0_255(&Plane::new(rtd.height(), rtd.width(), diff)?);
                *th = threshold_rgb_two_sided(&build_histogram(plane.as_slice())?, config.mu);
                planes.push(plane);
            }
            let planes: [Plane; 3] = planes.try_into().expect("three channel planes");
            apply_rgb_threshold(&planes, &thresholds)
        })
        .collect()
}

pub fn run_dbsdb(rtd: &Datacube, model: &DynamicBackground, config: &PipelineConfig) -> Result<DbsdbOutput> {
    let gray_masks = gray_phase(rtd, model, config)?;
    let rgb_masks = rgb_phase(rtd, model, config)?;
    let fused = gray_masks.iter().zip(&rgb_masks).map(|(g, r)| dfs_fuse(g, r)).collect::<Result<_>>()?;
    Ok(DbsdbOutput { gray_masks, rgb_masks, fused })
}

const MODEL_MAGIC: &[u8; 4] = b"BSDB";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Model file layout, all little-endian:
/// `"BSDB"`, version `u32`, height `u32`, width `u32`, then the gray, R, G
/// and B backgrounds as row-major `f64` matrices.
pub fn encode_model(model: &DynamicBackground) -> Vec<u8> {
    let planes = [&model.gray, &model.rgb[0], &model.rgb[1], &model.rgb[2]];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * 8 * model.gray.as_slice().len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.height() as u32).to_le_bytes());
    out.extend_from_slice(&(model.width() as u32).to_le_bytes());
    for p in planes {
        for v in p.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<DynamicBackground> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MODEL_MAGIC {
        return Err(param_err!("not a background model file"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != MODEL_VERSION {
        return Err(param_err!("unsupported model version {version}"));
    }
    let (h, w) = (word(8) as usize, word(12) as usize);
    let n = h * w;
    if h == 0 || w == 0 || bytes.len() != HEADER_LEN + 4 * 8 * n {
        return Err(shape_err!("model body has {} bytes, header declares {h}x{w}", bytes.len() - HEADER_LEN));
    }
    let mut planes = bytes[HEADER_LEN..].chunks_exact(8 * n).map(|chunk| {
        let data = chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        Plane::new(h, w, data)
    });
    let mut next = || planes.next().ok_or_else(|| Error::Shape("truncated model".into()))?;
    Ok(DynamicBackground { gray: next()?, rgb: [next()?, next()?, next()?] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize) -> Vec<f64> {
        (0..h * w).map(|i| (i % w) as f64 * 255.0 / (w - 1) as f64).collect()
    }

    #[test]
    fn all_zero_background_stops_at_once() {
        let bgd = Datacube::new(4, 4, 1, vec![vec![0.0; 16]; 6]).unwrap();
        let t = train_dynamic_background(&bgd, &PipelineConfig::default()).unwrap();
        assert_eq!(t.iterations, 1);
        assert!(t.normalized.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn static_full_range_scene_is_reproduced() {
        let scene = gradient(6, 8);
        let bgd = Datacube::new(6, 8, 1, vec![scene.clone(); 10]).unwrap();
        let t = train_dynamic_background(&bgd, &PipelineConfig::default()).unwrap();
        assert!(t.iterations <= 2);
        for (a, b) in t.normalized.as_slice().iter().zip(&scene) {
            assert!((a - b).abs() <= 2.0);
        }
    }

    #[test]
    fn accumulator_is_sum_of_iteration_backgrounds() {
        let frames: Vec<Vec<f64>> =
            (0..8).map(|t| (0..12).map(|i| ((i * 37 + t * 11) % 29) as f64 * 7.0).collect()).collect();
        let bgd = Datacube::new(3, 4, 1, frames).unwrap();
        let config = PipelineConfig { rho: 1.0, max_iterations: 4, ..Default::default() };
        let mut state = TrainingState::new(&bgd, config.rho, config.max_iterations, true).unwrap();
        let mut sum = vec![0.0; 12];
        while !state.is_done() {
            let bg = state.step(&config).unwrap();
            for (s, r) in sum.iter_mut().zip(bg.raw.as_slice()) {
                *s += r;
            }
        }
        assert_eq!(state.accumulated(), sum.as_slice());
        assert!(state.iteration() <= 4);
    }

    #[test]
    fn rgb_training_contracts() {
        let gray = Datacube::new(2, 2, 1, vec![vec![1.0; 4]; 3]).unwrap();
        assert!(matches!(train_rgb(&gray, &PipelineConfig::default()), Err(Error::Parameter(_))));

        let constant = Datacube::new(2, 2, 3, vec![vec![50.0; 12]; 4]).unwrap();
        let t = train_rgb(&constant, &PipelineConfig::default()).unwrap();
        for c in &t {
            assert!(c.normalized.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn model_round_trip_and_rejections() {
        let p = |v: f64| Plane::filled(2, 3, v);
        let model = DynamicBackground { gray: p(1.5), rgb: [p(2.0), p(255.0), p(0.0)] };
        let bytes = encode_model(&model);
        assert_eq!(bytes.len(), 16 + 4 * 6 * 8);
        assert_eq!(&bytes[..4], b"BSDB");
        assert_eq!(decode_model(&bytes).unwrap(), model);
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[4] = 9;
        assert!(decode_model(&wrong).is_err());
    }

    #[test]
    fn classification_checks_model_size() {
        let p = |v: f64| Plane::filled(2, 2, v);
        let model = DynamicBackground { gray: p(0.0), rgb: [p(0.0), p(0.0), p(0.0)] };
        let rtd = Datacube::new(3, 3, 3, vec![vec![0.0; 27]; 6]).unwrap();
        assert!(matches!(run_dbsdb(&rtd, &model, &PipelineConfig::default()), Err(Error::Shape(_))));
    }
}
