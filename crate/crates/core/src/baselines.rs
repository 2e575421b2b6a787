//! Classical comparison methods. Each produces one mask per frame; for
//! colour cubes a pixel is foreground when any channel exceeds the
//! threshold.

use alloc::vec::Vec;

use crate::error::{param_err, shape_err, Result};
use crate::frame::Datacube;
use crate::linalg::{dot, norm, symmetric_eigen, SquareMatrix};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BaselineMethod {
    #[default]
    FrameDiff,
    MeanThreshold,
    TemporalMedian,
    EigenBackground,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [
        BaselineMethod::FrameDiff,
        BaselineMethod::MeanThreshold,
        BaselineMethod::TemporalMedian,
        BaselineMethod::EigenBackground,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::FrameDiff => "frame_diff",
            BaselineMethod::MeanThreshold => "mean_threshold",
            BaselineMethod::TemporalMedian => "temporal_median",
            BaselineMethod::EigenBackground => "eigen_background",
        }
    }
}

impl core::str::FromStr for BaselineMethod {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| param_err!("unknown baseline method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub threshold: f64,
    /// Trailing window length of the temporal median.
    pub history: usize,
    /// Eigenvectors retained by the eigen-background model.
    pub eigen_count: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { method: BaselineMethod::FrameDiff, threshold: 25.0, history: 5, eigen_count: 3 }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(param_err!("baseline threshold must be non-negative, got {}", self.threshold));
        }
        if self.history == 0 {
            return Err(param_err!("baseline history must be at least 1 frame"));
        }
        if self.eigen_count == 0 {
            return Err(param_err!("eigen_count must be at least 1"));
        }
        Ok(())
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold >= 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(param_err!("threshold must be non-negative, got {threshold}"))
    }
}

/// Foreground where `|frame - reference| > threshold` in any channel.
fn deviation_mask(cube: &Datacube, frame: &[f64], reference: &[f64], threshold: f64) -> BinaryMask {
    let px = cube.pixel_count();
    let bits = (0..px)
        .map(|i| (0..cube.channels()).any(|c| libm::fabs(frame[c * px + i] - reference[c * px + i]) > threshold))
        .collect();
    BinaryMask::from_bits(cube.height(), cube.width(), bits)
}

fn check_compatible(train: &Datacube, test: &Datacube) -> Result<()> {
    if (train.height(), train.width(), train.channels()) != (test.height(), test.width(), test.channels()) {
        return Err(shape_err!(
            "training frames are {}x{}x{}, test frames are {}x{}x{}",
            train.height(),
            train.width(),
            train.channels(),
            test.height(),
            test.width(),
            test.channels()
        ));
    }
    Ok(())
}

/// Each frame against its predecessor; the first mask is empty.
pub fn frame_diff(cube: &Datacube, threshold: f64) -> Result<Vec<BinaryMask>> {
    check_threshold(threshold)?;
    if cube.len() < 2 {
        return Err(param_err!("frame difference needs at least 2 frames, got {}", cube.len()));
    }
    let mut out = alloc::vec![BinaryMask::empty(cube.height(), cube.width())];
    for t in 1..cube.len() {
        out.push(deviation_mask(cube, cube.frame(t), cube.frame(t - 1), threshold));
    }
    Ok(out)
}

/// Per-pixel mean of `train`.
pub fn mean_frame(train: &Datacube) -> Vec<f64> {
    let mut mean = alloc::vec![0.0; train.frame(0).len()];
    for f in train.frames() {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let n = train.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Background when within `threshold` of the training mean.
pub fn mean_threshold(train: &Datacube, test: &Datacube, threshold: f64) -> Result<Vec<BinaryMask>> {
    check_threshold(threshold)?;
    check_compatible(train, test)?;
    let mean = mean_frame(train);
    Ok(test.frames().iter().map(|f| deviation_mask(test, f, &mean, threshold)).collect())
}

/// Lower median of `values`, reordering them in place.
pub fn lower_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

/// Each frame against the per-pixel lower median of the `history` frames
/// before it. Frame 0 has no history and is compared with itself.
pub fn temporal_median(cube: &Datacube, history: usize, threshold: f64) -> Result<Vec<BinaryMask>> {
    check_threshold(threshold)?;
    if history == 0 {
        return Err(param_err!("median history must be at least 1 frame"));
    }
    let len = cube.frame(0).len();
    let mut scratch = Vec::with_capacity(history);
    (0..cube.len())
        .map(|t| {
            let window = if t == 0 { 0..1 } else { t.saturating_sub(history)..t };
            let median: Vec<f64> = (0..len)
                .map(|i| {
                    scratch.clear();
                    scratch.extend(window.clone().map(|s| cube.frame(s)[i]));
                    lower_median(&mut scratch)
                })
                .collect();
            Ok(deviation_mask(cube, cube.frame(t), &median, threshold))
        })
        .collect()
}

/// Mean frame plus an orthonormal basis of the leading principal directions
/// of the training frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBackground {
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl EigenBackground {
    /// Fits on `train` through the frames' Gram matrix, which has the same
    /// non-zero spectrum as the pixel covariance but only n×n entries.
    /// Directions with negligible variance are dropped, so the basis may
    /// hold fewer than `eigen_count` vectors.
    pub fn fit(train: &Datacube, eigen_count: usize) -> Result<Self> {
        if eigen_count == 0 {
            return Err(param_err!("eigen_count must be at least 1"));
        }
        if train.len() < eigen_count {
            return Err(param_err!(
                "eigen-background needs at least eigen_count ({eigen_count}) training frames, got {}",
                train.len()
            ));
        }
        let mean = mean_frame(train);
        let centered: Vec<Vec<f64>> =
            train.frames().iter().map(|f| f.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
        let n = centered.len();
        let mut gram = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let g = dot(&centered[i], &centered[j]);
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        let eig = symmetric_eigen(&gram)?;
        let scale = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let floor = scale * 1e-12 * n as f64;
        let mut basis = Vec::new();
        let mut eigenvalues = Vec::new();
        for (k, &lambda) in eig.values.iter().enumerate().take(eigen_count) {
            if lambda <= floor || lambda <= 0.0 {
                break;
            }
            let mut phi = alloc::vec![0.0; mean.len()];
            for (t, row) in centered.iter().enumerate() {
                let u = eig.vectors[k][t];
                for (p, v) in phi.iter_mut().zip(row) {
                    *p += u * v;
                }
            }
            let len = norm(&phi);
            phi.iter_mut().for_each(|p| *p /= len);
            basis.push(phi);
            eigenvalues.push(lambda / n as f64);
        }
        Ok(EigenBackground { mean, basis, eigenvalues })
    }

    /// Projects onto the retained eigenspace and back.
    pub fn reconstruct(&self, frame: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = frame.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let mut out = self.mean.clone();
        for phi in &self.basis {
            let c = dot(phi, &centered);
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
        out
    }
}

pub fn eigen_background(
    train: &Datacube,
    test: &Datacube,
    eigen_count: usize,
    threshold: f64,
) -> Result<Vec<BinaryMask>> {
    check_threshold(threshold)?;
    check_compatible(train, test)?;
    let model = EigenBackground::fit(train, eigen_count)?;
    Ok(test.frames().iter().map(|f| deviation_mask(test, f, &model.reconstruct(f), threshold)).collect())
}

/// Runs the configured method. Methods without a training stage ignore
/// `train`.
pub fn run_baseline(config: &BaselineConfig, train: &Datacube, test: &Datacube) -> Result<Vec<BinaryMask>> {
    config.validate()?;
    match config.method {
        BaselineMethod::FrameDiff => frame_diff(test, config.threshold),
        BaselineMethod::MeanThreshold => mean_threshold(train, test, config.threshold),
        BaselineMethod::TemporalMedian => temporal_median(test, config.history, config.threshold),
        BaselineMethod::EigenBackground => eigen_background(train, test, config.eigen_count, config.threshold),
    }
}
