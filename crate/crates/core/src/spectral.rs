//! Diffusion bases over the frames of a datacube.
//!
//! Frames are the graph vertices: a Gaussian kernel links every pair of
//! frame-vectors, row normalization turns it into a Markov matrix, and the
//! right eigenvectors of that matrix form the basis onto which each
//! hyperpixel (one pixel's trajectory through time) is projected. The first
//! projection coordinate of every hyperpixel, laid out as an image, is the
//! background.

use alloc::vec::Vec;

use crate::config::{Epsilon, PipelineConfig};
use crate::error::{param_err, shape_err, Error, Result};
use crate::frame::{normalize_0_255, Datacube, Plane};
use crate::linalg::{dot, symmetric_eigen, SquareMatrix};

/// Symmetric kernel over frames with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub w: SquareMatrix,
    pub epsilon: f64,
}

/// Row-stochastic transition matrix and the kernel row sums it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMatrix {
    pub p: SquareMatrix,
    pub degrees: Vec<f64>,
}

/// Eigen-triplets of a Markov matrix ordered by descending `|λ|`.
///
/// Right vectors have unit Euclidean length and their largest-magnitude
/// component positive. Left vectors are scaled so that `ψ_k · ξ_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub right_vectors: Vec<Vec<f64>>,
    pub left_vectors: Vec<Vec<f64>>,
}

/// `eta` coordinates per hyperpixel, stored hyperpixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    eta: usize,
    coords: Vec<f64>,
}

impl Projection {
    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.eta
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates of hyperpixel `i`.
    pub fn g(&self, i: usize) -> &[f64] {
        &self.coords[i * self.eta..(i + 1) * self.eta]
    }

    /// Coordinate `k` of every hyperpixel.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.coords.iter().skip(k).step_by(self.eta).copied().collect()
    }
}

/// Raw first-coordinate image and its [0, 255] rescale.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFrame {
    pub raw: Plane,
    pub normalized: Plane,
}

impl BackgroundFrame {
    pub fn from_raw(raw: Plane) -> Self {
        let normalized = normalize_0_255(&raw);
        BackgroundFrame { raw, normalized }
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Single kernel entry `exp(-|a - b|^2 / epsilon)`.
#[inline]
pub fn kernel_entry(a: &[f64], b: &[f64], epsilon: f64) -> f64 {
    libm::exp(-squared_distance(a, b) / epsilon)
}

fn check_frames<V: AsRef<[f64]>>(frames: &[V]) -> Result<usize> {
    if frames.len() < 2 {
        return Err(param_err!("need at least 2 frame-vectors, got {}", frames.len()));
    }
    let len = frames[0].as_ref().len();
    if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.as_ref().len() != len) {
        return Err(shape_err!("frame-vector {t} has length {}, expected {len}", f.as_ref().len()));
    }
    Ok(len)
}

pub fn gaussian_kernel<V: AsRef<[f64]>>(frames: &[V], epsilon: f64) -> Result<KernelMatrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(param_err!("epsilon must be positive, got {epsilon}"));
    }
    check_frames(frames)?;
    let n = frames.len();
    let mut w = SquareMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = kernel_entry(frames[i].as_ref(), frames[j].as_ref(), epsilon);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(KernelMatrix { w, epsilon })
}

/// Median of all pairwise squared distances (mean of the two middle values
/// for an even count); 1 when every frame is identical.
pub fn median_epsilon<V: AsRef<[f64]>>(frames: &[V]) -> Result<f64> {
    check_frames(frames)?;
    let n = frames.len();
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(squared_distance(frames[i].as_ref(), frames[j].as_ref()));
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    Ok(if median > 0.0 { median } else { 1.0 })
}

pub fn resolve_epsilon<V: AsRef<[f64]>>(epsilon: Epsilon, frames: &[V]) -> Result<f64> {
    match epsilon {
        Epsilon::Fixed(e) => Ok(e),
        Epsilon::Auto => median_epsilon(frames),
    }
}

pub fn to_markov(kernel: &KernelMatrix) -> MarkovMatrix {
    let n = kernel.w.dim();
    let degrees: Vec<f64> = (0..n).map(|i| kernel.w.row(i).iter().sum()).collect();
    let mut p = SquareMatrix::zeros(n);
    for (i, &d) in degrees.iter().enumerate() {
        // The unit diagonal keeps every degree at least 1.
        assert!(d >= 1.0, "kernel row {i} lost its unit diagonal");
        for j in 0..n {
            p.set(i, j, kernel.w.get(i, j) / d);
        }
    }
    MarkovMatrix { p, degrees }
}

/// Eigendecomposition of `P = D⁻¹W` through its symmetric conjugate
/// `A = D^½ P D^-½ = D^-½ W D^-½`: for `A v = λ v`, `ξ ∝ D^-½ v` and
/// `ψ ∝ D^½ v`.
pub fn spectral_decompose(markov: &MarkovMatrix) -> Result<SpectralBasis> {
    let n = markov.p.dim();
    let sqrt_d: Vec<f64> = markov.degrees.iter().map(|&d| libm::sqrt(d)).collect();
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let aij = markov.p.get(i, j) * sqrt_d[i] / sqrt_d[j];
            let aji = markov.p.get(j, i) * sqrt_d[j] / sqrt_d[i];
            let v = 0.5 * (aij + aji);
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let eig = symmetric_eigen(&a).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(alloc::format!(
            "{msg}; degree range [{:.3e}, {:.3e}]",
            markov.degrees.iter().copied().fold(f64::INFINITY, f64::min),
            markov.degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        )),
        other => other,
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (li, lj) = (eig.values[i], eig.values[j]);
        lj.abs().total_cmp(&li.abs()).then(lj.total_cmp(&li)).then(i.cmp(&j))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut right_vectors = Vec::with_capacity(n);
    let mut left_vectors = Vec::with_capacity(n);
    for k in order {
        let v = &eig.vectors[k];
        let mut xi: Vec<f64> = v.iter().zip(&sqrt_d).map(|(x, s)| x / s).collect();
        let len = libm::sqrt(dot(&xi, &xi));
        let pivot = xi.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let scale = if pivot < 0.0 { -1.0 / len } else { 1.0 / len };
        xi.iter_mut().for_each(|x| *x *= scale);
        let psi_raw: Vec<f64> = v.iter().zip(&sqrt_d).map(|(x, s)| x * s).collect();
        let pairing = dot(&psi_raw, &xi);
        let psi = psi_raw.iter().map(|x| x / pairing).collect();
        eigenvalues.push(eig.values[k]);
        right_vectors.push(xi);
        left_vectors.push(psi);
    }
    Ok(SpectralBasis { eigenvalues, right_vectors, left_vectors })
}

fn check_eta(eta: usize, basis: &SpectralBasis) -> Result<()> {
    if eta == 0 || eta > basis.right_vectors.len() {
        return Err(param_err!("eta must be in 1..={}, got {eta}", basis.right_vectors.len()));
    }
    Ok(())
}

/// `g_i = (x_i · ξ_1, …, x_i · ξ_eta)` for each hyperpixel `x_i`.
pub fn project<V: AsRef<[f64]>>(hyperpixels: &[V], basis: &SpectralBasis, eta: usize) -> Result<Projection> {
    check_eta(eta, basis)?;
    let n = basis.right_vectors.len();
    let mut coords = Vec::with_capacity(hyperpixels.len() * eta);
    for (i, x) in hyperpixels.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != n {
            return Err(shape_err!("hyperpixel {i} has length {}, expected {n}", x.len()));
        }
        coords.extend(basis.right_vectors[..eta].iter().map(|xi| dot(x, xi)));
    }
    Ok(Projection { eta, coords })
}

/// Same as [`project`], reading hyperpixels directly out of frame-vectors.
/// Sums run over time in the same order, so results are bit-identical.
pub fn project_frames<V: AsRef<[f64]>>(frames: &[V], basis: &SpectralBasis, eta: usize) -> Result<Projection> {
    check_eta(eta, basis)?;
    let n = basis.right_vectors.len();
    if frames.len() != n {
        return Err(shape_err!("{} frames for a basis of size {n}", frames.len()));
    }
    let pixels = check_frames(frames)?;
    let mut coords = Vec::with_capacity(pixels * eta);
    for i in 0..pixels {
        for xi in &basis.right_vectors[..eta] {
            coords.push((0..n).map(|t| frames[t].as_ref()[i] * xi[t]).sum());
        }
    }
    Ok(Projection { eta, coords })
}

/// Projects hyperpixels onto a single basis vector.
pub(crate) fn project_onto<V: AsRef<[f64]>>(frames: &[V], xi: &[f64]) -> Vec<f64> {
    let pixels = frames[0].as_ref().len();
    (0..pixels).map(|i| (0..xi.len()).map(|t| frames[t].as_ref()[i] * xi[t]).sum()).collect()
}

/// Background from a kernel already built over `frames`.
pub fn background_from_kernel<V: AsRef<[f64]>>(
    frames: &[V],
    kernel: &KernelMatrix,
    height: usize,
    width: usize,
    eta: usize,
) -> Result<(BackgroundFrame, SpectralBasis)> {
    let basis = spectral_decompose(&to_markov(kernel))?;
    let projection = project_frames(frames, &basis, eta)?;
    let raw = Plane::new(height, width, projection.coordinate(0))?;
    Ok((BackgroundFrame::from_raw(raw), basis))
}

/// Background of a whole grayscale datacube treated as one window.
pub fn extract_background(cube: &Datacube, config: &PipelineConfig) -> Result<BackgroundFrame> {
    if cube.channels() != 1 {
        return Err(param_err!("background extraction needs a grayscale cube, got {} channels", cube.channels()));
    }
    if cube.len() < 2 {
        return Err(param_err!("background extraction needs at least 2 frames, got {}", cube.len()));
    }
    let frames = cube.frame_vectors();
    let epsilon = resolve_epsilon(config.epsilon, &frames)?;
    let kernel = gaussian_kernel(&frames, epsilon)?;
    background_from_kernel(&frames, &kernel, cube.height(), cube.width(), config.eta).map(|(bg, _)| bg)
}
