//! Reference implementations written independently of the library: dense
//! linear algebra goes through nalgebra, everything else is a plain loop
//! over the textbook definition.
#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `frames[t][p]`, uniform in [0, 255).
pub fn random_frames(rng: &mut ChaCha8Rng, n: usize, pixels: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..pixels).map(|_| rng.gen_range(0.0..255.0)).collect()).collect()
}

pub fn kernel(frames: &[Vec<f64>], epsilon: f64) -> DMatrix<f64> {
    let n = frames.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d: f64 = frames[i].iter().zip(&frames[j]).map(|(a, b)| (a - b).powi(2)).sum();
        (-d / epsilon).exp()
    })
}

/// Median of the pairwise squared distances; mean of the middle pair when
/// their count is even.
pub fn median_epsilon(frames: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            d.push(frames[i].iter().zip(&frames[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = d.len();
    let m = if k % 2 == 1 { d[k / 2] } else { 0.5 * (d[k / 2 - 1] + d[k / 2]) };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub struct DenseBasis {
    pub p: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Unit length, largest-magnitude entry positive.
    pub right: Vec<DVector<f64>>,
}

/// Eigenpairs of `P = D⁻¹W` ordered by descending `|λ|`.
pub fn dense_basis(w: &DMatrix<f64>) -> DenseBasis {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let p = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / d[i]);
    let a = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().partial_cmp(&eig.eigenvalues[i].abs()).unwrap());
    let mut eigenvalues = Vec::new();
    let mut right = Vec::new();
    for k in order {
        let v = eig.eigenvectors.column(k);
        let mut xi = DVector::from_fn(n, |i, _| v[i] / d[i].sqrt());
        xi /= xi.norm();
        let imax = xi.iamax();
        if xi[imax] < 0.0 {
            xi = -xi;
        }
        eigenvalues.push(eig.eigenvalues[k]);
        right.push(xi);
    }
    DenseBasis { p, eigenvalues, right }
}

/// First diffusion coordinate of every pixel, and its min-max rescale.
pub fn background(frames: &[Vec<f64>], epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let basis = dense_basis(&kernel(frames, epsilon));
    let pixels = frames[0].len();
    let x = DMatrix::from_fn(frames.len(), pixels, |t, p| frames[t][p]);
    let raw: Vec<f64> = (x.transpose() * &basis.right[0]).iter().copied().collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = raw.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) * 255.0 } else { 0.0 }).collect();
    (raw, norm)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Window-5 moving average over a copy padded by mirroring the outermost
/// two bins.
pub fn smooth(bins: &[f64]) -> Vec<f64> {
    let n = bins.len();
    let mut padded = vec![bins[1], bins[0]];
    padded.extend_from_slice(bins);
    padded.push(bins[n - 1]);
    padded.push(bins[n - 2]);
    (0..n).map(|i| padded[i..i + 5].iter().sum::<f64>() / 5.0).collect()
}

/// Walk right from the last maximum over the flat top, then down the steep
/// flank, stopping at the first forward step below `mu`.
pub fn threshold_right(h: &[f64], mu: f64) -> u8 {
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut x = h.iter().rposition(|&v| v == max).unwrap();
    while x < 255 && (h[x + 1] - h[x]).abs() < mu {
        x += 1;
    }
    while x < 255 && (h[x + 1] - h[x]).abs() >= mu {
        x += 1;
    }
    x as u8
}

/// Walk left from the first maximum over the flat top, then down the steep
/// flank, stopping at the first backward step below `mu`.
pub fn threshold_left(h: &[f64], mu: f64) -> u8 {
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y = h.iter().position(|&v| v == max).unwrap();
    while y > 0 && (h[y] - h[y - 1]).abs() < mu {
        y -= 1;
    }
    while y > 0 && (h[y] - h[y - 1]).abs() >= mu {
        y -= 1;
    }
    y as u8
}

const EIGHT: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn neighbours(h: usize, w: usize, i: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((i / w) as i64, (i % w) as i64);
    EIGHT.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r + dr, c + dc);
        (nr >= 0 && nc >= 0 && nr < h as i64 && nc < w as i64).then_some((nr * w as i64 + nc) as usize)
    })
}

/// Breadth-first labelling of the 8-connected components of `rgb`; keeps
/// a component when one of its pixels is in `gray` or touches a `gray`
/// pixel, and adds all of `gray`.
pub fn fuse(h: usize, w: usize, gray: &[bool], rgb: &[bool]) -> Vec<bool> {
    let mut out = gray.to_vec();
    let mut seen = vec![false; h * w];
    for start in 0..h * w {
        if !rgb[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            for q in neighbours(h, w, p) {
                if rgb[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        let anchored = comp.iter().any(|&p| gray[p] || neighbours(h, w, p).any(|q| gray[q]));
        if anchored {
            for p in comp {
                out[p] = true;
            }
        }
    }
    out
}

/// Sizes of 4-connected components by repeated relaxation of labels.
pub fn keep_large_4_components(h: usize, w: usize, mask: &[bool], min: usize) -> Vec<bool> {
    let mut label: Vec<usize> = (0..h * w).collect();
    loop {
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if !mask[i] {
                    continue;
                }
                let mut l = label[i];
                if r > 0 && mask[i - w] {
                    l = l.min(label[i - w]);
                }
                if r + 1 < h && mask[i + w] {
                    l = l.min(label[i + w]);
                }
                if c > 0 && mask[i - 1] {
                    l = l.min(label[i - 1]);
                }
                if c + 1 < w && mask[i + 1] {
                    l = l.min(label[i + 1]);
                }
                if l < label[i] {
                    label[i] = l;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut size = vec![0usize; h * w];
    for i in 0..h * w {
        if mask[i] {
            size[label[i]] += 1;
        }
    }
    (0..h * w).map(|i| mask[i] && size[label[i]] >= min).collect()
}

pub fn frame_diff(frames: &[Vec<f64>], threshold: f64) -> Vec<Vec<bool>> {
    let mut out = vec![vec![false; frames[0].len()]];
    for t in 1..frames.len() {
        out.push(frames[t].iter().zip(&frames[t - 1]).map(|(a, b)| (a - b).abs() > threshold).collect());
    }
    out
}

pub fn mean_threshold(train: &[Vec<f64>], test: &[Vec<f64>], threshold: f64) -> Vec<Vec<bool>> {
    let pixels = train[0].len();
    let mean: Vec<f64> = (0..pixels).map(|p| train.iter().map(|f| f[p]).sum::<f64>() / train.len() as f64).collect();
    test.iter().map(|f| f.iter().zip(&mean).map(|(v, m)| (v - m).abs() > threshold).collect()).collect()
}

/// Median over the `history` frames before `t` (frame 0 alone for t = 0),
/// lower middle element for even counts.
pub fn temporal_median(frames: &[Vec<f64>], history: usize, threshold: f64) -> Vec<Vec<bool>> {
    (0..frames.len())
        .map(|t| {
            let window: Vec<usize> = if t == 0 { vec![0] } else { (t.saturating_sub(history)..t).collect() };
            (0..frames[t].len())
                .map(|p| {
                    let mut v: Vec<f64> = window.iter().map(|&s| frames[s][p]).collect();
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    (frames[t][p] - v[(v.len() - 1) / 2]).abs() > threshold
                })
                .collect()
        })
        .collect()
}

/// Mean and the top `k` eigenvectors of the full pixel covariance matrix.
pub struct EigenModel {
    mean: DVector<f64>,
    basis: Vec<DVector<f64>>,
}

impl EigenModel {
    pub fn fit(train: &[Vec<f64>], k: usize) -> Self {
        let (n, d) = (train.len(), train[0].len());
        let x = DMatrix::from_fn(n, d, |t, p| train[t][p]);
        let mean = DVector::from_fn(d, |p, _| x.column(p).sum() / n as f64);
        let centered = DMatrix::from_fn(n, d, |t, p| x[(t, p)] - mean[p]);
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        let basis = order[..k].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        EigenModel { mean, basis }
    }

    pub fn reconstruct(&self, frame: &[f64]) -> Vec<f64> {
        let f = DVector::from_column_slice(frame) - &self.mean;
        let mut rec = self.mean.clone();
        for phi in &self.basis {
            rec += phi * phi.dot(&f);
        }
        rec.iter().copied().collect()
    }
}
