//! Binary foreground masks: fusion by graph search, speckle removal,
//! overlap metrics and OR stitching.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};

/// H×W foreground map, row-major, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(height: usize, width: usize) -> Self {
        BinaryMask { height, width, bits: vec![false; height * width] }
    }

    pub fn full(height: usize, width: usize) -> Self {
        BinaryMask { height, width, bits: vec![true; height * width] }
    }

    /// Panics if `bits.len() != height * width`.
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), height * width, "mask bit count does not match its size");
        BinaryMask { height, width, bits }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        BinaryMask { height, width, bits }
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
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Foreground pixel count.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// 0 / 255 bytes, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    /// Any non-zero byte is foreground.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width {
            return Err(shape_err!("{} mask bytes for a {height}x{width} mask", bytes.len()));
        }
        Ok(BinaryMask { height, width, bits: bytes.iter().map(|&b| b != 0).collect() })
    }

    fn check_same_size(&self, other: &BinaryMask) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(shape_err!(
                "mask sizes differ: {}x{} vs {}x{}",
                self.height,
                self.width,
                other.height,
                other.width
            ));
        }
        Ok(())
    }

    fn neighbors(&self, idx: usize, eight: bool) -> impl Iterator<Item = usize> + '_ {
        const OFFSETS: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
        let (r, c) = ((idx / self.width) as isize, (idx % self.width) as isize);
        let take = if eight { 8 } else { 4 };
        OFFSETS[..take].iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width)
                .then(|| nr as usize * self.width + nc as usize)
        })
    }
}

/// Grows the grayscale detections through the RGB detections.
///
/// Every foreground pixel of `gray` is a root and is kept. From each root a
/// depth-first search walks 8-neighbours that are foreground in `rgb`; every
/// visited pixel is foreground in the output. The traversal uses an explicit
/// stack so frame size does not bound recursion depth.
pub fn dfs_fuse(gray: &BinaryMask, rgb: &BinaryMask) -> Result<BinaryMask> {
    gray.check_same_size(rgb)?;
    let mut out = vec![false; gray.bits.len()];
    let mut stack = Vec::new();
    for root in 0..gray.bits.len() {
        if !gray.bits[root] || out[root] {
            continue;
        }
        out[root] = true;
        stack.push(root);
        while let Some(p) = stack.pop() {
            for q in rgb.neighbors(p, true) {
                if rgb.bits[q] && !out[q] {
                    out[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    Ok(BinaryMask { height: gray.height, width: gray.width, bits: out })
}

/// Labels 4- or 8-connected foreground components; label 0 is background,
/// components are numbered from 1 in raster order of their first pixel.
pub fn label_components(mask: &BinaryMask, eight: bool) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; mask.bits.len()];
    let mut sizes = vec![0usize];
    let mut stack = Vec::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32;
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            for q in mask.neighbors(p, eight) {
                if mask.bits[q] && labels[q] == 0 {
                    labels[q] = label;
                    stack.push(q);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Default island size below which speckles are removed.
pub const SPECKLE_MIN_SIZE: usize = 8;

/// Drops 4-connected foreground islands with fewer than `min_size` pixels.
pub fn speckle_removal(mask: &BinaryMask, min_size: usize) -> BinaryMask {
    let (labels, sizes) = label_components(mask, false);
    let bits = labels.iter().map(|&l| l != 0 && sizes[l as usize] >= min_size).collect();
    BinaryMask { height: mask.height, width: mask.width, bits }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskMetrics {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Set-overlap scores. Empty denominators score 1 (nothing to get wrong).
pub fn mask_metrics(predicted: &BinaryMask, truth: &BinaryMask) -> Result<MaskMetrics> {
    predicted.check_same_size(truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.bits.iter().zip(&truth.bits) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(MaskMetrics { iou: ratio(tp, tp + fp + fn_), precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_) })
}

pub fn mask_or(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.check_same_size(b)?;
    let bits = a.bits.iter().zip(&b.bits).map(|(&x, &y)| x || y).collect();
    Ok(BinaryMask { height: a.height, width: a.width, bits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_of(h: usize, w: usize, on: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::empty(h, w);
        for &(r, c) in on {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn fuse_without_roots_is_empty() {
        let rgb = BinaryMask::full(4, 4);
        assert_eq!(dfs_fuse(&BinaryMask::empty(4, 4), &rgb).unwrap().count(), 0);
    }

    #[test]
    fn fuse_full_masks() {
        let f = BinaryMask::full(5, 3);
        assert_eq!(dfs_fuse(&f, &f).unwrap(), f);
    }

    #[test]
    fn fuse_worked_example() {
        let gray = mask_of(4, 4, &[(1, 1)]);
        let rgb = mask_of(4, 4, &[(0, 1), (1, 1), (1, 2), (2, 2), (3, 0)]);
        let out = dfs_fuse(&gray, &rgb).unwrap();
        assert_eq!(out, mask_of(4, 4, &[(0, 1), (1, 1), (1, 2), (2, 2)]));
    }

    #[test]
    fn fuse_keeps_isolated_roots() {
        let gray = mask_of(3, 3, &[(0, 0)]);
        let out = dfs_fuse(&gray, &BinaryMask::empty(3, 3)).unwrap();
        assert_eq!(out, gray);
    }

    #[test]
    fn fuse_large_full_mask_does_not_overflow() {
        let f = BinaryMask::full(4096, 4096);
        let mut g = BinaryMask::empty(4096, 4096);
        g.set(2048, 2048, true);
        assert_eq!(dfs_fuse(&g, &f).unwrap().count(), 4096 * 4096);
    }

    #[test]
    fn fuse_size_mismatch() {
        let r = dfs_fuse(&BinaryMask::empty(2, 2), &BinaryMask::empty(2, 3));
        assert!(matches!(r, Err(crate::Error::Shape(_))));
    }

    #[test]
    fn speckle_examples() {
        let single = mask_of(5, 5, &[(2, 2)]);
        assert_eq!(speckle_removal(&single, 8).count(), 0);

        let eight: alloc::vec::Vec<_> = (0..8).map(|c| (1, c)).collect();
        let m = mask_of(3, 10, &eight);
        assert_eq!(speckle_removal(&m, 8), m);

        // Two plus-shaped 5-pixel blobs touching only at a corner.
        let m = mask_of(6, 6, &[(0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (3, 4), (2, 3), (3, 3), (4, 3), (3, 2)]);
        assert_eq!(label_components(&m, false).1.len() - 1, 2);
        assert_eq!(speckle_removal(&m, 8).count(), 0);
    }

    #[test]
    fn metric_examples() {
        let a = mask_of(2, 2, &[(0, 0), (1, 1)]);
        let m = mask_metrics(&a, &a).unwrap();
        assert_eq!((m.iou, m.precision, m.recall), (1.0, 1.0, 1.0));

        let b = mask_of(2, 2, &[(0, 1)]);
        assert_eq!(mask_metrics(&a, &b).unwrap().iou, 0.0);

        let half = mask_of(2, 2, &[(0, 0)]);
        let m = mask_metrics(&half, &a).unwrap();
        assert_eq!((m.iou, m.precision, m.recall), (0.5, 1.0, 0.5));

        let e = BinaryMask::empty(2, 2);
        assert_eq!(mask_metrics(&e, &e).unwrap().iou, 1.0);
    }

    #[test]
    fn or_identities() {
        let a = mask_of(2, 3, &[(0, 2), (1, 0)]);
        assert_eq!(mask_or(&a, &BinaryMask::empty(2, 3)).unwrap(), a);
        assert_eq!(mask_or(&a, &a).unwrap(), a);
    }

    #[test]
    fn byte_encoding() {
        let a = mask_of(1, 3, &[(0, 1)]);
        assert_eq!(a.to_bytes(), alloc::vec![0, 255, 0]);
        assert_eq!(BinaryMask::from_bytes(1, 3, &a.to_bytes()).unwrap(), a);
    }
}
