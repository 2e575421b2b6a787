//! 256-bin gray-level histograms and the slope-scan thresholds.
//!
//! A scan walks away from the histogram peak, down the flank, and stops at
//! the first gray level where the slope magnitude has dropped below `mu`.
//! Slopes are forward differences on the right flank and backward
//! differences on the left flank, so the two scans mirror each other on a
//! symmetric histogram. Levels next to the peak whose slope is already
//! below `mu` are the top of the mode, not its foot, and are walked over:
//! the scan only stops once it has crossed at least one steep step.

use alloc::vec::Vec;

use crate::error::{param_err, shape_err, Result};
use crate::frame::Plane;
use crate::mask::BinaryMask;

pub const BINS: usize = 256;
const SMOOTHING_RADIUS: isize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: [f64; BINS],
    pub smoothed: [f64; BINS],
}

impl Histogram {
    /// Wraps raw counts and derives the smoothed curve.
    pub fn from_bins(bins: [f64; BINS]) -> Self {
        Histogram { smoothed: smooth(&bins), bins }
    }

    /// Last index attaining the smoothed maximum.
    pub fn peak_last(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.smoothed.iter().enumerate() {
            if v >= self.smoothed[best] {
                best = i;
            }
        }
        best
    }

    /// First index attaining the smoothed maximum.
    pub fn peak_first(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.smoothed.iter().enumerate() {
            if v > self.smoothed[best] {
                best = i;
            }
        }
        best
    }
}

/// Centered window-5 moving average with half-sample reflection at both
/// ends (`h[-1] = h[0]`, `h[-2] = h[1]`), which keeps the total mass.
pub fn smooth(bins: &[f64; BINS]) -> [f64; BINS] {
    let reflect = |i: isize| -> usize {
        if i < 0 {
            (-i - 1) as usize
        } else if i >= BINS as isize {
            (2 * BINS as isize - 1 - i) as usize
        } else {
            i as usize
        }
    };
    let mut out = [0.0; BINS];
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let sum: f64 = (-SMOOTHING_RADIUS..=SMOOTHING_RADIUS).map(|k| bins[reflect(i + k)]).sum();
        *o = sum / (2 * SMOOTHING_RADIUS + 1) as f64;
    }
    out
}

/// Histogram of values in [0, 255], each rounded to its nearest level.
pub fn build_histogram(values: &[f64]) -> Result<Histogram> {
    let mut bins = [0.0; BINS];
    for &v in values {
        if !(0.0..=255.0).contains(&v) {
            return Err(param_err!("histogram input {v} outside [0, 255]"));
        }
        bins[libm::round(v) as usize] += 1.0;
    }
    Ok(Histogram::from_bins(bins))
}

/// Right-flank threshold for a subtracted grayscale frame.
pub fn threshold_gray(hist: &Histogram, mu: f64) -> u8 {
    scan_right(&hist.smoothed, hist.peak_last(), mu)
}

/// Two-sided threshold `(left, right)` bracketing the background mode.
/// A flat-topped peak is bracketed from its first to its last maximum.
pub fn threshold_rgb_two_sided(hist: &Histogram, mu: f64) -> (u8, u8) {
    let right = scan_right(&hist.smoothed, hist.peak_last(), mu);
    let left = scan_left(&hist.smoothed, hist.peak_first(), mu);
    (left, right)
}

/// First level in `levels` whose slope is below `mu` after a steep one.
fn scan(levels: impl Iterator<Item = usize>, slope: impl Fn(usize) -> f64, mu: f64) -> Option<usize> {
    let mut descended = false;
    for x in levels {
        let steep = slope(x).abs() >= mu;
        if descended && !steep {
            return Some(x);
        }
        descended |= steep;
    }
    None
}

fn scan_right(h: &[f64; BINS], start: usize, mu: f64) -> u8 {
    scan(start..BINS - 1, |x| h[x + 1] - h[x], mu).unwrap_or(BINS - 1) as u8
}

fn scan_left(h: &[f64; BINS], start: usize, mu: f64) -> u8 {
    scan((1..=start).rev(), |y| h[y] - h[y - 1], mu).unwrap_or(0) as u8
}

/// Foreground where the value reaches `th`.
pub fn apply_gray_threshold(frame: &Plane, th: u8) -> BinaryMask {
    let th = th as f64;
    BinaryMask::from_bits(frame.height(), frame.width(), frame.as_slice().iter().map(|&v| v >= th).collect())
}

/// Per-channel two-sided test, combined with pixel-wise OR. A value is
/// background only strictly inside `(l, r)`.
pub fn apply_rgb_threshold(channels: &[Plane; 3], thresholds: &[(u8, u8); 3]) -> Result<BinaryMask> {
    let (h, w) = (channels[0].height(), channels[0].width());
    if channels.iter().any(|p| p.height() != h || p.width() != w) {
        return Err(shape_err!("RGB channel planes differ in size"));
    }
    let bits: Vec<bool> = (0..h * w)
        .map(|i| {
            channels.iter().zip(thresholds).any(|(p, &(l, r))| {
                let v = p.as_slice()[i];
                v <= l as f64 || v >= r as f64
            })
        })
        .collect();
    Ok(BinaryMask::from_bits(h, w, bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn hist_from_smoothed(s: [f64; BINS]) -> Histogram {
        Histogram { bins: s, smoothed: s }
    }

    #[test]
    fn uniform_zero_frame() {
        let h = build_histogram(&[0.0; 10]).unwrap();
        assert_eq!(h.bins[0], 10.0);
        assert!(h.bins[1..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn one_pixel_per_level_smooths_to_itself() {
        let values: Vec<f64> = (0..256).map(|v| v as f64).collect();
        let h = build_histogram(&values).unwrap();
        assert!(h.bins.iter().all(|&b| b == 1.0));
        assert_eq!(h.smoothed, h.bins);
    }

    #[test]
    fn impulse_spreads_to_five_bins() {
        let mut bins = [0.0; BINS];
        bins[100] = 100.0;
        let s = smooth(&bins);
        for (i, &v) in s.iter().enumerate() {
            let want = if (98..=102).contains(&i) { 20.0 } else { 0.0 };
            assert_eq!(v, want, "bin {i}");
        }
    }

    #[test]
    fn smoothing_conserves_mass_at_edges() {
        let mut bins = [0.0; BINS];
        bins[0] = 7.0;
        bins[1] = 3.0;
        bins[255] = 11.0;
        let s = smooth(&bins);
        assert!((s.iter().sum::<f64>() - 21.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(build_histogram(&[256.0]).is_err());
        assert!(build_histogram(&[-0.5]).is_err());
    }

    #[test]
    fn worked_gray_threshold() {
        let mut s = [8.0; BINS];
        s[..5].copy_from_slice(&[50.0, 30.0, 18.0, 12.0, 9.0]);
        assert_eq!(threshold_gray(&hist_from_smoothed(s), 2.0), 4);
    }

    #[test]
    fn flat_histogram_never_descends() {
        let h = hist_from_smoothed([3.0; BINS]);
        assert_eq!(threshold_gray(&h, 2.0), 255);
    }

    #[test]
    fn flat_top_is_walked_over() {
        // Smoothed: [402.4, 402.0, 202, 2, 0.8, ..]; the old rule stopped at 0.
        let mut bins = [0.0; BINS];
        bins[0] = 1000.0;
        bins[1] = 6.0;
        bins[3] = 4.0;
        let h = Histogram { smoothed: smooth(&bins), bins };
        assert_eq!(h.peak_last(), 0);
        assert_eq!(threshold_gray(&h, 2.0), 3);
    }

    #[test]
    fn steep_everywhere_falls_back_to_255() {
        let mut s = [0.0; BINS];
        for (i, v) in s.iter_mut().enumerate() {
            *v = 10_000.0 - 10.0 * i as f64;
        }
        assert_eq!(threshold_gray(&hist_from_smoothed(s), 2.0), 255);
    }

    #[test]
    fn symmetric_triangle_gives_symmetric_pair() {
        // Slope magnitude 10 at the peak, shrinking by one per level and
        // reaching zero 10 levels out; flat beyond 128 ± 13.
        let mut s = [0.0; BINS];
        let mut level = 0.0;
        let mut profile = [0.0; 14];
        for k in (0..13).rev() {
            let step = (10 - k as i32).max(0) as f64;
            level += step;
            profile[k] = level;
        }
        for k in 0..14 {
            s[128 + k] = profile[k];
            s[128 - k] = profile[k];
        }
        let (l, r) = threshold_rgb_two_sided(&hist_from_smoothed(s), 2.0);
        assert_eq!(128 - l as i32, r as i32 - 128);
        assert!(l < 128 && r > 128);
    }

    #[test]
    fn impulse_at_128_is_bracketed() {
        let values = vec![128.0; 500];
        let h = build_histogram(&values).unwrap();
        let (l, r) = threshold_rgb_two_sided(&h, 2.0);
        // Smoothed support is 126..=130; the scans step just past it.
        assert_eq!((l, r), (125, 131));
        assert_eq!(threshold_gray(&h, 2.0), 131);
    }

    #[test]
    fn flat_histogram_two_sided_spans_the_plateau() {
        let h = hist_from_smoothed([5.0; BINS]);
        assert_eq!(threshold_rgb_two_sided(&h, 2.0), (0, 255));
    }

    #[test]
    fn apply_thresholds() {
        let z = Plane::filled(2, 2, 0.0);
        assert_eq!(apply_gray_threshold(&z, 1).count(), 0);
        let p = Plane::new(1, 2, vec![0.0, 200.0]).unwrap();
        assert_eq!(apply_gray_threshold(&p, 100).bits(), &[false, true]);

        let inside = Plane::filled(1, 1, 100.0);
        let outside = Plane::filled(1, 1, 250.0);
        let m = apply_rgb_threshold(&[inside.clone(), inside, outside], &[(50, 150), (50, 150), (50, 150)]).unwrap();
        assert_eq!(m.bits(), &[true]);
    }
}
