//! Seeded synthetic sequences with per-frame ground truth.
//!
//! Every sequence is a left-to-right intensity ramp. On top of it,
//! depending on the kind, a band of rows flickers sinusoidally and an
//! opaque square moves at constant velocity, bouncing off the frame
//! edges. Pixel values are rounded to integers in [0, 255].

use bsdb_core::frame::LUMA_WEIGHTS;
use bsdb_core::{BinaryMask, Datacube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    StaticBg,
    FlickerBg,
    MovingSquare,
    Combined,
}

impl SyntheticKind {
    fn has_flicker(self) -> bool {
        matches!(self, SyntheticKind::FlickerBg | SyntheticKind::Combined)
    }

    fn has_square(self) -> bool {
        matches!(self, SyntheticKind::MovingSquare | SyntheticKind::Combined)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub channels: usize,
    pub background_low: f64,
    pub background_high: f64,
    pub square_size: usize,
    /// Top-left corner (row, column) at frame 0.
    pub square_start: [f64; 2],
    /// Pixels per frame (row, column).
    pub square_velocity: [f64; 2],
    /// RGB colour; grayscale sequences use its luma.
    pub square_color: [f64; 3],
    pub flicker_amplitude: f64,
    /// Frames per flicker cycle.
    pub flicker_period: f64,
    /// Half-open row range `[start, end)` that flickers.
    pub flicker_rows: [usize; 2],
    pub noise_sigma: f64,
    /// Time index of the first frame, so a sequence can continue another
    /// one's flicker phase and square trajectory.
    pub start_frame: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            height: 64,
            width: 64,
            frames: 30,
            channels: 1,
            background_low: 0.0,
            background_high: 255.0,
            square_size: 8,
            square_start: [4.0, 4.0],
            square_velocity: [2.0, 0.0],
            square_color: [255.0, 255.0, 255.0],
            flicker_amplitude: 40.0,
            flicker_period: 8.0,
            flicker_rows: [0, 24],
            noise_sigma: 0.0,
            start_frame: 0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(bsdb_core::Error::Parameter(m).into());
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return fail(format!("synthetic size {}x{}x{} must be non-zero", self.height, self.width, self.frames));
        }
        if self.channels != 1 && self.channels != 3 {
            return fail(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if self.square_size == 0 || self.square_size > self.height.min(self.width) {
            return fail(format!(
                "square size {} does not fit a {}x{} frame",
                self.square_size, self.height, self.width
            ));
        }
        if self.flicker_period.is_nan()
            || self.flicker_period <= 0.0
            || self.flicker_amplitude < 0.0
            || self.noise_sigma < 0.0
        {
            return fail("flicker period must be positive; amplitude and noise non-negative".into());
        }
        if self.flicker_rows[0] > self.flicker_rows[1] {
            return fail(format!("flicker rows {:?} are reversed", self.flicker_rows));
        }
        let finite = [self.background_low, self.background_high, self.flicker_amplitude, self.noise_sigma]
            .into_iter()
            .chain(self.square_start)
            .chain(self.square_velocity)
            .chain(self.square_color)
            .all(f64::is_finite);
        if !finite {
            return fail("synthetic parameters must be finite".into());
        }
        Ok(())
    }

    /// Top-left corner of the square at absolute time `t`.
    pub fn square_position(&self, t: usize) -> (usize, usize) {
        let span_r = (self.height - self.square_size) as f64;
        let span_c = (self.width - self.square_size) as f64;
        let r = bounce(self.square_start[0] + self.square_velocity[0] * t as f64, span_r);
        let c = bounce(self.square_start[1] + self.square_velocity[1] * t as f64, span_c);
        (r.round() as usize, c.round() as usize)
    }

    fn ramp(&self, col: usize) -> f64 {
        let x = if self.width > 1 { col as f64 / (self.width - 1) as f64 } else { 0.0 };
        self.background_low + (self.background_high - self.background_low) * x
    }
}

/// Reflects `x` into `[0, max]`.
fn bounce(x: f64, max: f64) -> f64 {
    if max <= 0.0 {
        return 0.0;
    }
    let y = x.rem_euclid(2.0 * max);
    if y > max {
        2.0 * max - y
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub cube: Datacube,
    pub truth: Vec<BinaryMask>,
}

pub fn gen_synthetic(kind: SyntheticKind, params: &SyntheticParams, seed: u64) -> Result<SyntheticSequence> {
    params.validate()?;
    let (h, w, ch) = (params.height, params.width, params.channels);
    let px = h * w;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    // Phases come from their own stream so that changing the flicker
    // leaves the noise untouched.
    let mut phase_rng = ChaCha8Rng::seed_from_u64(seed);
    phase_rng.set_stream(1);
    let phases: Vec<f64> = (0..px).map(|_| phase_rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let noise = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
    let colour: Vec<f64> = if ch == 1 {
        vec![LUMA_WEIGHTS.iter().zip(params.square_color).map(|(w, c)| w * c).sum()]
    } else {
        params.square_color.to_vec()
    };
    let amplitude = if kind.has_flicker() { params.flicker_amplitude } else { 0.0 };

    let mut frames = Vec::with_capacity(params.frames);
    let mut truth = Vec::with_capacity(params.frames);
    for k in 0..params.frames {
        let t = params.start_frame + k;
        let (sr, sc) = params.square_position(t);
        let inside = |r: usize, c: usize| {
            kind.has_square()
                && (sr..sr + params.square_size).contains(&r)
                && (sc..sc + params.square_size).contains(&c)
        };
        let omega = std::f64::consts::TAU * t as f64 / params.flicker_period;
        let mut frame = vec![0.0; px * ch];
        for r in 0..h {
            let flickers = (params.flicker_rows[0]..params.flicker_rows[1]).contains(&r);
            for c in 0..w {
                let i = r * w + c;
                let base = if inside(r, c) {
                    None
                } else {
                    let f = if flickers { amplitude * (omega + phases[i]).sin() } else { 0.0 };
                    Some(params.ramp(c) + f)
                };
                for (plane, value) in frame.chunks_mut(px).enumerate() {
                    let v = base.unwrap_or(colour[plane]);
                    let n = if params.noise_sigma > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
                    value[i] = (v + n).round().clamp(0.0, 255.0);
                }
            }
        }
        frames.push(frame);
        truth.push(BinaryMask::from_fn(h, w, inside));
    }
    Ok(SyntheticSequence { cube: Datacube::new(h, w, ch, frames)?, truth })
}
