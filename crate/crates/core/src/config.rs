//! Pipeline configuration shared by every command.

use crate::baselines::BaselineConfig;
use crate::error::{param_err, Result};

/// Kernel scale: a fixed value, or the median pairwise squared distance of
/// the first window it is needed for.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Epsilon {
    #[default]
    Auto,
    Fixed(f64),
}

pub const DEFAULT_WINDOW: usize = 5;
pub const MAX_WINDOW: usize = 60;
pub const DEFAULT_MU: f64 = 2.0;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_MAX_ITERATIONS: usize = 10;
pub const DEFAULT_OVERLAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    pub epsilon: Epsilon,
    /// Number of diffusion-basis coordinates computed per hyperpixel.
    pub eta: usize,
    /// Sliding-window length.
    #[cfg_attr(feature = "serde", serde(rename = "m"))]
    pub window: usize,
    /// Slope magnitude at which a histogram flank counts as flat.
    pub mu: f64,
    /// Fraction of non-positive residual pixels that ends training.
    pub rho: f64,
    pub max_iterations: usize,
    /// Applications of the unthresholded static pipeline in the grayscale
    /// classification phase (1 or 2).
    pub passes: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub overlap_px: usize,
    pub workers: usize,
    /// Debug: blocks reuse the unblocked run's per-window statistics.
    pub shared_globals: bool,
    pub baseline: BaselineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epsilon: Epsilon::Auto,
            eta: 1,
            window: DEFAULT_WINDOW,
            mu: DEFAULT_MU,
            rho: DEFAULT_RHO,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            passes: 1,
            grid_rows: 2,
            grid_cols: 2,
            overlap_px: DEFAULT_OVERLAP,
            workers: 1,
            shared_globals: false,
            baseline: BaselineConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if let Epsilon::Fixed(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(param_err!("epsilon must be positive and finite, got {e}"));
            }
        }
        if self.eta == 0 {
            return Err(param_err!("eta must be at least 1"));
        }
        if !(2..=MAX_WINDOW).contains(&self.window) {
            return Err(param_err!("window size m must be in 2..={MAX_WINDOW}, got {}", self.window));
        }
        if self.eta > self.window {
            return Err(param_err!("eta ({}) cannot exceed the window size ({})", self.eta, self.window));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(param_err!("mu must be positive, got {}", self.mu));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(param_err!("rho must lie in (0, 1], got {}", self.rho));
        }
        if self.max_iterations == 0 {
            return Err(param_err!("max_iterations must be at least 1"));
        }
        if !(1..=2).contains(&self.passes) {
            return Err(param_err!("passes must be 1 or 2, got {}", self.passes));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(param_err!("block grid must be at least 1x1"));
        }
        if self.workers == 0 {
            return Err(param_err!("workers must be at least 1"));
        }
        self.baseline.validate()
    }
}

#[cfg(feature = "serde")]
mod epsilon_serde {
    use super::Epsilon;
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for Epsilon {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            match self {
                Epsilon::Auto => s.serialize_str("auto"),
                Epsilon::Fixed(v) => s.serialize_f64(*v),
            }
        }
    }

    struct EpsilonVisitor;

    impl Visitor<'_> for EpsilonVisitor {
        type Value = Epsilon;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("\"auto\" or a positive number")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Epsilon, E> {
            if v == "auto" {
                Ok(Epsilon::Auto)
            } else {
                v.parse::<f64>().map(Epsilon::Fixed).map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Epsilon, E> {
            Ok(Epsilon::Fixed(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Epsilon, E> {
            Ok(Epsilon::Fixed(v as f64))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Epsilon, E> {
            Ok(Epsilon::Fixed(v as f64))
        }
    }

    impl<'de> Deserialize<'de> for Epsilon {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Epsilon, D::Error> {
            d.deserialize_any(EpsilonVisitor)
        }
    }
}
