//! TOML configuration files with command-line overrides.

use std::path::{Path, PathBuf};

use bsdb_core::baselines::BaselineMethod;
use bsdb_core::{Epsilon, PipelineConfig};

use crate::error::{Error, Result};

pub fn from_toml_str(text: &str, origin: &Path) -> Result<PipelineConfig> {
    let config: PipelineConfig =
        toml::from_str(text).map_err(|e| Error::Config { path: origin.into(), message: e.to_string() })?;
    config.validate()?;
    Ok(config)
}

pub fn to_toml_string(config: &PipelineConfig) -> String {
    toml::to_string(config).expect("pipeline config is always representable in TOML")
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_toml_str(&text, path)
}

fn parse_epsilon(s: &str) -> std::result::Result<Epsilon, String> {
    if s == "auto" {
        return Ok(Epsilon::Auto);
    }
    s.parse::<f64>().map(Epsilon::Fixed).map_err(|_| format!("expected \"auto\" or a number, got {s:?}"))
}

fn parse_method(s: &str) -> std::result::Result<BaselineMethod, String> {
    s.parse().map_err(|e: bsdb_core::Error| e.to_string())
}

/// Pipeline parameters shared by every subcommand. Flags override values
/// read from `--config`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigArgs {
    /// TOML file with pipeline parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel scale: "auto" or a positive number.
    #[arg(long, value_parser = parse_epsilon)]
    pub epsilon: Option<Epsilon>,
    #[arg(long)]
    pub eta: Option<usize>,
    /// Sliding-window length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Histogram slope threshold.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Training stops once this fraction of residual pixels is non-positive.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    pub grid_cols: Option<usize>,
    #[arg(long)]
    pub overlap_px: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Blocks reuse the unblocked run's statistics (static pipeline only).
    #[arg(long)]
    pub shared_globals: bool,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<BaselineMethod>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub eigen_count: Option<usize>,
}

impl ConfigArgs {
    pub fn apply(&self, mut c: PipelineConfig) -> PipelineConfig {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            epsilon => c.epsilon,
            eta => c.eta,
            m => c.window,
            mu => c.mu,
            rho => c.rho,
            max_iterations => c.max_iterations,
            passes => c.passes,
            grid_rows => c.grid_rows,
            grid_cols => c.grid_cols,
            overlap_px => c.overlap_px,
            workers => c.workers,
            method => c.baseline.method,
            threshold => c.baseline.threshold,
            history => c.baseline.history,
            eigen_count => c.baseline.eigen_count,
        );
        if self.shared_globals {
            c.shared_globals = true;
        }
        c
    }

    /// Defaults, then the config file, then flags; validated.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let base = match &self.config {
            Some(path) => load_config(path)?,
            None => PipelineConfig::default(),
        };
        let config = self.apply(base);
        config.validate()?;
        Ok(config)
    }
}
