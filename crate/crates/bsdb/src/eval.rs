//! Desk-scale comparison of the diffusion-bases pipelines against the
//! classical baselines on two synthetic benchmarks.
//!
//! `static`: a ramp background with a bright square moving two pixels per
//! frame, scored with the static pipeline. `flicker`: an RGB ramp whose top
//! rows flicker sinusoidally, with a yellow square crossing the static
//! rows, scored with the dynamic pipeline trained on a foreground-free
//! prefix. Baseline masks get speckle removal; the pipelines' masks do not.
//!
//! The pipelines run unblocked: each block rescales its own background to
//! [0, 255], which on a frame-wide ramp shifts the residual of every block
//! that sees only part of the ramp. The grid fields of the configuration
//! are therefore not used here.

use std::fmt::Write as _;

use bsdb_core::baselines::{run_baseline, BaselineMethod};
use bsdb_core::dynamic::{run_dbsdb, train_dbsdb};
use bsdb_core::mask::speckle_removal;
use bsdb_core::window::run_sbsdb;
use bsdb_core::{BinaryMask, Datacube, PipelineConfig};

use crate::error::Result;
use crate::report::MetricsReport;
use crate::synthetic::{gen_synthetic, SyntheticKind, SyntheticParams};

/// Islands smaller than this are deleted from baseline masks.
pub const SPECKLE_MIN_SIZE: usize = 8;

/// Method name used for the diffusion-bases pipeline in reports.
pub const BSDB_METHOD: &str = "bsdb";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Static,
    Flicker,
}

impl BenchmarkKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Static => "static",
            BenchmarkKind::Flicker => "flicker",
        }
    }
}

/// A foreground-free training sequence, the sequence to classify and its
/// ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub train: Datacube,
    pub test: Datacube,
    pub truth: Vec<BinaryMask>,
}

pub fn static_params() -> SyntheticParams {
    SyntheticParams { noise_sigma: 1.0, ..SyntheticParams::default() }
}

/// Training and test parameters of the flicker benchmark; the test
/// sequence continues the training one in time.
pub fn flicker_params() -> (SyntheticParams, SyntheticParams) {
    let train = SyntheticParams {
        channels: 3,
        frames: 40,
        noise_sigma: 1.0,
        square_start: [36.0, 4.0],
        square_velocity: [0.0, 2.0],
        square_color: [255.0, 220.0, 0.0],
        ..SyntheticParams::default()
    };
    let test = SyntheticParams { frames: 30, start_frame: train.frames, ..train.clone() };
    (train, test)
}

pub fn static_benchmark(seed: u64) -> Result<Benchmark> {
    let p = static_params();
    let train = gen_synthetic(SyntheticKind::StaticBg, &p, seed.wrapping_add(1))?;
    let test = gen_synthetic(SyntheticKind::MovingSquare, &p, seed)?;
    Ok(Benchmark { kind: BenchmarkKind::Static, train: train.cube, test: test.cube, truth: test.truth })
}

pub fn flicker_benchmark(seed: u64) -> Result<Benchmark> {
    let (train_p, test_p) = flicker_params();
    let train = gen_synthetic(SyntheticKind::FlickerBg, &train_p, seed)?;
    let test = gen_synthetic(SyntheticKind::Combined, &test_p, seed.wrapping_add(1))?;
    Ok(Benchmark { kind: BenchmarkKind::Flicker, train: train.cube, test: test.cube, truth: test.truth })
}

/// Masks of the diffusion-bases pipeline suited to the benchmark.
pub fn run_bsdb(bench: &Benchmark, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    Ok(match bench.kind {
        BenchmarkKind::Static => run_sbsdb(&bench.test, config)?.masks,
        BenchmarkKind::Flicker => {
            let model = train_dbsdb(&bench.train, config)?.model();
            run_dbsdb(&bench.test, &model, config)?.fused
        }
    })
}

/// Baseline masks after speckle removal.
pub fn run_baseline_cleaned(
    bench: &Benchmark,
    method: BaselineMethod,
    config: &PipelineConfig,
) -> Result<Vec<BinaryMask>> {
    let mut baseline = config.baseline.clone();
    baseline.method = method;
    let masks = run_baseline(&baseline, &bench.train, &bench.test)?;
    Ok(masks.iter().map(|m| speckle_removal(m, SPECKLE_MIN_SIZE)).collect())
}

/// The pipeline and every baseline on one benchmark, pipeline first.
pub fn evaluate_benchmark(bench: &Benchmark, config: &PipelineConfig) -> Result<Vec<MetricsReport>> {
    let name = bench.kind.name();
    let mut reports =
        vec![MetricsReport::evaluate(BSDB_METHOD, &run_bsdb(bench, config)?, &bench.truth)?.with_benchmark(name)];
    for method in BaselineMethod::ALL {
        let masks = run_baseline_cleaned(bench, method, config)?;
        reports.push(MetricsReport::evaluate(method.name(), &masks, &bench.truth)?.with_benchmark(name));
    }
    Ok(reports)
}

/// Both benchmarks, generated from `seed`.
pub fn run_eval(config: &PipelineConfig, seed: u64) -> Result<Vec<MetricsReport>> {
    let mut reports = evaluate_benchmark(&static_benchmark(seed)?, config)?;
    reports.extend(evaluate_benchmark(&flicker_benchmark(seed)?, config)?);
    Ok(reports)
}

/// Mean scores as an aligned table, one row per benchmark and method.
pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let mut out = format!("{:<10} {:<18} {:>8} {:>10} {:>8}\n", "benchmark", "method", "iou", "precision", "recall");
    for r in reports {
        let m = r.mean();
        let bench = r.benchmark.as_deref().unwrap_or("-");
        let _ = writeln!(out, "{bench:<10} {:<18} {:>8.4} {:>10.4} {:>8.4}", r.method, m.iou, m.precision, m.recall);
    }
    out
}

/// Mean IoU of `method` on `benchmark`, if present.
pub fn mean_iou(reports: &[MetricsReport], benchmark: BenchmarkKind, method: &str) -> Option<f64> {
    reports
        .iter()
        .find(|r| r.benchmark.as_deref() == Some(benchmark.name()) && r.method == method)
        .map(|r| r.mean().iou)
}
