//! Thread-pool execution of block pipelines.

use bsdb_core::blocks::{process_block, stitch, Block, BlockLayout, BlockPipeline, DbsdbPipeline, SbsdbPipeline};
use bsdb_core::dynamic::{run_dbsdb, DynamicBackground};
use bsdb_core::{BinaryMask, Datacube, PipelineConfig};
use rayon::prelude::*;

use crate::error::Result;

/// Runs every block on a pool of `workers` threads. Results are gathered
/// in block-id order before stitching, so the output does not depend on
/// scheduling; when several blocks fail, the lowest block id is reported.
pub fn run_blocked_parallel<P: BlockPipeline + ?Sized>(
    cube: &Datacube,
    layout: &BlockLayout,
    pipeline: &P,
    workers: usize,
) -> Result<Vec<BinaryMask>> {
    if (cube.height(), cube.width()) != (layout.height, layout.width) {
        return Err(bsdb_core::Error::Shape(format!(
            "layout is for {}x{} frames, cube is {}x{}",
            layout.height,
            layout.width,
            cube.height(),
            cube.width()
        ))
        .into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| bsdb_core::Error::Parameter(format!("cannot start {workers} workers: {e}")))?;
    let results: Vec<_> = pool.install(|| layout.blocks.par_iter().map(|b| process_block(cube, b, pipeline)).collect());
    let results = results.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(stitch(layout, cube.len(), &results)?)
}

/// Static pipeline over the configured block grid.
pub fn sbsdb_blocked(cube: &Datacube, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    config.validate()?;
    let layout = BlockLayout::from_config(cube.height(), cube.width(), config)?;
    let pipeline = if config.shared_globals {
        SbsdbPipeline::with_shared_globals(config.clone(), cube)?
    } else {
        SbsdbPipeline::new(config.clone())
    };
    run_blocked_parallel(cube, &layout, &pipeline, config.workers)
}

/// Dynamic pipeline over the configured block grid; each block trains on
/// its own crop of `bgd`.
pub fn dbsdb_blocked(bgd: &Datacube, rtd: &Datacube, config: &PipelineConfig) -> Result<Vec<BinaryMask>> {
    config.validate()?;
    let layout = BlockLayout::from_config(rtd.height(), rtd.width(), config)?;
    let pipeline = DbsdbPipeline { bgd: bgd.clone(), config: config.clone() };
    run_blocked_parallel(rtd, &layout, &pipeline, config.workers)
}

/// Dynamic classification with an already trained full-frame model; each
/// block uses its crop of the model.
pub fn dbsdb_run_blocked(
    rtd: &Datacube,
    model: &DynamicBackground,
    config: &PipelineConfig,
) -> Result<Vec<BinaryMask>> {
    config.validate()?;
    if (model.height(), model.width()) != (rtd.height(), rtd.width()) {
        return Err(bsdb_core::Error::Shape(format!(
            "model is {}x{} but frames are {}x{}",
            model.height(),
            model.width(),
            rtd.height(),
            rtd.width()
        ))
        .into());
    }
    let layout = BlockLayout::from_config(rtd.height(), rtd.width(), config)?;
    let pipeline = |cube: &Datacube, b: &Block| -> bsdb_core::Result<Vec<BinaryMask>> {
        let crop = model.crop(b.top, b.left, b.height, b.width);
        Ok(run_dbsdb(cube, &crop, config)?.fused)
    };
    run_blocked_parallel(rtd, &layout, &pipeline, config.workers)
}
