//! Spatial decomposition into overlapping blocks. Each block runs an
//! independent pipeline instance; results go back to their original
//! coordinates and overlaps are combined with OR.
//!
//! This module only provides the sequential executor. Blocks share no
//! mutable state, so any scheduler that calls [`process_block`] and then
//! [`stitch`] in block-id order reproduces the same output.

use alloc::vec::Vec;

use crate::config::PipelineConfig;
use crate::dynamic::{run_dbsdb, train_dbsdb};
use crate::error::{param_err, shape_err, Result};
use crate::frame::{normalize_with_bounds, subtract_clamped, Datacube, Plane};
use crate::histogram::apply_gray_threshold;
use crate::mask::BinaryMask;
use crate::spectral::{project_onto, resolve_epsilon};
use crate::window::{run_sbsdb, SlidingWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub id: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Block {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row) && (self.left..self.left + self.width).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub height: usize,
    pub width: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub overlap: usize,
    pub blocks: Vec<Block>,
}

/// Near-equal cells along one axis, each widened by half the overlap on
/// every interior edge. Returns `(start, len)` per cell.
fn split_axis(len: usize, parts: usize, overlap: usize, axis: &str) -> Result<Vec<(usize, usize)>> {
    if parts == 0 {
        return Err(param_err!("block grid needs at least one {axis}"));
    }
    if parts == 1 {
        return Ok(alloc::vec![(0, len)]);
    }
    let cuts: Vec<usize> = (0..=parts).map(|k| k * len / parts).collect();
    let smallest = cuts.windows(2).map(|c| c[1] - c[0]).min().unwrap_or(0);
    if smallest == 0 || smallest < overlap {
        return Err(param_err!(
            "{parts} {axis}s over {len} pixels gives cells of {smallest} pixels, smaller than the overlap of {overlap}"
        ));
    }
    let (before, after) = (overlap / 2, overlap - overlap / 2);
    Ok((0..parts)
        .map(|k| {
            let start = if k == 0 { 0 } else { cuts[k] - before };
            let end = if k == parts - 1 { len } else { cuts[k + 1] + after };
            (start, end - start)
        })
        .collect())
}

pub fn make_layout(
    height: usize,
    width: usize,
    grid_rows: usize,
    grid_cols: usize,
    overlap: usize,
) -> Result<BlockLayout> {
    let rows = split_axis(height, grid_rows, overlap, "row")?;
    let cols = split_axis(width, grid_cols, overlap, "column")?;
    let mut blocks = Vec::with_capacity(grid_rows * grid_cols);
    for (r, &(top, h)) in rows.iter().enumerate() {
        for (c, &(left, w)) in cols.iter().enumerate() {
            blocks.push(Block { id: blocks.len(), grid_row: r, grid_col: c, top, left, height: h, width: w });
        }
    }
    Ok(BlockLayout { height, width, grid_rows, grid_cols, overlap, blocks })
}

impl BlockLayout {
    pub fn from_config(height: usize, width: usize, config: &PipelineConfig) -> Result<Self> {
        make_layout(height, width, config.grid_rows, config.grid_cols, config.overlap_px)
    }

    /// Number of blocks covering each pixel.
    pub fn coverage(&self) -> Vec<u32> {
        let mut cover = alloc::vec![0u32; self.height * self.width];
        for b in &self.blocks {
            for r in b.top..b.top + b.height {
                for c in b.left..b.left + b.width {
                    cover[r * self.width + c] += 1;
                }
            }
        }
        cover
    }
}

/// A per-block pipeline. Implementations must not share mutable state
/// between calls.
pub trait BlockPipeline: Sync {
    fn run_block(&self, cube: &Datacube, block: &Block) -> Result<Vec<BinaryMask>>;
}

impl<F> BlockPipeline for F
where
    F: Fn(&Datacube, &Block) -> Result<Vec<BinaryMask>> + Sync,
{
    fn run_block(&self, cube: &Datacube, block: &Block) -> Result<Vec<BinaryMask>> {
        self(cube, block)
    }
}

/// Crops `block` out of `cube` and runs the pipeline on it; errors carry
/// the block id.
pub fn process_block<P: BlockPipeline + ?Sized>(
    cube: &Datacube,
    block: &Block,
    pipeline: &P,
) -> Result<Vec<BinaryMask>> {
    let run = || -> Result<Vec<BinaryMask>> {
        let sub = cube.crop(block.top, block.left, block.height, block.width)?;
        let masks = pipeline.run_block(&sub, block)?;
        if masks.len() != cube.len() {
            return Err(shape_err!("pipeline returned {} masks for {} frames", masks.len(), cube.len()));
        }
        if let Some(m) = masks.iter().find(|m| m.height() != block.height || m.width() != block.width) {
            return Err(shape_err!(
                "pipeline returned a {}x{} mask for a {}x{} block",
                m.height(),
                m.width(),
                block.height,
                block.width
            ));
        }
        Ok(masks)
    };
    run().map_err(|e| e.in_block(block.id))
}

/// Places per-block masks (indexed by block id) at their original
/// coordinates, OR-ing overlaps.
pub fn stitch(layout: &BlockLayout, frames: usize, results: &[Vec<BinaryMask>]) -> Result<Vec<BinaryMask>> {
    if results.len() != layout.blocks.len() {
        return Err(shape_err!("{} block results for {} blocks", results.len(), layout.blocks.len()));
    }
    let mut out = alloc::vec![BinaryMask::empty(layout.height, layout.width); frames];
    for (block, masks) in layout.blocks.iter().zip(results) {
        for (dst, src) in out.iter_mut().zip(masks) {
            for r in 0..block.height {
                for c in 0..block.width {
                    if src.get(r, c) {
                        dst.set(block.top + r, block.left + c, true);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_layout(cube: &Datacube, layout: &BlockLayout) -> Result<()> {
    if cube.height() != layout.height || cube.width() != layout.width {
        return Err(shape_err!(
            "layout is for {}x{} frames, cube is {}x{}",
            layout.height,
            layout.width,
            cube.height(),
            cube.width()
        ));
    }
    Ok(())
}

/// Runs every block in id order on the calling thread.
pub fn run_blocked<P: BlockPipeline + ?Sized>(
    cube: &Datacube,
    layout: &BlockLayout,
    pipeline: &P,
) -> Result<Vec<BinaryMask>> {
    check_layout(cube, layout)?;
    let results = layout.blocks.iter().map(|b| process_block(cube, b, pipeline)).collect::<Result<Vec<_>>>()?;
    stitch(layout, cube.len(), &results)
}

/// Per-window and per-frame quantities of an unblocked static run that a
/// block would otherwise estimate from its own pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedGlobals {
    pub epsilon: f64,
    /// First right eigenvector of each window's Markov matrix.
    pub window_vectors: Vec<Vec<f64>>,
    /// Raw background (min, max) of each window over the full frame.
    pub window_bounds: Vec<(f64, f64)>,
    pub thresholds: Vec<u8>,
}

impl SharedGlobals {
    pub fn capture(cube: &Datacube, config: &PipelineConfig) -> Result<Self> {
        let full = run_sbsdb(cube, config)?;
        let m = config.window;
        let frames = cube.frame_vectors();
        let epsilon = resolve_epsilon(config.epsilon, &frames[..m])?;
        let mut window = SlidingWindow::new(frames[..m].iter().map(|f| f.to_vec()).collect(), epsilon)?;
        let mut window_vectors = Vec::new();
        let mut window_bounds = Vec::new();
        for j in 0..=cube.len() - m {
            if j > 0 {
                window.slide(frames[j + m - 1].to_vec())?;
            }
            let (bg, basis) = window.background(cube.height(), cube.width(), config.eta)?;
            window_vectors.push(basis.right_vectors[0].clone());
            window_bounds.push(bg.raw.min_max());
        }
        Ok(SharedGlobals { epsilon, window_vectors, window_bounds, thresholds: full.thresholds })
    }
}

/// The static pipeline as a block pipeline.
#[derive(Debug, Clone)]
pub struct SbsdbPipeline {
    pub config: PipelineConfig,
    pub shared: Option<SharedGlobals>,
}

impl SbsdbPipeline {
    pub fn new(config: PipelineConfig) -> Self {
        SbsdbPipeline { config, shared: None }
    }

    /// Debug mode: blocks reuse the unblocked run's statistics, so every
    /// block pixel is classified exactly as in the unblocked run.
    pub fn with_shared_globals(config: PipelineConfig, cube: &Datacube) -> Result<Self> {
        let shared = SharedGlobals::capture(cube, &config)?;
        Ok(SbsdbPipeline { config, shared: Some(shared) })
    }

    fn run_shared(&self, cube: &Datacube, shared: &SharedGlobals) -> Result<Vec<BinaryMask>> {
        let m = self.config.window;
        let n = cube.len();
        if n < m || shared.thresholds.len() != n || shared.window_vectors.len() != n - m + 1 {
            return Err(param_err!("shared statistics were captured for a different sequence"));
        }
        let frames = cube.frame_vectors();
        let mut backgrounds = Vec::with_capacity(n - m + 1);
        for (j, (xi, &(lo, hi))) in shared.window_vectors.iter().zip(&shared.window_bounds).enumerate() {
            let raw = Plane::new(cube.height(), cube.width(), project_onto(&frames[j..j + m], xi))?;
            backgrounds.push(normalize_with_bounds(&raw, lo, hi));
        }
        (0..n)
            .map(|i| {
                let bg = &backgrounds[i.min(n - m)];
                let residual = Plane::new(cube.height(), cube.width(), subtract_clamped(frames[i], bg.as_slice()))?;
                Ok(apply_gray_threshold(&residual, shared.thresholds[i]))
            })
            .collect()
    }
}

impl BlockPipeline for SbsdbPipeline {
    fn run_block(&self, cube: &Datacube, _block: &Block) -> Result<Vec<BinaryMask>> {
        match &self.shared {
            Some(shared) => self.run_shared(cube, shared),
            None => Ok(run_sbsdb(cube, &self.config)?.masks),
        }
    }
}

/// The dynamic pipeline as a block pipeline: each block trains on its own
/// crop of the background sequence.
#[derive(Debug, Clone)]
pub struct DbsdbPipeline {
    pub bgd: Datacube,
    pub config: PipelineConfig,
}

impl BlockPipeline for DbsdbPipeline {
    fn run_block(&self, cube: &Datacube, block: &Block) -> Result<Vec<BinaryMask>> {
        let bgd = self.bgd.crop(block.top, block.left, block.height, block.width)?;
        let model = train_dbsdb(&bgd, &self.config)?.model();
        Ok(run_dbsdb(cube, &model, &self.config)?.fused)
    }
}
