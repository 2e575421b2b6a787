//! The `bsdb` command.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use bsdb_core::baselines::run_baseline;
use bsdb_core::dynamic::train_dbsdb;
use bsdb_core::frame::to_grayscale;
use bsdb_core::spectral::extract_background;
use bsdb_core::{BinaryMask, Datacube};
use clap::{Args, Parser, Subcommand};

use crate::config::ConfigArgs;
use crate::error::{Error, Result};
use crate::eval::{metrics_table, run_eval};
use crate::io::{
    load_masks, load_sequence, read_model, save_masks, save_plane, save_sequence, write_model, SequenceManifest,
    DEFAULT_FRAME_PATTERN, DEFAULT_MASK_PATTERN,
};
use crate::parallel::{dbsdb_run_blocked, sbsdb_blocked};
use crate::report::MetricsReport;
use crate::synthetic::{gen_synthetic, SyntheticKind, SyntheticParams};

#[derive(Debug, Parser)]
#[command(name = "bsdb", version, about = "Background subtraction with diffusion bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the [0, 255] background of a whole sequence as one image.
    ExtractBg {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Static-background subtraction over a sliding window.
    Sbsdb {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: MaskOutputArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train a dynamic-background model on a foreground-free RGB sequence.
    DbsdbTrain {
        #[command(flatten)]
        input: InputArgs,
        /// Model file to write.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Classify an RGB sequence with a trained dynamic-background model.
    DbsdbRun {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        output: MaskOutputArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run one classical method (chosen with --method).
    Baseline {
        #[command(flatten)]
        input: InputArgs,
        /// Foreground-free training frames; defaults to the input sequence.
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        output: MaskOutputArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a mask sequence against ground truth, or, without --masks,
    /// compare every method on the synthetic benchmarks.
    Eval {
        #[arg(long, requires = "truth")]
        masks: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_MASK_PATTERN)]
        mask_pattern: String,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_MASK_PATTERN)]
        truth_pattern: String,
        /// Seed of the synthetic benchmarks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-frame report file; standard output otherwise.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a seeded synthetic sequence and its ground-truth masks.
    GenSynthetic {
        #[arg(long, value_enum)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for frames and masks.
        #[arg(long)]
        output: PathBuf,
        /// TOML file with generator parameters; flags override it.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        flicker_amplitude: Option<f64>,
        /// Time index of the first frame.
        #[arg(long)]
        start_frame: Option<usize>,
        #[arg(long, default_value = DEFAULT_FRAME_PATTERN)]
        pattern: String,
        #[arg(long, default_value = DEFAULT_MASK_PATTERN)]
        mask_pattern: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Directory of numbered frames.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = DEFAULT_FRAME_PATTERN)]
    pub pattern: String,
    /// 1 reads frames as grayscale, 3 as RGB.
    #[arg(long)]
    pub channels: Option<usize>,
}

impl InputArgs {
    fn load(&self, dir: &Path, default_channels: usize) -> Result<Datacube> {
        let manifest = SequenceManifest {
            pattern: self.pattern.clone(),
            ..SequenceManifest::new(dir, self.channels.unwrap_or(default_channels))
        };
        load_sequence(&manifest)
    }

    fn load_gray(&self) -> Result<Datacube> {
        let cube = self.load(&self.input, 1)?;
        Ok(if cube.channels() == 1 { cube } else { to_grayscale(&cube)? })
    }
}

#[derive(Debug, Clone, Args)]
pub struct MaskOutputArgs {
    /// Directory for the 0/255 mask images.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = DEFAULT_MASK_PATTERN)]
    pub mask_pattern: String,
    /// Ground-truth masks; when given, a metrics report is written.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_MASK_PATTERN)]
    pub truth_pattern: String,
    /// Report file; standard output otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl MaskOutputArgs {
    fn finish(&self, method: &str, masks: &[BinaryMask]) -> Result<()> {
        save_masks(masks, &self.output, &self.mask_pattern)?;
        if let Some(truth_dir) = &self.truth {
            let truth = load_masks(truth_dir, &self.truth_pattern)?;
            emit(&MetricsReport::evaluate(method, masks, &truth)?.to_text(), self.report.as_deref())?;
        }
        Ok(())
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synthetic_params(path: Option<&Path>) -> Result<SyntheticParams> {
    let Some(path) = path else { return Ok(SyntheticParams::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config { path: path.into(), message: e.to_string() })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ExtractBg { input, output, config } => {
            let config = config.resolve()?;
            let bg = extract_background(&input.load_gray()?, &config)?;
            save_plane(&bg.normalized, &output)
        }
        Command::Sbsdb { input, output, config } => {
            let config = config.resolve()?;
            output.finish("sbsdb", &sbsdb_blocked(&input.load_gray()?, &config)?)
        }
        Command::DbsdbTrain { input, model, config } => {
            let config = config.resolve()?;
            let training = train_dbsdb(&input.load(&input.input, 3)?, &config)?;
            eprintln!(
                "trained: gray {} iterations, rgb {:?} iterations",
                training.gray.iterations,
                training.rgb.each_ref().map(|t| t.iterations)
            );
            write_model(&training.model(), &model)
        }
        Command::DbsdbRun { input, model, output, config } => {
            let config = config.resolve()?;
            let model = read_model(&model)?;
            output.finish("dbsdb", &dbsdb_run_blocked(&input.load(&input.input, 3)?, &model, &config)?)
        }
        Command::Baseline { input, train, output, config } => {
            let config = config.resolve()?;
            let test = input.load(&input.input, 1)?;
            let train = match &train {
                Some(dir) => input.load(dir, test.channels())?,
                None => test.clone(),
            };
            let masks = run_baseline(&config.baseline, &train, &test)?;
            output.finish(config.baseline.method.name(), &masks)
        }
        Command::Eval { masks, mask_pattern, truth, truth_pattern, seed, report, config } => {
            if let (Some(masks), Some(truth)) = (&masks, &truth) {
                let predicted = load_masks(masks, &mask_pattern)?;
                let truth = load_masks(truth, &truth_pattern)?;
                return emit(&MetricsReport::evaluate("masks", &predicted, &truth)?.to_text(), report.as_deref());
            }
            let config = config.resolve()?;
            let reports = run_eval(&config, seed)?;
            let text: String = reports.iter().map(MetricsReport::to_text).collect();
            if report.is_some() {
                emit(&text, report.as_deref())?;
            }
            print!("{}", metrics_table(&reports));
            Ok(())
        }
        Command::GenSynthetic {
            kind,
            seed,
            output,
            params,
            frames,
            height,
            width,
            channels,
            noise_sigma,
            flicker_amplitude,
            start_frame,
            pattern,
            mask_pattern,
        } => {
            let mut p = synthetic_params(params.as_deref())?;
            macro_rules! set {
                ($($field:ident),*) => { $(if let Some(v) = $field { p.$field = v; })* };
            }
            set!(frames, height, width, channels, noise_sigma, flicker_amplitude, start_frame);
            let seq = gen_synthetic(kind, &p, seed)?;
            save_sequence(&seq.cube, &output, &pattern)?;
            save_masks(&seq.truth, &output, &mask_pattern)?;
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bsdb: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
