//! Front end for the `bsdb-core` algorithms: image-sequence IO, TOML
//! configuration, synthetic benchmarks, parallel block execution,
//! evaluation reports and the `bsdb` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod parallel;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
