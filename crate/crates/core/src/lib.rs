//! Background subtraction for static-camera video using diffusion bases.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. Image IO, the command line and thread-pool execution live in the
//! companion `bsdb` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;

pub mod baselines;
pub mod blocks;
pub mod config;
pub mod dynamic;
pub mod frame;
pub mod histogram;
pub mod linalg;
pub mod mask;
pub mod spectral;
pub mod window;

pub use config::{Epsilon, PipelineConfig};
pub use error::{Error, ErrorKind, Result};
pub use frame::{Datacube, Plane};
pub use mask::BinaryMask;
