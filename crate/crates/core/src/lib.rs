//! End-to-end laboratory for mmWave FMCW gesture sensing without hardware.
//!
//! The crate synthesizes raw radar returns from scripted hand trajectories,
//! reduces them to dynamic range-angle image (DRAI) sequences, augments
//! recorded sequences, segments continuous streams with a motion-indicator
//! driven dynamic window, and classifies segments with a small
//! convolutional-recurrent model. A streaming harness ties the stages
//! together and measures their latency.

pub mod augment;
pub mod config;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod segment;
pub mod stream;
pub mod synth;

pub use config::{default_config, RadarConfig};
pub use error::{Error, Result};
