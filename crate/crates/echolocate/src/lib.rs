//! Blind shoebox-room geometry inference from a single spherical-microphone-array
//! recording.
//!
//! The library covers the full chain: an image-source room simulator for a rigid
//! 32-capsule sphere, eigen-beam (HOA) encoding, MVDR spatial spectra for DOA
//! estimation, beamformed GCC-PHAT for per-reflection TDOA estimation, three
//! source-distance estimators (array-height trigonometry, floor-reflection delay
//! geometry, and a small trained fusion regressor), and finally image-source
//! localization plus boundary-plane reconstruction with evaluation metrics.
//!
//! All estimation runs in an array-centered frame; simulation uses a room frame
//! with the origin at the lower corner of the floor. Runs are deterministic for
//! a fixed seed and configuration.

pub mod array;
pub mod bessel;
pub mod config;
pub mod dataset;
pub mod doa;
pub mod encode;
pub mod eval;
pub mod geometry;
pub mod linalg;
pub mod mlp;
pub mod pipeline;
pub mod plots;
pub mod room;
pub mod sh;
pub mod simulator;
pub mod source_loc;
pub mod stft;
pub mod tdoa;
pub mod vad;
pub mod wav;

mod error;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Default speed of sound in m/s.
pub const SOUND_SPEED: f64 = 343.0;
