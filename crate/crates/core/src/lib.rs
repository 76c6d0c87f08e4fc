//! Unsupervised multi-view highlight detection for game stream recordings.
//!
//! The pipeline turns a recording into three per-timestep novelty signals
//! (face-cam and game-footage autoencoder reconstruction errors plus
//! speech-band audio features), fuses them with an LSTM next-step
//! forecaster, and cuts the forecaster's prediction error into clips:
//!
//! ```text
//! ingest -> vision / audio -> fusion -> clipper -> clip manifest
//! ```

pub mod archive;
pub mod audio;
pub mod clipper;
pub mod config;
pub mod error;
pub mod evalbench;
pub mod fusion;
pub mod ingest;
pub mod optim;
pub mod persist;
pub mod pipeline;
pub mod vision;

pub use error::{Error, Result};
pub use ingest::View;
