//! Per-view convolutional autoencoders and their reconstruction-error
//! novelty series.

mod autoencoder;
pub mod layers;
mod spec;

pub use autoencoder::{
    build_autoencoder, frame_error, reconstruction_errors, train_autoencoder, Autoencoder, NoveltySeries, TrainConfig, TrainedAutoencoder,
};
pub use spec::{Activation, AutoencoderSpec, LayerKind, LayerPlan, Shape, Stage, FILTER_WINDOW, POOL};
