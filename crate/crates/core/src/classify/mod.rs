//! Nine-class identification of buried shapes from tactile images.
//!
//! [`generate_dataset`] renders a labeled corpus, [`train`] fits a small
//! convolutional network with augmented mini-batches, and [`evaluate`] /
//! [`predict`] run it without augmentation.

mod augment;
mod dataset;
mod label;
mod model_io;
pub mod net;
mod train;

pub use augment::{augment, AugmentConfig};
pub use dataset::{
    generate_dataset, hex_sha256, plan_dataset, render_planned, DatasetConfig, DatasetManifest,
    LabeledImages, ManifestEntry, PlannedImage, Split, MANIFEST_FILE, MIN_PER_CLASS,
};
pub use label::{ClassLabel, NUM_CLASSES};
pub use model_io::{FORMAT_VERSION, MAGIC};
pub use net::{gradient_check, LayerCheck, Network};
pub use train::{
    evaluate, evaluate_images, predict, train, train_manifest, ConfusionMatrix, EpochLog,
    ModelParams, Prediction, TrainConfig, TrainOutcome,
};
