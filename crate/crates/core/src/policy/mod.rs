//! Surrogate value-map policy: linear scoring over local image features.

mod features;
mod model;

pub use self::features::{
    pixel_features, FeatureMap, ImageAnalysis, FEATURE_DIM, FEATURE_NAMES, FILL_RATIO, PATCH_RADIUS,
};
pub use self::model::{
    place_mask, Example, Mask, ModelCheckpoint, TrainConfig, ValueModel, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
