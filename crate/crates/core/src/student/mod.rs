//! The native student scorer: a linear model over hashed n-gram features.

mod calibrate;
mod features;
mod model;
mod train;

pub use calibrate::{calibrate_cutoffs, search_cutoffs, Calibrated, CutoffSearch, SMD_TOLERANCE};
pub use features::{FeatureVector, Featurizer, DEFAULT_DIM, LENGTH_FEATURES};
pub use model::{
    argmax_score, score_from_cutoffs, validate_cutoffs, Mode, StudentModel, TrainConfig, EVEN_CUTOFFS,
    MODEL_FORMAT_VERSION,
};
pub use train::{train_on_features, train_student};
