//! Adversarial negatives: small MLPs, RMSprop, and WGAN training.

pub mod mlp;
pub mod rmsprop;
pub mod wgan;

pub use mlp::{Arch, Gradients, Layer, MlpParams};
pub use rmsprop::{RmsProp, RmsPropConfig};
pub use wgan::{
    fooling_rates, make_negatives, random_negatives, train_classifier, train_wgan, ClassifierConfig, FoolingRates,
    GanConfig, GanHistoryEntry, GanOutcome, NegativeSet, TrainedClassifier,
};
