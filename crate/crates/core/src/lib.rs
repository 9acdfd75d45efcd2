//! Learning from label proportions with MixBag bag-level augmentation and
//! the confidence-interval loss.
//!
//! Training only ever sees bags of instances and their class proportions;
//! instance labels are kept on the dataset for bag construction and
//! evaluation.

pub mod baggen;
pub mod data;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod mixbag;
pub mod model;
pub mod pca;
pub mod rng;
pub mod train;

pub use baggen::{make_bags, make_bags_from_pool, sample_proportion, sub_bag, union_bags, BagGenConfig};
pub use data::{load_csv, make_blobs, Bag, Dataset, Instance, ProportionVector};
pub use error::{Error, Result};
pub use loss::{bag_estimate, ci_loss, proportion_loss, BagPrediction, LossValueWithGrad};
pub use matrix::Matrix;
pub use mixbag::{ci_bounds, mix_bags, sample_gamma, AugmentedBag, ConfidenceDegree, GammaStrategy, MixedBagLabel};
pub use model::{AdamState, Architecture, ModelParams};
pub use rng::Rng;
pub use train::{evaluate, train, BagGenerationVariant, Evaluation, TrainConfig, TrainLog};
