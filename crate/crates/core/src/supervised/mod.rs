//! Supervised baselines: bag-of-words Naive Bayes Multinomial stage-0
//! classifiers, a random-forest stage-1 / multi-class classifier, the
//! two-stage hierarchy combining them, evaluation metrics, and
//! information-gain attribute ranking.

mod forest;
mod info_gain;
mod metrics;
mod nbm;
mod two_stage;

pub use forest::{forest_train, ForestConfig, ForestModel, ForestPrediction};
pub use info_gain::{info_gain, rank_attributes};
pub use metrics::{prf, ClassMetrics, ConfusionMatrix, WeightedMetrics};
pub use nbm::{nbm_train, BagOfWords, NbmModel, NbmPrediction, OTHERS_TOKEN};
pub use two_stage::{two_stage_train, TwoStageInstance, TwoStageModel};
