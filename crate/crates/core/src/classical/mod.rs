//! Non-neural baselines.

mod knn;
mod mean;
mod mice;

pub use knn::{DEFAULT_CANDIDATE_KS, KnnImputer, knn_impute, knn_select_k};
pub use mean::{MeanImputer, mean_impute};
pub use mice::{MiceConfig, MiceImputer, mice_impute};
