use serde::{Deserialize, Serialize};

use crate::masking::Mask;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Column means of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    pub column_means: Vec<f64>,
}

impl MeanImputer {
    pub fn fit(train: &Matrix) -> Self {
        Self {
            column_means: train.column_means(),
        }
    }

    pub fn impute(&self, x_obs: &Matrix, m: &Mask) -> Result<Matrix> {
        mean_impute(x_obs, m, &self.column_means)
    }
}

pub fn mean_impute(x_obs: &Matrix, m: &Mask, column_means: &[f64]) -> Result<Matrix> {
    if x_obs.shape() != m.shape() || column_means.len() != x_obs.cols() {
        return Err(Error::shape(
            "mean_impute",
            format!("{:?} with {} means", m.shape(), column_means.len()),
            format!("{:?}", x_obs.shape()),
        ));
    }
    Ok(Matrix::from_fn(x_obs.rows(), x_obs.cols(), |r, c| {
        if m.is_observed(r, c) { x_obs.get(r, c) } else { column_means[c] }
    }))
}
