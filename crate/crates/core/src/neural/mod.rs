//! Neural imputers: the Wasserstein adversarial imputer, the original
//! hint-based adversarial imputer and a denoising autoencoder.

mod dae;
mod gain;
mod wgain;

pub use dae::{DaeConfig, DaeModel, dae_impute, dae_train};
pub use gain::{GainConfig, GainModel, gain_hint, gain_impute, gain_train};
pub use wgain::{
    WgainConfig, WgainModel, critic_gradients, critic_objective, generator_loss, generator_loss_and_grads,
    generator_objective, wgain_impute, wgain_train,
};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::seed::Rng;
use crate::{Error, Result};

/// What one unit of the `epochs` setting means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochUnit {
    /// One mini-batch update.
    #[default]
    Iteration,
    /// One pass over the training rows, `⌈n / batch⌉` updates.
    FullPass,
}

impl EpochUnit {
    pub fn iterations(self, epochs: usize, n: usize, batch: usize) -> usize {
        match self {
            EpochUnit::Iteration => epochs,
            EpochUnit::FullPass => epochs * n.div_ceil(batch.max(1)),
        }
    }
}

/// Per-iteration losses recorded during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    /// Discriminator or critic loss; empty for the autoencoder.
    pub discriminator_loss: Vec<f64>,
    pub generator_loss: Vec<f64>,
    /// Largest critic layer norm observed right after each clip step.
    pub critic_norm_max: Vec<f64>,
}

pub(crate) fn check_training_data(data: &Matrix) -> Result<()> {
    if data.rows() < 2 || data.cols() == 0 {
        return Err(Error::invalid(format!(
            "training needs at least 2 rows and 1 column, got {}x{}",
            data.rows(),
            data.cols()
        )));
    }
    if !data.is_finite() {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    Ok(())
}

pub(crate) fn sample_batch(n: usize, batch: usize, rng: &mut Rng) -> Vec<usize> {
    if n <= batch {
        (0..n).collect()
    } else {
        index::sample(rng, n, batch).into_vec()
    }
}

pub(crate) fn ensure_finite(loss: f64, iteration: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::TrainingDiverged { iteration, loss })
    }
}

pub(crate) fn check_query(x_obs: &Matrix, m: &crate::masking::Mask, d: usize) -> Result<()> {
    if x_obs.cols() != d {
        return Err(Error::shape("impute", format!("{d} columns"), x_obs.cols()));
    }
    if x_obs.shape() != m.shape() {
        return Err(Error::shape("impute", format!("mask {:?}", m.shape()), format!("{:?}", x_obs.shape())));
    }
    Ok(())
}

/// Mean over rows of the squared row distance, and its gradient w.r.t. `a`.
pub(crate) fn row_mse(a: &Matrix, b: &Matrix) -> Result<(f64, Matrix)> {
    let n = a.rows().max(1) as f64;
    let diff = a.zip_map(b, |x, y| x - y)?;
    let loss = diff.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
    Ok((loss, diff.map(|v| 2.0 * v / n)))
}

/// `g ⊙ (1 − m)`.
pub(crate) fn mask_missing_grad(g: &Matrix, m: &crate::masking::Mask) -> Matrix {
    Matrix::from_fn(g.rows(), g.cols(), |r, c| if m.is_observed(r, c) { 0.0 } else { g.get(r, c) })
}

pub(crate) fn hidden_width(d: usize, factor: f64) -> usize {
    ((d as f64) * factor - 1e-9).ceil().max(1.0) as usize
}
