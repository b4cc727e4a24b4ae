//! Over-complete denoising autoencoder trained on zero-filled corruptions.

use serde::{Deserialize, Serialize};

use super::{EpochUnit, TrainingTrace, check_query, check_training_data, ensure_finite, hidden_width, row_mse, sample_batch};
use crate::masking::{Mask, MaskScheme, complete, sample_mask_with, zero_missing};
use crate::matrix::Matrix;
use crate::nn::{Activation, Mlp};
use crate::optim::{Adam, Optimizer};
use crate::seed::{Rng, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaeConfig {
    pub batch_size: usize,
    pub max_missing_rate: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub epoch_unit: EpochUnit,
}

impl Default for DaeConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_missing_rate: 0.3,
            alpha: 1e-3,
            epochs: 2000,
            epoch_unit: EpochUnit::Iteration,
        }
    }
}

impl DaeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_missing_rate > 0.0 && self.max_missing_rate < 1.0) {
            return Err(Error::invalid(format!(
                "dae max_missing_rate must lie in (0, 1), got {}",
                self.max_missing_rate
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("dae alpha must be positive, got {}", self.alpha)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("dae batch_size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub config: DaeConfig,
    #[serde(skip)]
    pub trace: TrainingTrace,
}

impl DaeModel {
    /// Encoder `d → ⌈4d/3⌉ → ⌈5d/3⌉ → 2d`, decoder mirrored back to `d`.
    pub fn init(d: usize, config: DaeConfig, rng: &mut Rng) -> Self {
        let (h1, h2, code) = (hidden_width(d, 4.0 / 3.0), hidden_width(d, 5.0 / 3.0), 2 * d);
        let encoder = Mlp::glorot(&[d, h1, h2, code], &[Activation::Elu; 3], rng);
        let decoder = Mlp::glorot(
            &[code, h2, h1, d],
            &[Activation::Elu, Activation::Elu, Activation::Linear],
            rng,
        );
        Self {
            encoder,
            decoder,
            config,
            trace: TrainingTrace::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.decoder.out_dim()
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decoder.forward(&self.encoder.forward(x)?)
    }
}

pub fn dae_train(data: &Matrix, cfg: &DaeConfig, seed: u64) -> Result<DaeModel> {
    cfg.validate()?;
    check_training_data(data)?;
    let (n, d) = data.shape();
    let mut rng = rng_from_seed(seed);
    let mut model = DaeModel::init(d, cfg.clone(), &mut rng);
    let mut enc_opt = Adam::with_defaults(&model.encoder, cfg.alpha);
    let mut dec_opt = Adam::with_defaults(&model.decoder, cfg.alpha);
    let iterations = cfg.epoch_unit.iterations(cfg.epochs, n, cfg.batch_size);
    let mut trace = TrainingTrace::default();

    for it in 0..iterations {
        let idx = sample_batch(n, cfg.batch_size, &mut rng);
        let x = data.select_rows(&idx);
        let m = sample_mask_with(MaskScheme::PerRowUniform(cfg.max_missing_rate), idx.len(), d, &mut rng)?;
        let input = zero_missing(&x, &m)?;
        let (code, enc_cache) = model.encoder.forward_cached(&input)?;
        let (out, dec_cache) = model.decoder.forward_cached(&code)?;
        let (loss, grad) = row_mse(&out, &x)?;
        ensure_finite(loss, it)?;
        let (dec_grads, code_grad) = model.decoder.backward(&dec_cache, &grad)?;
        let (enc_grads, _) = model.encoder.backward(&enc_cache, &code_grad)?;
        dec_opt.step(&mut model.decoder, &dec_grads)?;
        enc_opt.step(&mut model.encoder, &enc_grads)?;
        trace.generator_loss.push(loss);
    }
    model.trace = trace;
    Ok(model)
}

/// One deterministic reconstruction pass; observed entries are copied back.
pub fn dae_impute(model: &DaeModel, x_obs: &Matrix, m: &Mask) -> Result<Matrix> {
    check_query(x_obs, m, model.dim())?;
    let out = model.reconstruct(&zero_missing(x_obs, m)?)?;
    complete(&out, x_obs, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture() {
        let mut rng = rng_from_seed(0);
        let model = DaeModel::init(6, DaeConfig::default(), &mut rng);
        let enc: Vec<_> = model.encoder.layers().iter().map(|l| l.out_dim()).collect();
        let dec: Vec<_> = model.decoder.layers().iter().map(|l| l.out_dim()).collect();
        assert_eq!(enc, vec![8, 10, 12]);
        assert_eq!(dec, vec![10, 8, 6]);
        assert_eq!(model.decoder.layers()[2].activation, Activation::Linear);
    }

    #[test]
    fn constant_data_is_reconstructed() {
        let data = Matrix::filled(1280, 4, 0.7);
        let cfg = DaeConfig {
            epochs: 200,
            batch_size: 64,
            epoch_unit: EpochUnit::FullPass,
            ..DaeConfig::default()
        };
        let model = dae_train(&data, &cfg, 3).unwrap();
        let m = Mask::from_fn(10, 4, |r, c| c != r % 4);
        let out = dae_impute(&model, &data.select_rows(&(0..10).collect::<Vec<_>>()), &m).unwrap();
        for r in 0..10 {
            for c in 0..4 {
                assert!((out.get(r, c) - 0.7).abs() < 1e-2, "{}", out.get(r, c));
            }
        }
    }

    #[test]
    fn impute_is_deterministic_and_preserving() {
        let data = Matrix::from_fn(40, 3, |r, c| ((r + c) % 5) as f64 - 2.0);
        let cfg = DaeConfig {
            epochs: 20,
            batch_size: 8,
            ..DaeConfig::default()
        };
        let model = dae_train(&data, &cfg, 0).unwrap();
        let m = Mask::from_fn(40, 3, |r, c| (r * c) % 4 != 1);
        let a = dae_impute(&model, &data, &m).unwrap();
        assert_eq!(a, dae_impute(&model, &data, &m).unwrap());
        for r in 0..40 {
            for c in 0..3 {
                if m.is_observed(r, c) {
                    assert_eq!(a.get(r, c).to_bits(), data.get(r, c).to_bits());
                }
            }
        }
    }
}
