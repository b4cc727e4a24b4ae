//! Hint-based generative adversarial imputation with a per-entry
//! discriminator.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    EpochUnit, TrainingTrace, check_query, check_training_data, ensure_finite, mask_missing_grad, row_mse,
    sample_batch,
};
use crate::masking::{Mask, MaskScheme, NoiseConfig, complete, corrupt, sample_mask_with};
use crate::matrix::Matrix;
use crate::nn::{Activation, Mlp};
use crate::optim::{Adam, Optimizer};
use crate::seed::{Rng, rng_from_seed};
use crate::{Error, Result};

const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainConfig {
    pub batch_size: usize,
    pub missing_rate: f64,
    pub hint_rate: f64,
    pub sigma: f64,
    pub lambda_mse: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub epoch_unit: EpochUnit,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            missing_rate: 0.2,
            hint_rate: 0.9,
            sigma: 0.01,
            lambda_mse: 1.0,
            alpha: 1e-4,
            epochs: 7000,
            epoch_unit: EpochUnit::Iteration,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("missing_rate", self.missing_rate), ("hint_rate", self.hint_rate)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("gain {name} must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("lambda_mse", self.lambda_mse), ("alpha", self.alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("gain {name} must be positive, got {v}")));
            }
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("gain batch_size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub config: GainConfig,
    #[serde(skip)]
    pub trace: TrainingTrace,
}

impl GainModel {
    pub fn init(d: usize, config: GainConfig, rng: &mut Rng) -> Self {
        let generator = Mlp::glorot(
            &[2 * d, d, d, d],
            &[Activation::Relu, Activation::Relu, Activation::Linear],
            rng,
        );
        let discriminator = Mlp::glorot(
            &[2 * d, d, d, d],
            &[Activation::Relu, Activation::Relu, Activation::Sigmoid],
            rng,
        );
        Self {
            generator,
            discriminator,
            config,
            trace: TrainingTrace::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.out_dim()
    }

    /// Per-entry probability that a component of `x_hat` was observed.
    pub fn discriminate(&self, x_hat: &Matrix, hint: &Matrix) -> Result<Matrix> {
        self.discriminator.forward(&x_hat.hconcat(hint)?)
    }
}

/// `H = B ⊙ m + 0.5 · (1 − B)` with `B ~ Bernoulli(hint_rate)` per entry.
pub fn gain_hint(m: &Mask, hint_rate: f64, seed: u64) -> Result<Matrix> {
    gain_hint_with(m, hint_rate, &mut rng_from_seed(seed))
}

fn gain_hint_with(m: &Mask, hint_rate: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&hint_rate) {
        return Err(Error::invalid(format!("hint_rate must lie in [0, 1], got {hint_rate}")));
    }
    Ok(Matrix::from_fn(m.rows(), m.cols(), |r, c| {
        let revealed = rng.random::<f64>() < hint_rate;
        if revealed {
            m.as_matrix().get(r, c)
        } else {
            0.5
        }
    }))
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Mean binary cross-entropy between the mask and the discriminator output,
/// with its gradient w.r.t. the output probabilities.
fn discriminator_loss(prob: &Matrix, m: &Mask) -> (f64, Matrix) {
    let count = (prob.rows() * prob.cols()).max(1) as f64;
    let mut loss = 0.0;
    let grad = Matrix::from_fn(prob.rows(), prob.cols(), |r, c| {
        let p = clamp_prob(prob.get(r, c));
        if m.is_observed(r, c) {
            loss -= p.ln();
            -1.0 / (p * count)
        } else {
            loss -= (1.0 - p).ln();
            1.0 / ((1.0 - p) * count)
        }
    });
    (loss / count, grad)
}

/// `−mean over missing entries of log D`, with its gradient w.r.t. `D`.
fn adversarial_loss(prob: &Matrix, m: &Mask) -> (f64, Matrix) {
    let missing = m.missing_count();
    if missing == 0 {
        return (0.0, Matrix::zeros(prob.rows(), prob.cols()));
    }
    let count = missing as f64;
    let mut loss = 0.0;
    let grad = Matrix::from_fn(prob.rows(), prob.cols(), |r, c| {
        if m.is_observed(r, c) {
            0.0
        } else {
            let p = clamp_prob(prob.get(r, c));
            loss -= p.ln();
            -1.0 / (p * count)
        }
    });
    (loss / count, grad)
}

pub fn gain_train(data: &Matrix, cfg: &GainConfig, seed: u64) -> Result<GainModel> {
    cfg.validate()?;
    check_training_data(data)?;
    let (n, d) = data.shape();
    let mut rng = rng_from_seed(seed);
    let mut model = GainModel::init(d, cfg.clone(), &mut rng);
    let noise = NoiseConfig::new(cfg.sigma)?;
    let mut gen_opt = Adam::with_defaults(&model.generator, cfg.alpha);
    let mut disc_opt = Adam::with_defaults(&model.discriminator, cfg.alpha);
    let iterations = cfg.epoch_unit.iterations(cfg.epochs, n, cfg.batch_size);
    let mut trace = TrainingTrace::default();

    for it in 0..iterations {
        let idx = sample_batch(n, cfg.batch_size, &mut rng);
        let x = data.select_rows(&idx);
        let m = sample_mask_with(MaskScheme::FixedRate(cfg.missing_rate), idx.len(), d, &mut rng)?;
        let z = noise.sample(idx.len(), d, &mut rng);
        let hint = gain_hint_with(&m, cfg.hint_rate, &mut rng)?;

        let x_tilde = corrupt(&x, &m, &z)?;
        let (g_out, g_cache) = model.generator.forward_cached(&x_tilde.hconcat(m.as_matrix())?)?;
        let x_hat = complete(&g_out, &x, &m)?;
        let disc_in = x_hat.hconcat(&hint)?;

        let (prob, d_cache) = model.discriminator.forward_cached(&disc_in)?;
        let (d_loss, d_grad) = discriminator_loss(&prob, &m);
        ensure_finite(d_loss, it)?;
        let (d_grads, _) = model.discriminator.backward(&d_cache, &d_grad)?;
        disc_opt.step(&mut model.discriminator, &d_grads)?;

        let (prob, d_cache) = model.discriminator.forward_cached(&disc_in)?;
        let (adv, adv_grad) = adversarial_loss(&prob, &m);
        let (mse, mse_grad) = row_mse(&x_hat, &x)?;
        let g_loss = adv + cfg.lambda_mse * mse;
        ensure_finite(g_loss, it)?;
        let (_, input_grad) = model.discriminator.backward(&d_cache, &adv_grad)?;
        let dx_hat = input_grad.column_slice(0, d).zip_map(&mse_grad, |a, s| a + cfg.lambda_mse * s)?;
        let (g_grads, _) = model.generator.backward(&g_cache, &mask_missing_grad(&dx_hat, &m))?;
        gen_opt.step(&mut model.generator, &g_grads)?;

        trace.discriminator_loss.push(d_loss);
        trace.generator_loss.push(g_loss);
    }
    model.trace = trace;
    Ok(model)
}

pub fn gain_impute(model: &GainModel, x_obs: &Matrix, m: &Mask, seed: u64) -> Result<Matrix> {
    check_query(x_obs, m, model.dim())?;
    let mut rng = rng_from_seed(seed);
    let z = NoiseConfig::new(model.config.sigma)?.sample(x_obs.rows(), x_obs.cols(), &mut rng);
    let x_tilde = corrupt(x_obs, m, &z)?;
    let out = model.generator.forward(&x_tilde.hconcat(m.as_matrix())?)?;
    complete(&out, x_obs, m)
}
