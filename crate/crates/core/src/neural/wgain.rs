//! Wasserstein generative adversarial imputation.
//!
//! The generator sees the noise-filled record concatenated with its mask and
//! proposes values for the missing entries. The critic scores completed
//! records (again concatenated with the mask); its parameters are clipped
//! after every update to keep it within a compact set.

use serde::{Deserialize, Serialize};

use super::{
    EpochUnit, TrainingTrace, check_query, check_training_data, ensure_finite, hidden_width, mask_missing_grad,
    row_mse, sample_batch,
};
use crate::masking::{Mask, MaskScheme, NoiseConfig, complete, corrupt, sample_mask_with};
use crate::matrix::Matrix;
use crate::nn::{Activation, ClipMode, Mlp, MlpGrads, clip};
use crate::optim::{Optimizer, RmsProp};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WgainConfig {
    pub batch_size: usize,
    pub max_missing_rate: f64,
    pub sigma: f64,
    pub lambda_critic: f64,
    pub lambda_gen: f64,
    pub lambda_mse: f64,
    pub w_max: f64,
    pub clip_mode: ClipMode,
    pub alpha: f64,
    pub rho: f64,
    pub eps: f64,
    pub epochs: usize,
    pub epoch_unit: EpochUnit,
}

impl Default for WgainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_missing_rate: 0.3,
            sigma: 0.01,
            lambda_critic: 10.0,
            lambda_gen: 2.0,
            lambda_mse: 1.0,
            w_max: 1.0,
            clip_mode: ClipMode::LayerNorm,
            alpha: 1e-4,
            rho: 0.9,
            eps: 1e-8,
            epochs: 8000,
            epoch_unit: EpochUnit::Iteration,
        }
    }
}

impl WgainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("lambda_critic", self.lambda_critic),
            ("lambda_gen", self.lambda_gen),
            ("lambda_mse", self.lambda_mse),
            ("w_max", self.w_max),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("wgain {name} must be positive, got {v}")));
            }
        }
        if !(self.max_missing_rate > 0.0 && self.max_missing_rate < 1.0) {
            return Err(Error::invalid(format!(
                "wgain max_missing_rate must lie in (0, 1), got {}",
                self.max_missing_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("wgain batch_size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WgainModel {
    pub generator: Mlp,
    pub critic: Mlp,
    pub config: WgainConfig,
    #[serde(skip)]
    pub trace: TrainingTrace,
}

impl WgainModel {
    /// Freshly initialized networks for `d` features.
    pub fn init(d: usize, config: WgainConfig, rng: &mut crate::seed::Rng) -> Self {
        let h1 = hidden_width(d, 1.5);
        let h2 = hidden_width(d, 1.25);
        let generator = Mlp::glorot(
            &[2 * d, h1, h2, d],
            &[Activation::Relu, Activation::Relu, Activation::Linear],
            rng,
        );
        let critic = Mlp::glorot(
            &[2 * d, h1, h2, 1],
            &[Activation::Relu, Activation::Relu, Activation::Linear],
            rng,
        );
        Self {
            generator,
            critic,
            config,
            trace: TrainingTrace::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.out_dim()
    }
}

fn check_batch(x_hat: &Matrix, x: &Matrix, m: &Mask) -> Result<()> {
    if x_hat.shape() != x.shape() || x.shape() != m.shape() {
        return Err(Error::shape(
            "wgain objective",
            format!("{:?}", m.shape()),
            format!("x_hat {:?}, x {:?}", x_hat.shape(), x.shape()),
        ));
    }
    Ok(())
}

/// `λ_c · (mean f(x̂, m) − mean f(x, m))`. Minimizing it widens the critic's
/// gap between real and imputed records.
pub fn critic_objective(critic: &Mlp, x_hat: &Matrix, x: &Matrix, m: &Mask, lambda_critic: f64) -> Result<f64> {
    check_batch(x_hat, x, m)?;
    let fake = critic.forward(&x_hat.hconcat(m.as_matrix())?)?;
    let real = critic.forward(&x.hconcat(m.as_matrix())?)?;
    Ok(lambda_critic * (fake.mean() - real.mean()))
}

/// [`critic_objective`] and its gradient w.r.t. the critic parameters, with
/// `x̂` held fixed.
pub fn critic_gradients(
    critic: &Mlp,
    x_hat: &Matrix,
    x: &Matrix,
    m: &Mask,
    lambda_critic: f64,
) -> Result<(f64, MlpGrads)> {
    check_batch(x_hat, x, m)?;
    let b = m.rows() as f64;
    let (fake, fake_cache) = critic.forward_cached(&x_hat.hconcat(m.as_matrix())?)?;
    let (real, real_cache) = critic.forward_cached(&x.hconcat(m.as_matrix())?)?;
    let loss = lambda_critic * (fake.mean() - real.mean());
    let (mut grads, _) = critic.backward(&fake_cache, &Matrix::filled(m.rows(), 1, lambda_critic / b))?;
    let (real_grads, _) = critic.backward(&real_cache, &Matrix::filled(m.rows(), 1, -lambda_critic / b))?;
    grads.add_assign(&real_grads);
    Ok((loss, grads))
}

/// `−λ_g · mean f(x̂, m) + λ_mse · mean ‖x̂ − x‖²`.
pub fn generator_objective(
    critic: &Mlp,
    x_hat: &Matrix,
    x: &Matrix,
    m: &Mask,
    lambda_gen: f64,
    lambda_mse: f64,
) -> Result<f64> {
    check_batch(x_hat, x, m)?;
    let fake = critic.forward(&x_hat.hconcat(m.as_matrix())?)?;
    let (mse, _) = row_mse(x_hat, x)?;
    Ok(-lambda_gen * fake.mean() + lambda_mse * mse)
}

/// Objective value and `∂J/∂x̂`.
fn generator_objective_grad(
    critic: &Mlp,
    x_hat: &Matrix,
    x: &Matrix,
    m: &Mask,
    lambda_gen: f64,
    lambda_mse: f64,
) -> Result<(f64, Matrix)> {
    let d = x.cols();
    let b = m.rows() as f64;
    let (fake, cache) = critic.forward_cached(&x_hat.hconcat(m.as_matrix())?)?;
    let (mse, mse_grad) = row_mse(x_hat, x)?;
    let loss = -lambda_gen * fake.mean() + lambda_mse * mse;
    let (_, input_grad) = critic.backward(&cache, &Matrix::filled(m.rows(), 1, -lambda_gen / b))?;
    let adv_grad = input_grad.column_slice(0, d);
    let grad = adv_grad.zip_map(&mse_grad, |a, s| a + lambda_mse * s)?;
    Ok((loss, grad))
}

struct GeneratorPass {
    x_hat: Matrix,
    cache: crate::nn::ForwardCache,
}

fn generator_pass(generator: &Mlp, x: &Matrix, m: &Mask, z: &Matrix) -> Result<GeneratorPass> {
    let x_tilde = corrupt(x, m, z)?;
    let (out, cache) = generator.forward_cached(&x_tilde.hconcat(m.as_matrix())?)?;
    let x_hat = complete(&out, x, m)?;
    Ok(GeneratorPass { x_hat, cache })
}

/// Generator objective as a function of the generator parameters, for a frozen
/// batch `(x, m, z)`.
pub fn generator_loss(
    generator: &Mlp,
    critic: &Mlp,
    x: &Matrix,
    m: &Mask,
    z: &Matrix,
    lambda_gen: f64,
    lambda_mse: f64,
) -> Result<f64> {
    let pass = generator_pass(generator, x, m, z)?;
    generator_objective(critic, &pass.x_hat, x, m, lambda_gen, lambda_mse)
}

/// [`generator_loss`] and its gradient w.r.t. the generator parameters.
pub fn generator_loss_and_grads(
    generator: &Mlp,
    critic: &Mlp,
    x: &Matrix,
    m: &Mask,
    z: &Matrix,
    lambda_gen: f64,
    lambda_mse: f64,
) -> Result<(f64, MlpGrads)> {
    let pass = generator_pass(generator, x, m, z)?;
    let (loss, dx_hat) = generator_objective_grad(critic, &pass.x_hat, x, m, lambda_gen, lambda_mse)?;
    let (grads, _) = generator.backward(&pass.cache, &mask_missing_grad(&dx_hat, m))?;
    Ok((loss, grads))
}

/// Alternating critic / generator training on complete, standardized data.
pub fn wgain_train(data: &Matrix, cfg: &WgainConfig, seed: u64) -> Result<WgainModel> {
    cfg.validate()?;
    check_training_data(data)?;
    let (n, d) = data.shape();
    let mut rng = rng_from_seed(seed);
    let mut model = WgainModel::init(d, cfg.clone(), &mut rng);
    let noise = NoiseConfig::new(cfg.sigma)?;
    let mut gen_opt = RmsProp::new(&model.generator, cfg.alpha, cfg.rho, cfg.eps);
    let mut critic_opt = RmsProp::new(&model.critic, cfg.alpha, cfg.rho, cfg.eps);
    let iterations = cfg.epoch_unit.iterations(cfg.epochs, n, cfg.batch_size);
    let mut trace = TrainingTrace::default();

    for it in 0..iterations {
        let idx = sample_batch(n, cfg.batch_size, &mut rng);
        let x = data.select_rows(&idx);
        let m = sample_mask_with(MaskScheme::PerRowUniform(cfg.max_missing_rate), idx.len(), d, &mut rng)?;
        let z = noise.sample(idx.len(), d, &mut rng);
        let pass = generator_pass(&model.generator, &x, &m, &z)?;

        let (critic_loss, critic_grads) = critic_gradients(&model.critic, &pass.x_hat, &x, &m, cfg.lambda_critic)?;
        ensure_finite(critic_loss, it)?;
        critic_opt.step(&mut model.critic, &critic_grads)?;
        let raw_norm = model
            .critic
            .layers()
            .iter()
            .map(|l| l.param_norm())
            .fold(0.0, |a: f64, b| if b.is_nan() || b > a { b } else { a });
        ensure_finite(raw_norm, it)?;
        clip(&mut model.critic, cfg.clip_mode, cfg.w_max)?;
        trace.critic_norm_max.push(
            model
                .critic
                .layers()
                .iter()
                .map(|l| l.param_norm())
                .fold(0.0, f64::max),
        );

        let (gen_loss, dx_hat) =
            generator_objective_grad(&model.critic, &pass.x_hat, &x, &m, cfg.lambda_gen, cfg.lambda_mse)?;
        ensure_finite(gen_loss, it)?;
        let (gen_grads, _) = model.generator.backward(&pass.cache, &mask_missing_grad(&dx_hat, &m))?;
        gen_opt.step(&mut model.generator, &gen_grads)?;

        trace.discriminator_loss.push(critic_loss);
        trace.generator_loss.push(gen_loss);
    }
    model.trace = trace;
    Ok(model)
}

/// Fills missing entries with generator samples; observed entries of `x_obs`
/// are returned unchanged.
pub fn wgain_impute(model: &WgainModel, x_obs: &Matrix, m: &Mask, seed: u64) -> Result<Matrix> {
    check_query(x_obs, m, model.dim())?;
    let mut rng = rng_from_seed(seed);
    let z = NoiseConfig::new(model.config.sigma)?.sample(x_obs.rows(), x_obs.cols(), &mut rng);
    let x_tilde = corrupt(x_obs, m, &z)?;
    let out = model.generator.forward(&x_tilde.hconcat(m.as_matrix())?)?;
    complete(&out, x_obs, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseLayer;

    /// Critic that returns the first input column.
    fn first_column_critic(width: usize) -> Mlp {
        let w = Matrix::from_fn(width, 1, |r, _| if r == 0 { 1.0 } else { 0.0 });
        Mlp::new(vec![DenseLayer::new(w, vec![0.0], Activation::Linear).unwrap()]).unwrap()
    }

    #[test]
    fn critic_objective_zero_for_identical_batches() {
        let mut rng = rng_from_seed(1);
        let model = WgainModel::init(3, WgainConfig::default(), &mut rng);
        let x = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.1);
        let m = Mask::ones(4, 3);
        assert_eq!(critic_objective(&model.critic, &x, &x, &m, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_critic_gives_zero() {
        let w = Matrix::zeros(4, 1);
        let critic = Mlp::new(vec![DenseLayer::new(w, vec![3.5], Activation::Linear).unwrap()]).unwrap();
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[-1.0, 0.0], [7.0, 2.0]]).unwrap();
        assert_eq!(critic_objective(&critic, &a, &b, &Mask::ones(2, 2), 10.0).unwrap(), 0.0);
    }

    #[test]
    fn critic_objective_hand_value() {
        // critic(x̂) = (1, 2), critic(x) = (3, 5): 10 · (1.5 − 4) = −25
        let critic = first_column_critic(4);
        let x_hat = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let x = Matrix::from_rows(&[[3.0, 0.0], [5.0, 0.0]]).unwrap();
        let v = critic_objective(&critic, &x_hat, &x, &Mask::ones(2, 2), 10.0).unwrap();
        assert!((v + 25.0).abs() < 1e-12);
    }

    #[test]
    fn generator_objective_examples() {
        let zero_critic = Mlp::new(vec![
            DenseLayer::new(Matrix::zeros(4, 1), vec![0.0], Activation::Linear).unwrap(),
        ])
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, 3.0], [3.0, 1.0]]).unwrap();
        let m = Mask::ones(2, 2);
        assert_eq!(generator_objective(&zero_critic, &x, &x, &m, 2.0, 1.0).unwrap(), 0.0);
        // critic values (1, 3), λ_g = 2 → −2 · 2 = −4
        let v = generator_objective(&first_column_critic(4), &x, &x, &m, 2.0, 1.0).unwrap();
        assert!((v + 4.0).abs() < 1e-12);
    }

    #[test]
    fn objectives_reject_shape_mismatch() {
        let critic = first_column_critic(4);
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(3, 2);
        assert!(critic_objective(&critic, &a, &b, &Mask::ones(2, 2), 1.0).is_err());
        assert!(generator_objective(&critic, &a, &a, &Mask::ones(3, 2), 1.0, 1.0).is_err());
    }

    #[test]
    fn architecture_follows_input_dimension() {
        let mut rng = rng_from_seed(0);
        let model = WgainModel::init(20, WgainConfig::default(), &mut rng);
        let dims: Vec<_> = model.generator.layers().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        assert_eq!(dims, vec![(40, 30), (30, 25), (25, 20)]);
        let dims: Vec<_> = model.critic.layers().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        assert_eq!(dims, vec![(40, 30), (30, 25), (25, 1)]);
    }

    #[test]
    fn default_hyperparameters() {
        let c = WgainConfig::default();
        assert_eq!(
            (c.batch_size, c.max_missing_rate, c.sigma, c.w_max, c.alpha, c.epochs),
            (128, 0.3, 0.01, 1.0, 1e-4, 8000)
        );
        assert_eq!((c.lambda_critic, c.lambda_gen, c.lambda_mse), (10.0, 2.0, 1.0));
    }

    fn toy_data() -> Matrix {
        Matrix::from_fn(60, 3, |r, c| ((r * 7 + c * 3) % 11) as f64 / 5.0 - 1.0)
    }

    fn short_cfg() -> WgainConfig {
        WgainConfig {
            epochs: 40,
            batch_size: 16,
            ..WgainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_clips() {
        let a = wgain_train(&toy_data(), &short_cfg(), 5).unwrap();
        let b = wgain_train(&toy_data(), &short_cfg(), 5).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.critic_norm_max.iter().all(|&n| n <= 1.0 + 1e-9));
        assert_eq!(a.trace.generator_loss.len(), 40);
    }

    #[test]
    fn training_rejects_bad_input() {
        assert!(wgain_train(&Matrix::zeros(1, 3), &short_cfg(), 0).is_err());
        let bad = WgainConfig {
            max_missing_rate: 1.0,
            ..short_cfg()
        };
        assert!(wgain_train(&toy_data(), &bad, 0).is_err());
    }

    #[test]
    fn diverging_training_is_reported() {
        let cfg = WgainConfig {
            alpha: 1e150,
            lambda_mse: 1e200,
            ..short_cfg()
        };
        match wgain_train(&toy_data(), &cfg, 1) {
            Err(Error::TrainingDiverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn impute_contracts() {
        let model = wgain_train(&toy_data(), &short_cfg(), 2).unwrap();
        let x = toy_data().select_rows(&[0, 1, 2, 3]);
        assert_eq!(wgain_impute(&model, &x, &Mask::ones(4, 3), 9).unwrap(), x);

        let m = Mask::from_fn(4, 3, |r, c| (r + c) % 2 == 0);
        let a = wgain_impute(&model, &x, &m, 1).unwrap();
        let b = wgain_impute(&model, &x, &m, 2).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                if m.is_observed(r, c) {
                    assert_eq!(a.get(r, c).to_bits(), x.get(r, c).to_bits());
                    assert_eq!(a.get(r, c), b.get(r, c));
                }
            }
        }
        assert_ne!(a, b);
        assert!(wgain_impute(&model, &Matrix::zeros(4, 2), &Mask::ones(4, 2), 0).is_err());
    }
}
