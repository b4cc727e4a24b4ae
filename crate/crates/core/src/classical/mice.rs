//! Chained-equations imputation with per-column ridge models.
//!
//! Each column gets a ridge regression on all other columns, fitted once on
//! complete training data. Imputation starts from column means and sweeps the
//! incomplete columns repeatedly; several noisy chains are pooled by the mean.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::masking::{Mask, complete};
use crate::matrix::{Matrix, cholesky_solve};
use crate::seed::{mix64, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub lambda_ridge: f64,
    pub sweeps: usize,
    pub n_imputations: usize,
    /// Add `N(0, residual MSE)` noise to each chain's predictions.
    pub residual_noise: bool,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self {
            lambda_ridge: 1e-3,
            sweeps: 10,
            n_imputations: 5,
            residual_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModel {
    pub intercept: f64,
    /// One coefficient per column; the target column's own entry is zero.
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

impl ColumnModel {
    fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiceImputer {
    pub models: Vec<ColumnModel>,
    pub column_means: Vec<f64>,
    pub config: MiceConfig,
    pub warnings: Vec<String>,
}

impl MiceImputer {
    pub fn fit(train: &Matrix, config: MiceConfig) -> Result<Self> {
        if !(config.lambda_ridge >= 0.0) || config.n_imputations == 0 {
            return Err(Error::invalid("mice needs lambda_ridge >= 0 and n_imputations >= 1"));
        }
        let (n, d) = train.shape();
        if n < 2 {
            return Err(Error::invalid("mice needs at least 2 training rows"));
        }
        let means = train.column_means();
        let centered = Matrix::from_fn(n, d, |r, c| train.get(r, c) - means[c]);
        let gram = centered.t_matmul(&centered)?;
        let mut models = Vec::with_capacity(d);
        let mut warnings = Vec::new();
        for j in 0..d {
            if gram.get(j, j) <= f64::EPSILON * n as f64 * (1.0 + means[j].abs()) {
                warnings.push(format!("column {j} has zero variance; imputing its mean"));
                models.push(ColumnModel {
                    intercept: means[j],
                    coefficients: vec![0.0; d],
                    residual_variance: 0.0,
                });
                continue;
            }
            let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
            let coefs = if others.is_empty() {
                Vec::new()
            } else {
                let a = Matrix::from_fn(others.len(), others.len(), |p, q| {
                    gram.get(others[p], others[q]) + if p == q { config.lambda_ridge } else { 0.0 }
                });
                let b: Vec<f64> = others.iter().map(|&k| gram.get(k, j)).collect();
                cholesky_solve(&a, &b)
                    .map_err(|e| Error::invalid(format!("ridge fit for column {j} failed: {e}")))?
            };
            let mut coefficients = vec![0.0; d];
            for (&k, &b) in others.iter().zip(&coefs) {
                coefficients[k] = b;
            }
            let intercept = means[j] - coefficients.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
            let model = ColumnModel {
                intercept,
                coefficients,
                residual_variance: 0.0,
            };
            let rss: f64 = (0..n)
                .map(|r| {
                    let e = train.get(r, j) - model.predict(train.row(r));
                    e * e
                })
                .sum();
            models.push(ColumnModel {
                residual_variance: rss / n as f64,
                ..model
            });
        }
        Ok(Self {
            models,
            column_means: means,
            config,
            warnings,
        })
    }

    pub fn impute(&self, x_obs: &Matrix, m: &Mask, seed: u64) -> Result<Matrix> {
        mice_impute(self, x_obs, m, self.config.n_imputations, seed)
    }

    fn run_chain(&self, x_obs: &Matrix, m: &Mask, seed: Option<u64>) -> Matrix {
        let d = x_obs.cols();
        let mut x = Matrix::from_fn(x_obs.rows(), d, |r, c| {
            if m.is_observed(r, c) { x_obs.get(r, c) } else { self.column_means[c] }
        });
        let incomplete: Vec<usize> = (0..d).filter(|&c| (0..m.rows()).any(|r| !m.is_observed(r, c))).collect();
        let mut rng = seed.map(rng_from_seed);
        for _ in 0..self.config.sweeps.max(1) {
            for &j in &incomplete {
                let model = &self.models[j];
                let noise = match (&mut rng, model.residual_variance > 0.0) {
                    (Some(_), true) => Some(Normal::new(0.0, model.residual_variance.sqrt()).expect("finite variance")),
                    _ => None,
                };
                for r in 0..x.rows() {
                    if m.is_observed(r, j) {
                        continue;
                    }
                    let mut v = model.predict(x.row(r));
                    if let (Some(dist), Some(rng)) = (&noise, &mut rng) {
                        v += dist.sample(rng);
                    }
                    x.set(r, j, v);
                }
            }
        }
        x
    }
}

/// Runs `n_imputations` chains and pools them by the per-entry mean. Without
/// residual noise all chains coincide, so a single chain is run.
pub fn mice_impute(imp: &MiceImputer, x_obs: &Matrix, m: &Mask, n_imputations: usize, seed: u64) -> Result<Matrix> {
    let d = imp.models.len();
    if x_obs.cols() != d || x_obs.shape() != m.shape() {
        return Err(Error::shape("mice_impute", format!("{d} columns"), format!("{:?}", x_obs.shape())));
    }
    if m.missing_count() == 0 {
        return Ok(x_obs.clone());
    }
    let pooled = if !imp.config.residual_noise || n_imputations <= 1 {
        let chain_seed = imp.config.residual_noise.then(|| mix64(seed));
        imp.run_chain(x_obs, m, chain_seed)
    } else {
        let mut sum = Matrix::zeros(x_obs.rows(), d);
        for c in 0..n_imputations {
            let chain = imp.run_chain(x_obs, m, Some(mix64(seed ^ mix64(c as u64 + 1))));
            for (s, v) in sum.as_mut_slice().iter_mut().zip(chain.as_slice()) {
                *s += v;
            }
        }
        sum.map(|v| v / n_imputations as f64)
    };
    complete(&pooled, x_obs, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data() -> Matrix {
        Matrix::from_fn(80, 3, |r, c| {
            let x1 = (r as f64 * 0.37).sin() * 3.0;
            let x3 = ((r * 13) % 7) as f64 - 3.0;
            match c {
                0 => x1,
                1 => 2.0 * x1,
                _ => x3,
            }
        })
    }

    #[test]
    fn nothing_missing_is_identity() {
        let imp = MiceImputer::fit(&linear_data(), MiceConfig::default()).unwrap();
        let x = linear_data();
        assert_eq!(mice_impute(&imp, &x, &Mask::ones(80, 3), 5, 0).unwrap(), x);
    }

    #[test]
    fn recovers_exact_linear_relation() {
        let cfg = MiceConfig {
            lambda_ridge: 1e-12,
            residual_noise: false,
            ..MiceConfig::default()
        };
        let data = linear_data();
        let imp = MiceImputer::fit(&data, cfg).unwrap();
        let m = Mask::from_fn(80, 3, |r, c| !(c == 1 && r % 3 == 0));
        let out = imp.impute(&data, &m, 7).unwrap();
        for r in 0..80 {
            assert!((out.get(r, 1) - 2.0 * data.get(r, 0)).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_column_imputes_constant() {
        let data = Matrix::from_fn(30, 3, |r, c| if c == 2 { 4.25 } else { (r * (c + 1)) as f64 % 7.0 });
        let imp = MiceImputer::fit(&data, MiceConfig::default()).unwrap();
        assert_eq!(imp.warnings.len(), 1);
        let m = Mask::from_fn(30, 3, |r, c| !(c == 2 && r < 10));
        let out = imp.impute(&data, &m, 3).unwrap();
        for r in 0..10 {
            assert_eq!(out.get(r, 2), 4.25);
        }
    }

    #[test]
    fn noiseless_pooling_equals_single_chain() {
        let cfg = MiceConfig {
            residual_noise: false,
            ..MiceConfig::default()
        };
        let data = linear_data();
        let imp = MiceImputer::fit(&data, cfg).unwrap();
        let m = Mask::from_fn(80, 3, |r, c| (r + c) % 4 != 0);
        assert_eq!(
            mice_impute(&imp, &data, &m, 5, 1).unwrap(),
            mice_impute(&imp, &data, &m, 1, 1).unwrap()
        );
    }

    #[test]
    fn noisy_chains_are_seed_deterministic() {
        let data = linear_data();
        let imp = MiceImputer::fit(&data, MiceConfig::default()).unwrap();
        let m = Mask::from_fn(80, 3, |r, c| (r + c) % 4 != 0);
        assert_eq!(imp.impute(&data, &m, 5).unwrap(), imp.impute(&data, &m, 5).unwrap());
        assert_ne!(imp.impute(&data, &m, 5).unwrap(), imp.impute(&data, &m, 6).unwrap());
    }
}
