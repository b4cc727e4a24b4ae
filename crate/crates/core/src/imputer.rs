//! Uniform training and imputation over every imputer, and the on-disk model
//! format used by the command-line tool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classical::{DEFAULT_CANDIDATE_KS, KnnImputer, MeanImputer, MiceConfig, MiceImputer};
use crate::dataio::Scaler;
use crate::masking::{Mask, MaskScheme, complete};
use crate::matrix::Matrix;
use crate::neural::{
    DaeConfig, DaeModel, GainConfig, GainModel, WgainConfig, WgainModel, dae_impute, dae_train, gain_impute, gain_train,
    wgain_impute, wgain_train,
};
use crate::seed::{mix64, rng_from_seed};
use crate::{Error, Result};

/// k-NN settings. Without a fixed `k` the imputer holds out a fifth of the
/// training rows and picks the candidate with the lowest validation RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnSpec {
    pub k: Option<usize>,
    pub candidate_ks: Vec<usize>,
    pub validation_mask: MaskScheme,
}

impl Default for KnnSpec {
    fn default() -> Self {
        Self {
            k: None,
            candidate_ks: DEFAULT_CANDIDATE_KS.to_vec(),
            validation_mask: MaskScheme::FixedRate(0.2),
        }
    }
}

/// What to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputerSpec {
    Wgain(WgainConfig),
    Gain(GainConfig),
    Dae(DaeConfig),
    Knn(KnnSpec),
    Mice(MiceConfig),
    Mean,
}

impl ImputerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ImputerSpec::Wgain(_) => "WGAIN",
            ImputerSpec::Gain(_) => "GAIN",
            ImputerSpec::Dae(_) => "DAE",
            ImputerSpec::Knn(_) => "k-NN",
            ImputerSpec::Mice(_) => "MICE",
            ImputerSpec::Mean => "Mean",
        }
    }

    /// Trains on complete, standardized rows.
    pub fn train(&self, data: &Matrix, seed: u64) -> Result<ImputerModel> {
        if data.rows() == 0 || !data.is_finite() {
            return Err(Error::invalid("imputer training data must be non-empty and complete"));
        }
        Ok(match self {
            ImputerSpec::Wgain(cfg) => ImputerModel::Wgain(wgain_train(data, cfg, seed)?),
            ImputerSpec::Gain(cfg) => ImputerModel::Gain(gain_train(data, cfg, seed)?),
            ImputerSpec::Dae(cfg) => ImputerModel::Dae(dae_train(data, cfg, seed)?),
            ImputerSpec::Knn(spec) => ImputerModel::Knn(train_knn(data, spec, seed)?),
            ImputerSpec::Mice(cfg) => ImputerModel::Mice(MiceImputer::fit(data, cfg.clone())?),
            ImputerSpec::Mean => ImputerModel::Mean(MeanImputer::fit(data)),
        })
    }
}

fn train_knn(data: &Matrix, spec: &KnnSpec, seed: u64) -> Result<KnnImputer> {
    if let Some(k) = spec.k {
        return KnnImputer::new(data.clone(), k);
    }
    let n = data.rows();
    let n_val = n / 5;
    if n_val == 0 || n - n_val == 0 {
        let k = spec.candidate_ks.iter().copied().filter(|&k| k >= 1 && k <= n).min().unwrap_or(1);
        return KnnImputer::new(data.clone(), k.min(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng_from_seed(seed));
    let reference = data.select_rows(&idx[n_val..]);
    let validation = data.select_rows(&idx[..n_val]);
    let mut probe = KnnImputer::new(reference, 1)?.with_candidates(spec.candidate_ks.clone());
    let k = probe.select_k(&validation, spec.validation_mask, mix64(seed))?;
    Ok(KnnImputer::new(data.clone(), k)?.with_candidates(spec.candidate_ks.clone()))
}

/// A trained imputer of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ImputerModel {
    Wgain(WgainModel),
    Gain(GainModel),
    Dae(DaeModel),
    Knn(KnnImputer),
    Mice(MiceImputer),
    Mean(MeanImputer),
}

impl ImputerModel {
    pub fn name(&self) -> &'static str {
        match self {
            ImputerModel::Wgain(_) => "WGAIN",
            ImputerModel::Gain(_) => "GAIN",
            ImputerModel::Dae(_) => "DAE",
            ImputerModel::Knn(_) => "k-NN",
            ImputerModel::Mice(_) => "MICE",
            ImputerModel::Mean(_) => "Mean",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ImputerModel::Wgain(m) => m.dim(),
            ImputerModel::Gain(m) => m.dim(),
            ImputerModel::Dae(m) => m.dim(),
            ImputerModel::Knn(m) => m.reference.cols(),
            ImputerModel::Mice(m) => m.column_means.len(),
            ImputerModel::Mean(m) => m.column_means.len(),
        }
    }

    /// Fills the entries `m` marks missing. `seed` drives the stochastic
    /// imputers and is ignored by the deterministic ones. Observed entries
    /// of `x_obs` are returned bit for bit.
    pub fn impute(&self, x_obs: &Matrix, m: &Mask, seed: u64) -> Result<Matrix> {
        match self {
            ImputerModel::Wgain(model) => wgain_impute(model, x_obs, m, seed),
            ImputerModel::Gain(model) => gain_impute(model, x_obs, m, seed),
            ImputerModel::Dae(model) => dae_impute(model, x_obs, m),
            ImputerModel::Knn(model) => model.impute(x_obs, m),
            ImputerModel::Mice(model) => model.impute(x_obs, m, seed),
            ImputerModel::Mean(model) => model.impute(x_obs, m),
        }
    }
}

/// A trained imputer with the scaler that maps raw features into its
/// training space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub scaler: Scaler,
    pub imputer: ImputerModel,
}

impl SavedModel {
    /// Imputes raw-unit data: standardize, impute, map back, then restore
    /// the observed entries exactly.
    pub fn impute_raw(&self, x_obs: &Matrix, m: &Mask, seed: u64) -> Result<Matrix> {
        if x_obs.shape() != m.shape() {
            return Err(Error::shape("impute_raw", format!("{:?}", m.shape()), format!("{:?}", x_obs.shape())));
        }
        // missing cells may hold anything, including NaN
        let clean = Matrix::from_fn(x_obs.rows(), x_obs.cols(), |r, c| {
            if m.is_observed(r, c) { x_obs.get(r, c) } else { 0.0 }
        });
        let scaled = self.scaler.transform(&clean)?;
        let filled = self.imputer.impute(&scaled, m, seed)?;
        complete(&self.scaler.inverse_transform(&filled)?, &clean, m)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Matrix {
        Matrix::from_fn(60, 3, |r, c| ((r * (c + 2)) % 9) as f64 * 0.3 - 1.0 + c as f64 * 0.1)
    }

    #[test]
    fn knn_selection_uses_candidates() {
        let spec = ImputerSpec::Knn(KnnSpec {
            candidate_ks: vec![3, 5],
            ..KnnSpec::default()
        });
        let ImputerModel::Knn(knn) = spec.train(&data(), 1).unwrap() else { unreachable!() };
        assert!([3, 5].contains(&knn.k));
        assert_eq!(knn.reference.rows(), 60);
    }

    #[test]
    fn saved_model_round_trip() {
        let spec = ImputerSpec::Mice(MiceConfig::default());
        let raw = data().map(|v| v * 10.0 + 3.0);
        let scaler = Scaler::fit(&raw).unwrap();
        let imputer = spec.train(&scaler.transform(&raw).unwrap(), 0).unwrap();
        let saved = SavedModel { scaler, imputer };
        let back = SavedModel::from_json(&saved.to_json().unwrap()).unwrap();
        assert_eq!(saved, back);
        let m = Mask::from_fn(60, 3, |r, c| (r + c) % 3 != 0);
        assert_eq!(saved.impute_raw(&raw, &m, 4).unwrap(), back.impute_raw(&raw, &m, 4).unwrap());
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: ImputerSpec = toml::from_str("kind = \"wgain\"\nepochs = 10\n").unwrap();
        let ImputerSpec::Wgain(cfg) = spec else { unreachable!() };
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.batch_size, 128);
        let mean: ImputerSpec = toml::from_str("kind = \"mean\"").unwrap();
        assert_eq!(mean, ImputerSpec::Mean);
    }
}
