//! Missingness masks and the corruption/completion algebra shared by all
//! imputers.
//!
//! A mask entry of 1 marks an observed value, 0 a missing one.

use rand::Rng as _;
use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::seed::{Rng, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask(Matrix);

impl Mask {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if let Some(v) = m.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("mask entries must be 0 or 1, found {v}")));
        }
        Ok(Self(m))
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self(Matrix::filled(rows, cols, 1.0))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Matrix::zeros(rows, cols))
    }

    /// `true` marks an observed entry.
    pub fn from_fn(rows: usize, cols: usize, mut observed: impl FnMut(usize, usize) -> bool) -> Self {
        Self(Matrix::from_fn(rows, cols, |r, c| if observed(r, c) { 1.0 } else { 0.0 }))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.0.get(r, c) == 1.0
    }

    pub fn missing_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v == 0.0).count()
    }

    pub fn observed_in_row(&self, r: usize) -> usize {
        self.0.row(r).iter().filter(|&&v| v == 1.0).count()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mask {
        Mask(self.0.select_rows(idx))
    }

    pub fn set_observed(&mut self, r: usize, c: usize, observed: bool) {
        self.0.set(r, c, if observed { 1.0 } else { 0.0 });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "rate", rename_all = "snake_case")]
pub enum MaskScheme {
    /// Each row draws `r ~ U(0, max_rate)`, then every entry is missing with
    /// probability `r`.
    PerRowUniform(f64),
    /// Every entry is missing with probability `p`.
    FixedRate(f64),
    /// `⌈fraction·d⌉` distinct columns are missing in every row.
    FeatureSubset(f64),
}

impl MaskScheme {
    pub fn rate(&self) -> f64 {
        match *self {
            MaskScheme::PerRowUniform(r) | MaskScheme::FixedRate(r) | MaskScheme::FeatureSubset(r) => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rate();
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("mask rate must lie in [0, 1], got {r}")));
        }
        Ok(())
    }

    /// Number of missing columns for a feature-subset mask over `d` columns.
    pub fn subset_size(fraction: f64, d: usize) -> usize {
        // Snap away float noise such as 0.3 * 10 = 3.0000000000000004.
        let exact = fraction * d as f64;
        let rounded = exact.round();
        let k = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
        (k as usize).min(d)
    }
}

pub fn sample_mask(scheme: MaskScheme, n: usize, d: usize, seed: u64) -> Result<Mask> {
    sample_mask_with(scheme, n, d, &mut rng_from_seed(seed))
}

pub fn sample_mask_with(scheme: MaskScheme, n: usize, d: usize, rng: &mut Rng) -> Result<Mask> {
    scheme.validate()?;
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("mask shape must be at least 1x1, got {n}x{d}")));
    }
    let mask = match scheme {
        MaskScheme::PerRowUniform(max_rate) => {
            let mut m = Mask::ones(n, d);
            for r in 0..n {
                let rate = rng.random::<f64>() * max_rate;
                for c in 0..d {
                    if rng.random::<f64>() < rate {
                        m.set_observed(r, c, false);
                    }
                }
            }
            m
        }
        MaskScheme::FixedRate(p) => Mask::from_fn(n, d, |_, _| rng.random::<f64>() >= p),
        MaskScheme::FeatureSubset(fraction) => {
            let k = MaskScheme::subset_size(fraction, d);
            let mut missing = vec![false; d];
            for c in index::sample(rng, d, k) {
                missing[c] = true;
            }
            Mask::from_fn(n, d, |_, c| !missing[c])
        }
    };
    Ok(mask)
}

/// `z ⊙ (1 − m) + x ⊙ m`.
pub fn corrupt(x: &Matrix, m: &Mask, z: &Matrix) -> Result<Matrix> {
    if x.shape() != m.shape() || z.shape() != m.shape() {
        return Err(Error::shape(
            "corrupt",
            format!("{:?}", m.shape()),
            format!("x {:?}, z {:?}", x.shape(), z.shape()),
        ));
    }
    Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| {
        if m.is_observed(r, c) { x.get(r, c) } else { z.get(r, c) }
    }))
}

/// Observed entries from `x_tilde`, missing entries from `gen_out`.
///
/// Observed values are copied, not recomputed, so they are preserved
/// bit-exactly.
pub fn complete(gen_out: &Matrix, x_tilde: &Matrix, m: &Mask) -> Result<Matrix> {
    if gen_out.shape() != m.shape() || x_tilde.shape() != m.shape() {
        return Err(Error::shape(
            "complete",
            format!("{:?}", m.shape()),
            format!("gen_out {:?}, x_tilde {:?}", gen_out.shape(), x_tilde.shape()),
        ));
    }
    Ok(Matrix::from_fn(m.rows(), m.cols(), |r, c| {
        if m.is_observed(r, c) { x_tilde.get(r, c) } else { gen_out.get(r, c) }
    }))
}

/// `x ⊙ m`: missing entries zeroed.
pub fn zero_missing(x: &Matrix, m: &Mask) -> Result<Matrix> {
    corrupt(x, m, &Matrix::zeros(x.rows(), x.cols()))
}

/// Isotropic Gaussian fill noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 0.01 }
    }
}

impl NoiseConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sample(&self, rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated positive");
        Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_rate_gives_all_ones() {
        let m = sample_mask(MaskScheme::PerRowUniform(0.0), 50, 7, 1).unwrap();
        assert_eq!(m, Mask::ones(50, 7));
    }

    #[test]
    fn feature_subset_half_of_ten() {
        let m = sample_mask(MaskScheme::FeatureSubset(0.5), 20, 10, 9).unwrap();
        let zero_cols = (0..10).filter(|&c| (0..20).all(|r| !m.is_observed(r, c))).count();
        let one_cols = (0..10).filter(|&c| (0..20).all(|r| m.is_observed(r, c))).count();
        assert_eq!((zero_cols, one_cols), (5, 5));
    }

    #[test]
    fn feature_subset_rounds_up() {
        assert_eq!(MaskScheme::subset_size(0.1, 9), 1);
        assert_eq!(MaskScheme::subset_size(0.3, 10), 3);
        assert_eq!(MaskScheme::subset_size(0.25, 10), 3);
        assert_eq!(MaskScheme::subset_size(1.0, 4), 4);
    }

    #[test]
    fn per_row_uniform_mean_rate() {
        // E[r] = 0.15 for r ~ U(0, 0.3).
        let m = sample_mask(MaskScheme::PerRowUniform(0.3), 10_000, 10, 2024).unwrap();
        let frac = m.missing_count() as f64 / 100_000.0;
        assert!((frac - 0.15).abs() < 0.01, "{frac}");
    }

    #[test]
    fn rejects_bad_rate_and_shape() {
        assert!(sample_mask(MaskScheme::FixedRate(1.5), 3, 3, 0).is_err());
        assert!(sample_mask(MaskScheme::FixedRate(0.5), 0, 3, 0).is_err());
    }

    #[test]
    fn corrupt_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let z = Matrix::filled(1, 3, 0.5);
        let m = Mask::from_matrix(Matrix::from_rows(&[[1.0, 0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(corrupt(&x, &m, &z).unwrap().as_slice(), &[1.0, 0.5, 3.0]);
        assert_eq!(corrupt(&x, &Mask::ones(1, 3), &z).unwrap(), x);
        assert_eq!(corrupt(&x, &Mask::zeros(1, 3), &z).unwrap(), z);
        assert!(corrupt(&x, &Mask::ones(1, 2), &z).is_err());
    }

    #[test]
    fn complete_examples() {
        let g = Matrix::from_rows(&[[9.0, 9.0]]).unwrap();
        let xt = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let m = Mask::from_matrix(Matrix::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(complete(&g, &xt, &m).unwrap().as_slice(), &[1.0, 9.0]);
        assert_eq!(complete(&g, &xt, &Mask::ones(1, 2)).unwrap(), xt);
        assert_eq!(complete(&g, &xt, &Mask::zeros(1, 2)).unwrap(), g);
    }

    #[test]
    fn mask_rejects_non_binary() {
        assert!(Mask::from_matrix(Matrix::filled(1, 1, 0.5)).is_err());
    }

    #[test]
    fn noise_rejects_non_positive_sigma() {
        assert!(NoiseConfig::new(0.0).is_err());
        assert_eq!(NoiseConfig::default().sigma, 0.01);
    }

    fn matrix_and_mask() -> impl Strategy<Value = (Matrix, Matrix, Mask)> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (
                prop::collection::vec(-1e6f64..1e6, r * c),
                prop::collection::vec(-1e6f64..1e6, r * c),
                prop::collection::vec(any::<bool>(), r * c),
            )
                .prop_map(move |(a, b, bits)| {
                    (
                        Matrix::from_vec(r, c, a).unwrap(),
                        Matrix::from_vec(r, c, b).unwrap(),
                        Mask::from_fn(r, c, |i, j| bits[i * c + j]),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn complete_preserves_observed((g, xt, m) in matrix_and_mask()) {
            let out = complete(&g, &xt, &m).unwrap();
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    if m.is_observed(r, c) {
                        prop_assert_eq!(out.get(r, c).to_bits(), xt.get(r, c).to_bits());
                    }
                }
            }
        }

        #[test]
        fn corrupt_identities((x, z, m) in matrix_and_mask()) {
            let (r, c) = m.shape();
            prop_assert_eq!(corrupt(&x, &Mask::ones(r, c), &z).unwrap(), x.clone());
            prop_assert_eq!(corrupt(&x, &Mask::zeros(r, c), &z).unwrap(), z.clone());
            let _ = m;
        }

        #[test]
        fn feature_subset_constant_per_column(n in 1usize..30, d in 1usize..12, frac in 0.0f64..=1.0, seed: u64) {
            let m = sample_mask(MaskScheme::FeatureSubset(frac), n, d, seed).unwrap();
            for c in 0..d {
                let first = m.is_observed(0, c);
                prop_assert!((0..n).all(|r| m.is_observed(r, c) == first));
            }
        }

        #[test]
        fn sampling_is_deterministic(n in 1usize..20, d in 1usize..8, rate in 0.0f64..=1.0, seed: u64) {
            for scheme in [MaskScheme::PerRowUniform(rate), MaskScheme::FixedRate(rate), MaskScheme::FeatureSubset(rate)] {
                prop_assert_eq!(sample_mask(scheme, n, d, seed).unwrap(), sample_mask(scheme, n, d, seed).unwrap());
            }
        }
    }
}
