//! Inverse-distance weighted k-nearest-neighbour imputation against a set of
//! complete reference rows.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::masking::{Mask, MaskScheme, sample_mask};
use crate::matrix::Matrix;
use crate::stats::rmse_missing;
use crate::{Error, Result};

pub const DEFAULT_CANDIDATE_KS: [usize; 8] = [11, 13, 15, 17, 19, 21, 23, 25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnImputer {
    pub reference: Matrix,
    pub k: usize,
    pub candidate_ks: Vec<usize>,
}

impl KnnImputer {
    pub fn new(reference: Matrix, k: usize) -> Result<Self> {
        if k == 0 || k > reference.rows() {
            return Err(Error::invalid(format!(
                "k must lie in [1, {}], got {k}",
                reference.rows()
            )));
        }
        if !reference.is_finite() {
            return Err(Error::invalid("k-NN reference rows must be complete and finite"));
        }
        Ok(Self {
            reference,
            k,
            candidate_ks: DEFAULT_CANDIDATE_KS.to_vec(),
        })
    }

    pub fn with_candidates(mut self, candidate_ks: Vec<usize>) -> Self {
        self.candidate_ks = candidate_ks;
        self
    }

    pub fn impute(&self, x_obs: &Matrix, m: &Mask) -> Result<Matrix> {
        knn_impute(self, x_obs, m)
    }

    /// Picks the candidate `k` with the lowest masked-validation RMSE and
    /// stores it.
    pub fn select_k(&mut self, validation: &Matrix, scheme: MaskScheme, seed: u64) -> Result<usize> {
        self.k = knn_select_k(self, validation, scheme, seed)?;
        Ok(self.k)
    }
}

/// Distance over the query's observed coordinates, rescaled by
/// `√(d / |observed|)`.
fn partial_distance(query: &[f64], observed: &[usize], reference: &[f64], scale: f64) -> f64 {
    let ss: f64 = observed
        .iter()
        .map(|&c| {
            let diff = query[c] - reference[c];
            diff * diff
        })
        .sum();
    ss.sqrt() * scale
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn knn_impute(imp: &KnnImputer, x_obs: &Matrix, m: &Mask) -> Result<Matrix> {
    let d = imp.reference.cols();
    if x_obs.cols() != d || x_obs.shape() != m.shape() {
        return Err(Error::shape(
            "knn_impute",
            format!("{d} columns matching mask {:?}", m.shape()),
            format!("{:?}", x_obs.shape()),
        ));
    }
    let k = imp.k.min(imp.reference.rows());
    let mut out = x_obs.clone();
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(imp.reference.rows());
    for r in 0..x_obs.rows() {
        let observed: Vec<usize> = (0..d).filter(|&c| m.is_observed(r, c)).collect();
        if observed.len() == d {
            continue;
        }
        if observed.is_empty() {
            return Err(Error::invalid(format!("row {r} has no observed features")));
        }
        let scale = (d as f64 / observed.len() as f64).sqrt();
        let query = x_obs.row(r);
        dists.clear();
        dists.extend(
            (0..imp.reference.rows())
                .map(|i| (partial_distance(query, &observed, imp.reference.row(i), scale), i)),
        );
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, by_distance);
            dists.truncate(k);
        }
        dists.sort_by(by_distance);

        let exact: Vec<usize> = dists.iter().filter(|(dist, _)| *dist == 0.0).map(|&(_, i)| i).collect();
        for c in (0..d).filter(|&c| !m.is_observed(r, c)) {
            let value = if !exact.is_empty() {
                exact.iter().map(|&i| imp.reference.get(i, c)).sum::<f64>() / exact.len() as f64
            } else {
                let (num, den) = dists.iter().fold((0.0, 0.0), |(num, den), &(dist, i)| {
                    let w = 1.0 / dist;
                    (num + w * imp.reference.get(i, c), den + w)
                });
                num / den
            };
            out.set(r, c, value);
        }
    }
    Ok(out)
}

/// Candidate `k` minimizing imputation RMSE on `validation` masked by
/// `scheme`. Ties go to the smallest `k`. Rows the mask leaves without any
/// observed feature are kept fully observed.
pub fn knn_select_k(imp: &KnnImputer, validation: &Matrix, scheme: MaskScheme, seed: u64) -> Result<usize> {
    let mut candidates: Vec<usize> = imp
        .candidate_ks
        .iter()
        .copied()
        .filter(|&k| k >= 1 && k <= imp.reference.rows())
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::invalid("no usable candidate k for the reference size"));
    }
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let (n, d) = validation.shape();
    let mut m = sample_mask(scheme, n, d, seed)?;
    for r in 0..n {
        if m.observed_in_row(r) == 0 {
            (0..d).for_each(|c| m.set_observed(r, c, true));
        }
    }
    if m.missing_count() == 0 {
        return Ok(candidates[0]);
    }
    let x_obs = crate::masking::zero_missing(validation, &m)?;
    let mut best = (f64::INFINITY, candidates[0]);
    for k in candidates {
        let trial = KnnImputer {
            k,
            ..imp.clone()
        };
        let rmse = rmse_missing(validation, &knn_impute(&trial, &x_obs, &m)?, &m)?;
        if rmse < best.0 {
            best = (rmse, k);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_weighted_mean() {
        // Query (0, ?) against neighbours at distance 1 and 2 with values 1 and 3.
        let reference = Matrix::from_rows(&[[1.0, 1.0], [2.0, 3.0], [10.0, 100.0]]).unwrap();
        let imp = KnnImputer::new(reference, 2).unwrap();
        let x = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let m = Mask::from_fn(1, 2, |_, c| c == 0);
        let out = knn_impute(&imp, &x, &m).unwrap();
        // distances are scaled by √2, which cancels in the weights
        assert!((out.get(0, 1) - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn shared_value_is_returned() {
        let reference = Matrix::from_rows(&[[0.0, 4.0], [1.0, 4.0], [3.0, 4.0]]).unwrap();
        let imp = KnnImputer::new(reference, 3).unwrap();
        let out = knn_impute(&imp, &Matrix::from_rows(&[[0.4, 0.0]]).unwrap(), &Mask::from_fn(1, 2, |_, c| c == 0)).unwrap();
        assert!((out.get(0, 1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_are_averaged() {
        let reference = Matrix::from_rows(&[[1.0, 2.0], [1.0, 6.0], [1.5, 100.0]]).unwrap();
        let imp = KnnImputer::new(reference, 3).unwrap();
        let out = knn_impute(&imp, &Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), &Mask::from_fn(1, 2, |_, c| c == 0)).unwrap();
        assert_eq!(out.get(0, 1), 4.0);
    }

    #[test]
    fn all_missing_row_is_rejected() {
        let imp = KnnImputer::new(Matrix::zeros(3, 2), 1).unwrap();
        let err = knn_impute(&imp, &Matrix::zeros(2, 2), &Mask::from_fn(2, 2, |r, _| r == 0)).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn invalid_k_is_rejected() {
        assert!(KnnImputer::new(Matrix::zeros(3, 2), 0).is_err());
        assert!(KnnImputer::new(Matrix::zeros(3, 2), 4).is_err());
    }

    #[test]
    fn single_candidate_is_returned() {
        let imp = KnnImputer::new(Matrix::from_fn(30, 3, |r, c| (r + c) as f64), 1)
            .unwrap()
            .with_candidates(vec![7]);
        let v = Matrix::from_fn(5, 3, |r, c| (r * c) as f64);
        assert_eq!(knn_select_k(&imp, &v, MaskScheme::FixedRate(0.3), 0).unwrap(), 7);
    }

    #[test]
    fn duplicated_rows_favour_small_k() {
        // Reference holds two tight copies of each of 12 well-separated
        // prototypes; neighbours beyond the second come from other prototypes.
        let protos: Vec<[f64; 3]> = (0..12)
            .map(|i| {
                let i = i as f64;
                [i * 10.0, (i * 7.0) % 13.0 * 10.0, (i * 5.0) % 13.0 * 10.0]
            })
            .collect();
        let mut rows = Vec::new();
        for p in &protos {
            rows.push([p[0] + 0.01, p[1] + 0.01, p[2] + 0.01]);
            rows.push([p[0] - 0.01, p[1] - 0.01, p[2] - 0.01]);
        }
        let reference = Matrix::from_rows(&rows).unwrap();
        let validation = Matrix::from_rows(&protos).unwrap();
        let imp = KnnImputer::new(reference, 1).unwrap().with_candidates(vec![2, 5, 9, 15]);
        let k = knn_select_k(&imp, &validation, MaskScheme::FeatureSubset(0.34), 3).unwrap();
        assert_eq!(k, 2);
        assert_eq!(k, knn_select_k(&imp, &validation, MaskScheme::FeatureSubset(0.34), 3).unwrap());
    }
}
