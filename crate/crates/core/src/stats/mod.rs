//! Rank statistics for comparing methods across datasets, plus the error
//! metric used to score imputations.

pub mod friedman;
pub mod rank;
pub mod special;

pub use friedman::{
    BonferroniDunn, FriedmanResult, PosthocComparison, bonferroni_dunn, friedman_chi2, friedman_from_mean_ranks,
    friedman_statistic, iman_davenport,
};
pub use rank::{Direction, RankTable, mean_ranks, rank_with_ties, snap_mean_ranks};

use crate::masking::Mask;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Root mean squared error over the entries `m` marks missing.
pub fn rmse_missing(original: &Matrix, imputed: &Matrix, m: &Mask) -> Result<f64> {
    if original.shape() != imputed.shape() || original.shape() != m.shape() {
        return Err(Error::shape(
            "rmse_missing",
            format!("{:?}", original.shape()),
            format!("{:?} and mask {:?}", imputed.shape(), m.shape()),
        ));
    }
    let (mut ss, mut count) = (0.0, 0usize);
    for r in 0..original.rows() {
        for c in 0..original.cols() {
            if !m.is_observed(r, c) {
                let e = original.get(r, c) - imputed.get(r, c);
                ss += e * e;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid("rmse over missing entries needs at least one missing entry"));
    }
    Ok((ss / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_counts_only_missing() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let y = Matrix::from_rows(&[[100.0, 2.0], [3.0, 7.0]]).unwrap();
        let m = Mask::from_fn(2, 2, |r, c| !(r == 1 && c == 1));
        assert_eq!(rmse_missing(&x, &y, &m).unwrap(), 3.0);
        assert!(rmse_missing(&x, &y, &Mask::ones(2, 2)).is_err());
    }
}
