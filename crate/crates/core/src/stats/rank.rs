use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher" | "higher-better" | "higher_better" => Ok(Direction::HigherBetter),
            "lower" | "lower-better" | "lower_better" => Ok(Direction::LowerBetter),
            other => Err(Error::invalid(format!("unknown direction {other:?}; use higher or lower"))),
        }
    }
}

/// Ranks with 1 for the best score; tied scores share the mean of the
/// positions they span. Ties are exact equality.
pub fn rank_with_ties(scores: &[f64], direction: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        match direction {
            Direction::HigherBetter => ord.reverse(),
            Direction::LowerBetter => ord,
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Datasets × methods matrix of ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub ranks: Vec<Vec<f64>>,
    pub direction: Direction,
}

impl RankTable {
    /// Ranks each row of `scores` independently.
    pub fn from_scores(
        methods: Vec<String>,
        datasets: Vec<String>,
        scores: &[Vec<f64>],
        direction: Direction,
    ) -> Result<Self> {
        if scores.len() != datasets.len() {
            return Err(Error::shape("RankTable::from_scores", datasets.len(), scores.len()));
        }
        let mut ranks = Vec::with_capacity(scores.len());
        for (i, row) in scores.iter().enumerate() {
            if row.len() != methods.len() {
                return Err(Error::shape(
                    "RankTable::from_scores",
                    format!("{} scores", methods.len()),
                    format!("{} in row {i}", row.len()),
                ));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite score {v} in row {i}")));
            }
            ranks.push(rank_with_ties(row, direction));
        }
        Ok(Self {
            methods,
            datasets,
            ranks,
            direction,
        })
    }

    pub fn n_datasets(&self) -> usize {
        self.ranks.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn mean_ranks(&self) -> Vec<f64> {
        mean_ranks(&self.ranks)
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == name)
    }
}

/// Column means of a rank matrix.
pub fn mean_ranks(ranks: &[Vec<f64>]) -> Vec<f64> {
    let k = ranks.first().map_or(0, Vec::len);
    let n = ranks.len().max(1) as f64;
    (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Rounds published mean ranks back onto the grid they must lie on.
///
/// With tie-averaged ranks every rank is a multiple of 1/2, so a mean over
/// `n_datasets` rows is a multiple of `1 / (2·n_datasets)`.
pub fn snap_mean_ranks(means: &[f64], n_datasets: usize) -> Vec<f64> {
    let grid = 2.0 * n_datasets as f64;
    means.iter().map(|m| (m * grid).round() / grid).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancer_row_with_ties() {
        let r = rank_with_ties(&[0.9700, 0.9744, 0.9744, 0.9749, 0.9739, 0.9755], Direction::HigherBetter);
        assert_eq!(r, vec![6.0, 3.5, 3.5, 2.0, 5.0, 1.0]);
    }

    #[test]
    fn all_equal_scores() {
        assert_eq!(rank_with_ties(&[0.5; 5], Direction::HigherBetter), vec![3.0; 5]);
    }

    #[test]
    fn lower_better_order() {
        assert_eq!(rank_with_ties(&[1.0, 2.0, 3.0], Direction::LowerBetter), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_dataset_mean_ranks() {
        assert_eq!(mean_ranks(&[vec![2.0, 1.0, 3.0]]), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn snapping() {
        let s = snap_mean_ranks(&[3.63, 4.67, 2.83], 12);
        assert_eq!(s, vec![87.0 / 24.0, 112.0 / 24.0, 68.0 / 24.0]);
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("lower".parse::<Direction>().unwrap(), Direction::LowerBetter);
        assert!("sideways".parse::<Direction>().is_err());
    }

    proptest! {
        #[test]
        fn row_sum_is_triangular(scores in prop::collection::vec(prop::sample::select(vec![0.1, 0.2, 0.3, 0.5, 0.8]), 1..12)) {
            let k = scores.len() as f64;
            let r = rank_with_ties(&scores, Direction::HigherBetter);
            prop_assert_eq!(r.iter().sum::<f64>(), k * (k + 1.0) / 2.0);
        }

        #[test]
        fn monotone_transform_invariance(scores in prop::collection::vec(-50.0f64..50.0, 1..10)) {
            // exact transforms so that no two scores collapse under rounding
            let scaled: Vec<f64> = scores.iter().map(|v| v * 4.0).collect();
            let negated: Vec<f64> = scores.iter().map(|v| -v).collect();
            let base = rank_with_ties(&scores, Direction::LowerBetter);
            prop_assert_eq!(&base, &rank_with_ties(&scaled, Direction::LowerBetter));
            prop_assert_eq!(&base, &rank_with_ties(&negated, Direction::HigherBetter));
        }

        #[test]
        fn row_permutation_keeps_means(rows in prop::collection::vec(prop::collection::vec(1.0f64..6.0, 4), 2..8), shift in 0usize..8) {
            let mut rotated = rows.clone();
            let len = rotated.len();
            rotated.rotate_left(shift % len);
            let a = mean_ranks(&rows);
            let b = mean_ranks(&rotated);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
