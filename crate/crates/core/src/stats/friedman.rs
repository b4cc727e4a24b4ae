//! Friedman rank test, the Iman-Davenport F refinement and Bonferroni-Dunn
//! comparisons against a control method.

use serde::{Deserialize, Serialize};

use super::rank::RankTable;
use super::special::{chi2_sf, f_sf, normal_quantile, normal_sf};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub p_chi2: f64,
    pub f_stat: f64,
    pub p_f: f64,
    pub n_datasets: usize,
    pub n_methods: usize,
}

/// `χ²_F = 12N / (k(k+1)) · (Σ R̄_j² − k(k+1)²/4)` from mean ranks.
pub fn friedman_statistic(mean_ranks: &[f64], n_datasets: usize) -> Result<f64> {
    let k = mean_ranks.len();
    if n_datasets < 2 || k < 2 {
        return Err(Error::invalid(format!(
            "Friedman test needs at least 2 datasets and 2 methods, got N = {n_datasets}, k = {k}"
        )));
    }
    let (n, kf) = (n_datasets as f64, k as f64);
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * n / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    // tiny negatives come from rounding when all means equal (k+1)/2
    Ok(chi2.max(0.0))
}

/// `(F_F, p)` with `F_F = (N−1)·χ² / (N(k−1) − χ²)` on `(k−1, (k−1)(N−1))`
/// degrees of freedom.
pub fn iman_davenport(chi2: f64, n_datasets: usize, n_methods: usize) -> Result<(f64, f64)> {
    let (n, k) = (n_datasets as f64, n_methods as f64);
    let denom = n * (k - 1.0) - chi2;
    if n_datasets < 2 || n_methods < 2 || denom <= 0.0 {
        return Err(Error::invalid(format!(
            "Iman-Davenport statistic undefined for chi2 = {chi2}, N = {n_datasets}, k = {n_methods}"
        )));
    }
    let f = (n - 1.0) * chi2 / denom;
    Ok((f, f_sf(f, k - 1.0, (k - 1.0) * (n - 1.0))))
}

/// Friedman and Iman-Davenport results from mean ranks. When every dataset
/// ranks the methods identically the F statistic is unbounded; it is then
/// reported as infinite with `p_f = 0`.
pub fn friedman_from_mean_ranks(mean_ranks: &[f64], n_datasets: usize) -> Result<FriedmanResult> {
    let chi2 = friedman_statistic(mean_ranks, n_datasets)?;
    let k = mean_ranks.len();
    let p_chi2 = chi2_sf(chi2, (k - 1) as f64);
    let (f_stat, p_f) = iman_davenport(chi2, n_datasets, k).unwrap_or((f64::INFINITY, 0.0));
    Ok(FriedmanResult {
        chi2,
        p_chi2,
        f_stat,
        p_f,
        n_datasets,
        n_methods: k,
    })
}

/// Friedman test over a rank table, optionally dividing χ² by the tie
/// correction `1 − Σ(t³ − t) / (N(k³ − k))`.
pub fn friedman_chi2(table: &RankTable, tie_correction: bool) -> Result<FriedmanResult> {
    let (n, k) = (table.n_datasets(), table.n_methods());
    let mut chi2 = friedman_statistic(&table.mean_ranks(), n)?;
    if tie_correction {
        let ties: f64 = table.ranks.iter().map(|row| tie_sum(row)).sum();
        let kf = k as f64;
        let c = 1.0 - ties / (n as f64 * (kf * kf * kf - kf));
        if c <= 0.0 {
            return Err(Error::invalid("every dataset ties all methods; Friedman test is undefined"));
        }
        chi2 /= c;
    }
    let p_chi2 = chi2_sf(chi2, (k - 1) as f64);
    let (f_stat, p_f) = iman_davenport(chi2, n, k).unwrap_or((f64::INFINITY, 0.0));
    Ok(FriedmanResult {
        chi2,
        p_chi2,
        f_stat,
        p_f,
        n_datasets: n,
        n_methods: k,
    })
}

/// `Σ (t³ − t)` over groups of tied ranks in one row.
fn tie_sum(row: &[f64]) -> f64 {
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocComparison {
    pub method: String,
    pub mean_rank: f64,
    /// Positive when the method ranks worse than the control.
    pub z: f64,
    pub p_raw: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonferroniDunn {
    pub control: String,
    pub alpha: f64,
    /// Two-sided normal critical value for `alpha / (k − 1)`.
    pub critical_z: f64,
    /// Mean-rank difference needed for significance.
    pub critical_difference: f64,
    pub comparisons: Vec<PosthocComparison>,
}

/// Compares every method with `control`:
/// `z_j = (R̄_j − R̄_control) / √(k(k+1) / (6N))`, significant iff the
/// two-sided p-value is below `alpha / (k − 1)`.
pub fn bonferroni_dunn(
    methods: &[String],
    mean_ranks: &[f64],
    n_datasets: usize,
    control: &str,
    alpha: f64,
) -> Result<BonferroniDunn> {
    let k = methods.len();
    if mean_ranks.len() != k {
        return Err(Error::shape("bonferroni_dunn", k, mean_ranks.len()));
    }
    if k < 2 || n_datasets == 0 {
        return Err(Error::invalid("Bonferroni-Dunn needs at least 2 methods and 1 dataset"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let c = methods
        .iter()
        .position(|m| m == control)
        .ok_or_else(|| Error::invalid(format!("unknown control method {control:?}")))?;
    let kf = k as f64;
    let se = (kf * (kf + 1.0) / (6.0 * n_datasets as f64)).sqrt();
    let adjusted = alpha / (kf - 1.0);
    let critical_z = normal_quantile(1.0 - adjusted / 2.0);
    let comparisons = methods
        .iter()
        .zip(mean_ranks)
        .enumerate()
        .map(|(j, (name, &r))| {
            let z = (r - mean_ranks[c]) / se;
            let p_raw = (2.0 * normal_sf(z.abs())).min(1.0);
            PosthocComparison {
                method: name.clone(),
                mean_rank: r,
                z,
                p_raw,
                significant: j != c && p_raw < adjusted,
            }
        })
        .collect();
    Ok(BonferroniDunn {
        control: control.to_string(),
        alpha,
        critical_z,
        critical_difference: critical_z * se,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rank::{Direction, snap_mean_ranks};

    fn names() -> Vec<String> {
        ["k-NN", "MICE", "DAE", "VAEAC", "GAIN", "WGAIN"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ten_percent_p_values() {
        let means = [4.00, 3.33, 4.21, 3.75, 3.21, 2.50];
        let r = friedman_from_mean_ranks(&means, 12).unwrap();
        assert!((r.p_chi2 - 0.252).abs() < 0.005, "{}", r.p_chi2);
        let (f, p) = iman_davenport(6.616, 12, 6).unwrap();
        assert!((f - 1.363).abs() < 1e-3 && (p - 0.253).abs() < 0.005, "{f} {p}");
    }

    #[test]
    fn no_disagreement() {
        let r = friedman_from_mean_ranks(&[3.5; 6], 12).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.p_chi2, 1.0);
        assert_eq!((r.f_stat, r.p_f), (0.0, 1.0));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(friedman_from_mean_ranks(&[1.0, 2.0], 1).is_err());
        assert!(friedman_from_mean_ranks(&[1.0], 5).is_err());
        assert!(iman_davenport(10.0, 2, 6).is_err());
    }

    #[test]
    fn larger_chi2_smaller_p() {
        let ps: Vec<f64> = [0.5, 2.0, 5.0, 9.0, 14.0].iter().map(|&c| iman_davenport(c, 12, 6).unwrap().1).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn posthoc_examples() {
        let means20 = snap_mean_ranks(&[3.54, 4.04, 4.79, 3.13, 2.83, 2.67], 12);
        let bd = bonferroni_dunn(&names(), &means20, 12, "WGAIN", 0.10).unwrap();
        let dae = &bd.comparisons[2];
        assert!((dae.z - 2.776).abs() < 0.01 && (dae.p_raw - 0.0055).abs() < 0.0005);
        assert!(dae.significant);
        let own = &bd.comparisons[5];
        assert_eq!(own.z, 0.0);
        assert!(!own.significant);

        let means40 = snap_mean_ranks(&[3.17, 4.21, 4.71, 3.59, 2.21, 3.12], 12);
        let bd = bonferroni_dunn(&names(), &means40, 12, "WGAIN", 0.10).unwrap();
        assert!((bd.comparisons[2].p_raw - 0.037).abs() < 0.002);
        assert!(!bd.comparisons[2].significant);
        assert!(bonferroni_dunn(&names(), &means40, 12, "VAE", 0.10).is_err());
    }

    #[test]
    fn tie_correction_inflates_statistic() {
        let table = RankTable::from_scores(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into(), "z".into()],
            &[vec![1.0, 1.0, 3.0], vec![2.0, 1.0, 3.0], vec![1.0, 2.0, 2.0]],
            Direction::LowerBetter,
        )
        .unwrap();
        let plain = friedman_chi2(&table, false).unwrap();
        let corrected = friedman_chi2(&table, true).unwrap();
        assert!(corrected.chi2 > plain.chi2);
    }
}
