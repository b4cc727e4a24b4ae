//! Downstream classifiers used to score imputations: multinomial logistic
//! regression, k-nearest-neighbour voting and Gaussian naive Bayes.
//!
//! Labels are class indices `0..n_classes`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

pub const NB_VARIANCE_FLOOR: f64 = 1e-9;
pub const DEFAULT_SEARCH_BUDGET: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    Knn,
    NaiveBayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::LogisticRegression,
        ClassifierKind::Knn,
        ClassifierKind::NaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::Knn => "knn",
            ClassifierKind::NaiveBayes => "naive_bayes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    LogisticRegression { penalty: f64, max_iter: usize },
    Knn { k: usize },
    NaiveBayes,
}

impl Hyperparams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::LogisticRegression { .. } => ClassifierKind::LogisticRegression,
            Hyperparams::Knn { .. } => ClassifierKind::Knn,
            Hyperparams::NaiveBayes => ClassifierKind::NaiveBayes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    /// `features × classes`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub n_classes: usize,
    /// Penalized training loss before the first step and after each step.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnClassifier {
    pub reference: Matrix,
    pub labels: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// `classes × features`.
    pub means: Matrix,
    pub variances: Matrix,
    pub log_priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    LogisticRegression(LogisticRegression),
    Knn(KnnClassifier),
    NaiveBayes(GaussianNb),
}

fn check_labels(x: &Matrix, y: &[usize]) -> Result<usize> {
    if x.rows() != y.len() {
        return Err(Error::shape("classifier fit", format!("{} labels", x.rows()), y.len()));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::invalid("classifier training data is empty"));
    }
    if !x.is_finite() {
        return Err(Error::invalid("classifier training data contains non-finite values"));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    y.iter().for_each(|&c| present[c] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::invalid("classifier training data must contain at least 2 classes"));
    }
    Ok(n_classes)
}

pub fn fit(hp: &Hyperparams, x: &Matrix, y: &[usize]) -> Result<Classifier> {
    let n_classes = check_labels(x, y)?;
    Ok(match *hp {
        Hyperparams::LogisticRegression { penalty, max_iter } => {
            Classifier::LogisticRegression(fit_logistic(x, y, n_classes, penalty, max_iter)?)
        }
        Hyperparams::Knn { k } => {
            if k == 0 {
                return Err(Error::invalid("k-NN classifier needs k >= 1"));
            }
            Classifier::Knn(KnnClassifier {
                reference: x.clone(),
                labels: y.to_vec(),
                k: k.min(x.rows()),
            })
        }
        Hyperparams::NaiveBayes => Classifier::NaiveBayes(fit_nb(x, y, n_classes)),
    })
}

/// Row-wise softmax probabilities of `x·W + b`.
fn softmax_scores(x: &Matrix, weights: &Matrix, bias: &[f64]) -> Result<Matrix> {
    let mut z = x.matmul(weights)?;
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(z)
}

/// Mean cross-entropy plus `penalty/2 · ‖W‖²`.
fn logistic_loss(x: &Matrix, y: &[usize], weights: &Matrix, bias: &[f64], penalty: f64) -> Result<(f64, Matrix)> {
    let p = softmax_scores(x, weights, bias)?;
    let n = x.rows() as f64;
    let ce = y.iter().enumerate().map(|(r, &c)| -p.get(r, c).max(1e-300).ln()).sum::<f64>() / n;
    let reg = 0.5 * penalty * weights.as_slice().iter().map(|w| w * w).sum::<f64>();
    Ok((ce + reg, p))
}

fn fit_logistic(x: &Matrix, y: &[usize], n_classes: usize, penalty: f64, max_iter: usize) -> Result<LogisticRegression> {
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(Error::invalid(format!("logistic penalty must be >= 0, got {penalty}")));
    }
    let (n, d) = x.shape();
    let mut weights = Matrix::zeros(d, n_classes);
    let mut bias = vec![0.0; n_classes];
    let (mut loss, mut p) = logistic_loss(x, y, &weights, &bias, penalty)?;
    let mut trace = vec![loss];
    let mut step = 1.0;
    for _ in 0..max_iter {
        // dL/dz = (p − onehot) / n
        let mut dz = p;
        for (r, &c) in y.iter().enumerate() {
            dz.set(r, c, dz.get(r, c) - 1.0);
        }
        let dz = dz.map(|v| v / n as f64);
        let mut gw = x.t_matmul(&dz)?;
        for (g, w) in gw.as_mut_slice().iter_mut().zip(weights.as_slice()) {
            *g += penalty * w;
        }
        let gb = dz.column_sums();
        let g2: f64 = gw.as_slice().iter().chain(&gb).map(|g| g * g).sum();
        if g2.sqrt() < 1e-8 {
            break;
        }
        // Armijo backtracking from a slightly enlarged previous step
        step *= 2.0;
        let accepted = loop {
            let w_new = weights.zip_map(&gw, |w, g| w - step * g)?;
            let b_new: Vec<f64> = bias.iter().zip(&gb).map(|(b, g)| b - step * g).collect();
            let (l_new, p_new) = logistic_loss(x, y, &w_new, &b_new, penalty)?;
            if l_new <= loss - 1e-4 * step * g2 {
                break Some((w_new, b_new, l_new, p_new));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        let Some((w_new, b_new, l_new, p_new)) = accepted else {
            break;
        };
        weights = w_new;
        bias = b_new;
        loss = l_new;
        p = p_new;
        trace.push(loss);
    }
    Ok(LogisticRegression {
        weights,
        bias,
        n_classes,
        loss_trace: trace,
    })
}

fn fit_nb(x: &Matrix, y: &[usize], n_classes: usize) -> GaussianNb {
    let d = x.cols();
    let mut counts = vec![0usize; n_classes];
    let mut means = Matrix::zeros(n_classes, d);
    for (r, &c) in y.iter().enumerate() {
        counts[c] += 1;
        for (m, v) in means.row_mut(c).iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        means.row_mut(c).iter_mut().for_each(|m| *m /= count.max(1) as f64);
    }
    let mut variances = Matrix::zeros(n_classes, d);
    for (r, &c) in y.iter().enumerate() {
        for j in 0..d {
            let e = x.get(r, j) - means.get(c, j);
            variances.set(c, j, variances.get(c, j) + e * e);
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        variances
            .row_mut(c)
            .iter_mut()
            .for_each(|v| *v = (*v / count.max(1) as f64).max(NB_VARIANCE_FLOOR));
    }
    let n = y.len() as f64;
    let log_priors = counts
        .iter()
        .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64 / n).ln() })
        .collect();
    GaussianNb {
        means,
        variances,
        log_priors,
    }
}

/// Index of the largest score; ties go to the smallest index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::NaiveBayes(_) => ClassifierKind::NaiveBayes,
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Classifier::LogisticRegression(lr) => lr.weights.rows(),
            Classifier::Knn(knn) => knn.reference.cols(),
            Classifier::NaiveBayes(nb) => nb.means.cols(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.n_features() {
            return Err(Error::shape("predict", format!("{} features", self.n_features()), x.cols()));
        }
        match self {
            Classifier::LogisticRegression(lr) => {
                let p = softmax_scores(x, &lr.weights, &lr.bias)?;
                Ok((0..x.rows()).map(|r| argmax(p.row(r))).collect())
            }
            Classifier::Knn(knn) => Ok((0..x.rows()).map(|r| knn.vote(x.row(r))).collect()),
            Classifier::NaiveBayes(nb) => Ok((0..x.rows()).map(|r| argmax(&nb.log_joint(x.row(r)))).collect()),
        }
    }
}

impl KnnClassifier {
    /// Majority label among the `k` nearest reference rows; distance ties
    /// break by reference index, vote ties by the smallest label.
    fn vote(&self, query: &[f64]) -> usize {
        let mut dists: Vec<(f64, usize)> = (0..self.reference.rows())
            .map(|i| {
                let d2 = self
                    .reference
                    .row(i)
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k.min(dists.len());
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let n_classes = self.labels.iter().max().map_or(0, |m| m + 1);
        let mut votes = vec![0.0; n_classes];
        for &(_, i) in &dists[..k] {
            votes[self.labels[i]] += 1.0;
        }
        argmax(&votes)
    }
}

impl GaussianNb {
    fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        (0..self.means.rows())
            .map(|c| {
                let ll: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let var = self.variances.get(c, j);
                        let e = v - self.means.get(c, j);
                        -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + e * e / var)
                    })
                    .sum();
                self.log_priors[c] + ll
            })
            .collect()
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape("accuracy", truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::invalid("accuracy of an empty prediction is undefined"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub classifier: Classifier,
    pub hyperparams: Hyperparams,
    /// Accuracy on the clean test split.
    pub accuracy: f64,
}

/// Randomized hyperparameter search over `kinds`, `budget` draws per kind.
///
/// Search spaces: logistic penalty log-uniform on `[1e-4, 10]`; k-NN `k` odd
/// in `1..=25`; naive Bayes has nothing to draw and is fitted once. The model
/// with the highest clean test accuracy wins; ties keep the earlier kind in
/// [`ClassifierKind::ALL`] order, then the earlier draw.
pub fn select_best(
    train: (&Matrix, &[usize]),
    test: (&Matrix, &[usize]),
    kinds: &[ClassifierKind],
    budget: usize,
    seed: u64,
) -> Result<Selection> {
    if kinds.is_empty() || budget == 0 {
        return Err(Error::invalid("classifier search needs at least one kind and one draw"));
    }
    let mut rng = rng_from_seed(seed);
    let mut best: Option<Selection> = None;
    for kind in ClassifierKind::ALL.into_iter().filter(|k| kinds.contains(k)) {
        let draws: Vec<Hyperparams> = match kind {
            ClassifierKind::LogisticRegression => (0..budget)
                .map(|_| Hyperparams::LogisticRegression {
                    penalty: 10f64.powf(rng.random_range(-4.0..=1.0)),
                    max_iter: 200,
                })
                .collect(),
            ClassifierKind::Knn => (0..budget)
                .map(|_| Hyperparams::Knn {
                    k: 2 * rng.random_range(0..13) + 1,
                })
                .collect(),
            ClassifierKind::NaiveBayes => vec![Hyperparams::NaiveBayes],
        };
        for hp in draws {
            let classifier = fit(&hp, train.0, train.1)?;
            let acc = accuracy(&classifier.predict(test.0)?, test.1)?;
            if best.as_ref().is_none_or(|b| acc > b.accuracy) {
                best = Some(Selection {
                    classifier,
                    hyperparams: hp,
                    accuracy: acc,
                });
            }
        }
    }
    Ok(best.expect("at least one draw was evaluated"))
}
