//! Classical comparison models and the nested grid search.
//!
//! Inputs are expected to be standardized; labels are `0`/`1`.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::Fold;
use crate::metrics::{auc, fmt_f64};
use crate::stats::sigmoid;
use crate::{Error, ProbabilityModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnnWeights {
    Uniform,
    Distance,
}

/// Kept for configuration fidelity; both labels fit the same discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LdaSolver {
    Svd,
    Lsqr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    LogReg,
    Lda,
    Gnb,
    Knn,
    AdaBoost,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::LogReg, Family::Lda, Family::Gnb, Family::Knn, Family::AdaBoost, Family::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogReg => "LR",
            Family::Lda => "LDA",
            Family::Gnb => "GNB",
            Family::Knn => "KNN",
            Family::AdaBoost => "AdaBoost",
            Family::Mlp => "MLP",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
            .or_else(|| match name.to_ascii_lowercase().as_str() {
                "logreg" | "logistic" => Some(Family::LogReg),
                "nb" | "naivebayes" => Some(Family::Gnb),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown classifier family {name:?}")))
    }

    /// The search grid, in tie-break order.
    pub fn grid(self) -> Vec<ClassifierSpec> {
        match self {
            Family::LogReg => [0.01, 0.1, 1.0, 10.0]
                .into_iter()
                .flat_map(|c| [Penalty::L1, Penalty::L2].map(|penalty| ClassifierSpec::LogReg { c, penalty }))
                .collect(),
            Family::Knn => [3, 5, 7, 9]
                .into_iter()
                .flat_map(|k| [KnnWeights::Uniform, KnnWeights::Distance].map(|weights| ClassifierSpec::Knn { k, weights }))
                .collect(),
            Family::Lda => vec![ClassifierSpec::Lda { solver: LdaSolver::Svd }, ClassifierSpec::Lda { solver: LdaSolver::Lsqr }],
            Family::Gnb => vec![ClassifierSpec::Gnb],
            Family::AdaBoost => [50, 100, 200]
                .into_iter()
                .flat_map(|n_estimators| {
                    [0.01, 0.1, 1.0].map(|learning_rate| ClassifierSpec::AdaBoost { n_estimators, learning_rate })
                })
                .collect(),
            Family::Mlp => vec![ClassifierSpec::default_mlp(0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClassifierSpec {
    LogReg { c: f64, penalty: Penalty },
    Lda { solver: LdaSolver },
    Gnb,
    Knn { k: usize, weights: KnnWeights },
    AdaBoost { n_estimators: usize, learning_rate: f64 },
    Mlp { hidden: usize, learning_rate: f64, epochs: usize, seed: u64 },
}

impl ClassifierSpec {
    pub fn default_mlp(seed: u64) -> Self {
        ClassifierSpec::Mlp { hidden: 16, learning_rate: 0.05, epochs: 500, seed }
    }

    pub fn family(&self) -> Family {
        match self {
            ClassifierSpec::LogReg { .. } => Family::LogReg,
            ClassifierSpec::Lda { .. } => Family::Lda,
            ClassifierSpec::Gnb => Family::Gnb,
            ClassifierSpec::Knn { .. } => Family::Knn,
            ClassifierSpec::AdaBoost { .. } => Family::AdaBoost,
            ClassifierSpec::Mlp { .. } => Family::Mlp,
        }
    }
}

/// `key=value` pairs joined by `;`, e.g. `C=1;penalty=l1`.
impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierSpec::LogReg { c, penalty } => {
                write!(f, "C={c};penalty={}", if *penalty == Penalty::L1 { "l1" } else { "l2" })
            }
            ClassifierSpec::Lda { solver } => write!(f, "solver={}", if *solver == LdaSolver::Svd { "svd" } else { "lsqr" }),
            ClassifierSpec::Gnb => Ok(()),
            ClassifierSpec::Knn { k, weights } => {
                write!(f, "k={k};weights={}", if *weights == KnnWeights::Uniform { "uniform" } else { "distance" })
            }
            ClassifierSpec::AdaBoost { n_estimators, learning_rate } => {
                write!(f, "n_estimators={n_estimators};learning_rate={learning_rate}")
            }
            ClassifierSpec::Mlp { hidden, learning_rate, epochs, seed } => {
                write!(f, "hidden={hidden};learning_rate={learning_rate};epochs={epochs};seed={seed}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// `+1`: predict class 1 when `x > threshold`; `-1`: the reverse.
    pub polarity: f64,
}

impl Stump {
    fn predict(&self, x: &[f64]) -> f64 {
        if (x[self.feature] > self.threshold) == (self.polarity > 0.0) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedClassifier {
    /// Intercept first.
    Linear { spec: ClassifierSpec, beta: Vec<f64> },
    Gnb { prior1: f64, mean: [Vec<f64>; 2], var: [Vec<f64>; 2] },
    Knn { k: usize, weights: KnnWeights, x: Vec<Vec<f64>>, y: Vec<u8> },
    AdaBoost { stumps: Vec<Stump>, alphas: Vec<f64> },
    Mlp { w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<f64>, b2: f64 },
}

impl FittedClassifier {
    fn n_inputs(&self) -> usize {
        match self {
            FittedClassifier::Linear { beta, .. } => beta.len() - 1,
            FittedClassifier::Gnb { mean, .. } => mean[0].len(),
            FittedClassifier::Knn { x, .. } => x[0].len(),
            FittedClassifier::AdaBoost { stumps, .. } => stumps.iter().map(|s| s.feature + 1).max().unwrap_or(0),
            FittedClassifier::Mlp { w1, .. } => w1[0].len(),
        }
    }

    /// Training-set accuracy at the 0.5 cut (used by tests and diagnostics).
    pub fn accuracy(&self, x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
        let probs = self.predict_proba_batch(x)?;
        let hits = probs.iter().zip(y).filter(|(p, t)| u8::from(**p >= 0.5) == **t).count();
        Ok(hits as f64 / y.len() as f64)
    }
}

impl ProbabilityModel for FittedClassifier {
    fn n_features(&self) -> usize {
        self.n_inputs()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if let FittedClassifier::AdaBoost { .. } = self {
            // Stumps only touch the features they split on.
        } else if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), actual: x.len() });
        }
        Ok(match self {
            FittedClassifier::Linear { beta, .. } => {
                sigmoid(beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
            }
            FittedClassifier::Gnb { prior1, mean, var } => {
                let log_lik = |c: usize| -> f64 {
                    mean[c]
                        .iter()
                        .zip(&var[c])
                        .zip(x)
                        .map(|((m, v), xi)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (xi - m).powi(2) / (2.0 * v))
                        .sum()
                };
                let l1 = prior1.ln() + log_lik(1);
                let l0 = (1.0 - prior1).ln() + log_lik(0);
                sigmoid(l1 - l0)
            }
            FittedClassifier::Knn { k, weights, x: train, y } => knn_predict(train, y, *k, *weights, x),
            FittedClassifier::AdaBoost { stumps, alphas } => {
                let total: f64 = alphas.iter().sum();
                let f: f64 = stumps.iter().zip(alphas).map(|(s, a)| a * s.predict(x)).sum();
                sigmoid(f / total)
            }
            FittedClassifier::Mlp { w1, b1, w2, b2 } => {
                let h: Vec<f64> = w1.iter().zip(b1).map(|(w, b)| sigmoid(b + dot(w, x))).collect();
                sigmoid(b2 + dot(w2, &h))
            }
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_training(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: x.len() });
    }
    let k = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, actual: r.len() });
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(k)
}

pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[u8]) -> Result<FittedClassifier> {
    let k = check_training(x, y)?;
    match *spec {
        ClassifierSpec::LogReg { c, penalty } => {
            if !(c > 0.0) {
                return Err(Error::Config(format!("C must be positive, got {c}")));
            }
            let beta = match penalty {
                Penalty::L2 => fit_logreg_l2(x, y, 1.0 / c)?,
                Penalty::L1 => fit_logreg_l1(x, y, 1.0 / c),
            };
            Ok(FittedClassifier::Linear { spec: *spec, beta })
        }
        ClassifierSpec::Lda { .. } => Ok(FittedClassifier::Linear { spec: *spec, beta: fit_lda(x, y, k) }),
        ClassifierSpec::Gnb => Ok(fit_gnb(x, y, k)),
        ClassifierSpec::Knn { k: neighbours, weights } => {
            if neighbours == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
            Ok(FittedClassifier::Knn { k: neighbours, weights, x: x.to_vec(), y: y.to_vec() })
        }
        ClassifierSpec::AdaBoost { n_estimators, learning_rate } => {
            if n_estimators == 0 || !(learning_rate > 0.0) {
                return Err(Error::Config("AdaBoost needs n_estimators >= 1 and learning_rate > 0".into()));
            }
            Ok(fit_adaboost(x, y, n_estimators, learning_rate))
        }
        ClassifierSpec::Mlp { hidden, learning_rate, epochs, seed } => {
            if hidden == 0 {
                return Err(Error::Config("MLP needs at least one hidden unit".into()));
            }
            Ok(fit_mlp(x, y, hidden, learning_rate, epochs, seed))
        }
    }
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len() + 1, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] })
}

/// Newton iterations on `-loglik + lambda/2 |w|^2`, intercept unpenalized.
fn fit_logreg_l2(x: &[Vec<f64>], y: &[u8], lambda: f64) -> Result<Vec<f64>> {
    let d = design(x);
    let p = d.ncols();
    let yv = DVector::from_fn(x.len(), |r, _| y[r] as f64);
    let mut ridge = DMatrix::<f64>::identity(p, p) * lambda;
    ridge[(0, 0)] = 0.0;
    let mut beta = DVector::<f64>::zeros(p);
    for _ in 0..100 {
        let prob = (&d * &beta).map(sigmoid);
        let grad = d.transpose() * (&prob - &yv) + &ridge * &beta;
        let mut dw = d.clone();
        for (mut row, pi) in dw.row_iter_mut().zip(prob.iter()) {
            row *= pi * (1.0 - pi);
        }
        let hess = d.transpose() * dw + &ridge;
        let step = hess
            .cholesky()
            .map(|c| c.solve(&grad))
            .ok_or(Error::Singular("penalized logistic Hessian"))?;
        beta -= &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    Ok(beta.iter().copied().collect())
}

/// FISTA on `-loglik + lambda |w|_1`, intercept unpenalized.
fn fit_logreg_l1(x: &[Vec<f64>], y: &[u8], lambda: f64) -> Vec<f64> {
    let d = design(x);
    let p = d.ncols();
    let yv = DVector::from_fn(x.len(), |r, _| y[r] as f64);
    let gram = d.transpose() * &d;
    let lipschitz = 0.25 * gram.symmetric_eigen().eigenvalues.max().max(1e-12);
    let step = 1.0 / lipschitz;
    let grad = |b: &DVector<f64>| d.transpose() * ((&d * b).map(sigmoid) - &yv);
    let prox = |v: DVector<f64>| {
        DVector::from_fn(p, |i, _| {
            if i == 0 {
                v[0]
            } else {
                v[i].signum() * (v[i].abs() - step * lambda).max(0.0)
            }
        })
    };
    let mut beta = DVector::<f64>::zeros(p);
    let mut z = beta.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let next = prox(&z - step * grad(&z));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + ((t - 1.0) / t_next) * (&next - &beta);
        let change = (&next - &beta).amax();
        beta = next;
        t = t_next;
        if change < 1e-10 {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// Shared-covariance Gaussian discriminant as a linear logit. The pooled
/// maximum-likelihood covariance is pseudo-inverted so that constant
/// features simply get zero weight.
fn fit_lda(x: &[Vec<f64>], y: &[u8], k: usize) -> Vec<f64> {
    let (mean, n) = class_means(x, y, k);
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for (row, &t) in x.iter().zip(y) {
        let dv = DVector::from_fn(k, |j, _| row[j] - mean[t as usize][j]);
        cov += &dv * dv.transpose();
    }
    cov /= x.len() as f64;
    let inv = cov.pseudo_inverse(1e-10).expect("non-negative tolerance");
    let diff = DVector::from_fn(k, |j, _| mean[1][j] - mean[0][j]);
    let w = &inv * &diff;
    let mid = DVector::from_fn(k, |j, _| 0.5 * (mean[1][j] + mean[0][j]));
    let b = -mid.dot(&w) + (n[1] / n[0]).ln();
    std::iter::once(b).chain(w.iter().copied()).collect()
}

fn class_means(x: &[Vec<f64>], y: &[u8], k: usize) -> ([Vec<f64>; 2], [f64; 2]) {
    let mut mean = [vec![0.0; k], vec![0.0; k]];
    let mut n = [0.0; 2];
    for (row, &t) in x.iter().zip(y) {
        n[t as usize] += 1.0;
        for (m, v) in mean[t as usize].iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..2 {
        for m in mean[c].iter_mut() {
            *m /= n[c];
        }
    }
    (mean, n)
}

pub const GNB_VAR_FLOOR: f64 = 1e-9;

fn fit_gnb(x: &[Vec<f64>], y: &[u8], k: usize) -> FittedClassifier {
    let (mean, n) = class_means(x, y, k);
    let mut var = [vec![0.0; k], vec![0.0; k]];
    for (row, &t) in x.iter().zip(y) {
        let c = t as usize;
        for j in 0..k {
            var[c][j] += (row[j] - mean[c][j]).powi(2) / n[c];
        }
    }
    for v in var.iter_mut().flatten() {
        *v = v.max(GNB_VAR_FLOOR);
    }
    FittedClassifier::Gnb { prior1: n[1] / (n[0] + n[1]), mean, var }
}

/// Euclidean neighbours, ties in distance broken by training order. With
/// distance weights, exact matches (distance 0) take all the weight.
fn knn_predict(train: &[Vec<f64>], y: &[u8], k: usize, weights: KnnWeights, x: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> =
        train.iter().enumerate().map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near = &d[..k.min(d.len())];
    match weights {
        KnnWeights::Uniform => near.iter().map(|&(_, i)| y[i] as f64).sum::<f64>() / near.len() as f64,
        KnnWeights::Distance => {
            let exact: Vec<usize> = near.iter().filter(|(dist, _)| *dist == 0.0).map(|&(_, i)| i).collect();
            if !exact.is_empty() {
                return exact.iter().map(|&i| y[i] as f64).sum::<f64>() / exact.len() as f64;
            }
            let total: f64 = near.iter().map(|(dist, _)| 1.0 / dist).sum();
            near.iter().map(|&(dist, i)| y[i] as f64 / dist).sum::<f64>() / total
        }
    }
}

/// Best weighted-error stump over midpoints between distinct feature values.
fn best_stump(x: &[Vec<f64>], t: &[f64], w: &[f64]) -> (Stump, f64) {
    let k = x[0].len();
    let mut best = (Stump { feature: 0, threshold: f64::NEG_INFINITY, polarity: 1.0 }, f64::INFINITY);
    for j in 0..k {
        let mut values: Vec<f64> = x.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut thresholds = vec![values[0] - 1.0];
        thresholds.extend(values.windows(2).map(|v| 0.5 * (v[0] + v[1])));
        for &threshold in &thresholds {
            // Weighted error of polarity +1; polarity -1 errs on the complement.
            let err: f64 = x
                .iter()
                .zip(t)
                .zip(w)
                .filter(|((r, &ti), _)| (r[j] > threshold) != (ti > 0.0))
                .map(|(_, wi)| wi)
                .sum();
            for (polarity, e) in [(1.0, err), (-1.0, 1.0 - err)] {
                if e < best.1 - 1e-12 {
                    best = (Stump { feature: j, threshold, polarity }, e);
                }
            }
        }
    }
    best
}

/// Discrete two-class SAMME with depth-1 trees.
fn fit_adaboost(x: &[Vec<f64>], y: &[u8], n_estimators: usize, learning_rate: f64) -> FittedClassifier {
    let n = x.len();
    let t: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..n_estimators {
        let (stump, err) = best_stump(x, &t, &w);
        if err <= 0.0 {
            stumps.push(stump);
            alphas.push(1.0);
            break;
        }
        if err >= 0.5 {
            break;
        }
        let alpha = learning_rate * ((1.0 - err) / err).ln();
        for ((wi, r), ti) in w.iter_mut().zip(x).zip(&t) {
            if stump.predict(r) != *ti {
                *wi *= alpha.exp();
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        stumps.push(stump);
        alphas.push(alpha);
    }
    if stumps.is_empty() {
        // No stump beats chance: fall back to a constant vote for the majority.
        let pos: f64 = t.iter().sum();
        stumps.push(Stump { feature: 0, threshold: f64::NEG_INFINITY, polarity: pos.signum().max(0.0) * 2.0 - 1.0 });
        alphas.push(1.0);
    }
    FittedClassifier::AdaBoost { stumps, alphas }
}

/// Full-batch gradient descent on the mean log-loss of a one-hidden-layer
/// logistic network.
fn fit_mlp(x: &[Vec<f64>], y: &[u8], hidden: usize, lr: f64, epochs: usize, seed: u64) -> FittedClassifier {
    let k = x[0].len();
    let n = x.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound1 = (6.0 / (k + hidden) as f64).sqrt();
    let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
    let mut w1: Vec<Vec<f64>> = (0..hidden).map(|_| (0..k).map(|_| rng.random_range(-bound1..bound1)).collect()).collect();
    let mut b1 = vec![0.0; hidden];
    let mut w2: Vec<f64> = (0..hidden).map(|_| rng.random_range(-bound2..bound2)).collect();
    let mut b2 = 0.0;
    for _ in 0..epochs {
        let mut g_w1 = vec![vec![0.0; k]; hidden];
        let mut g_b1 = vec![0.0; hidden];
        let mut g_w2 = vec![0.0; hidden];
        let mut g_b2 = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let h: Vec<f64> = w1.iter().zip(&b1).map(|(w, b)| sigmoid(b + dot(w, row))).collect();
            let out = sigmoid(b2 + dot(&w2, &h));
            let delta = out - t as f64;
            g_b2 += delta;
            for j in 0..hidden {
                g_w2[j] += delta * h[j];
                let dh = delta * w2[j] * h[j] * (1.0 - h[j]);
                g_b1[j] += dh;
                for (g, v) in g_w1[j].iter_mut().zip(row) {
                    *g += dh * v;
                }
            }
        }
        b2 -= lr * g_b2 / n;
        for j in 0..hidden {
            w2[j] -= lr * g_w2[j] / n;
            b1[j] -= lr * g_b1[j] / n;
            for (w, g) in w1[j].iter_mut().zip(&g_w1[j]) {
                *w -= lr * g / n;
            }
        }
    }
    FittedClassifier::Mlp { w1, b1, w2, b2 }
}

/// Returns `1 - p` when the AUC is strictly below one half, and whether a flip happened.
pub fn flip_if_auc_below_half(probs: &[f64], y: &[u8]) -> Result<(Vec<f64>, bool)> {
    if auc(probs, y)? < 0.5 {
        Ok((probs.iter().map(|p| 1.0 - p).collect(), true))
    } else {
        Ok((probs.to_vec(), false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub best: ClassifierSpec,
    pub best_score: f64,
    /// Mean inner-fold AUC per grid entry; `NaN` where some fold could not be scored.
    pub scores: Vec<(ClassifierSpec, f64)>,
}

/// Mean AUC over `folds` (indices into `x`) for every grid entry; the first
/// entry with the highest mean wins.
pub fn grid_search(grid: &[ClassifierSpec], x: &[Vec<f64>], y: &[u8], folds: &[Fold]) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) { (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect()) };
    let score_fold = |spec: &ClassifierSpec, fold: &Fold| -> Result<f64> {
        let (xt, yt) = pick(&fold.train);
        let (xv, yv) = pick(&fold.test);
        let model = fit(spec, &xt, &yt)?;
        auc(&model.predict_proba_batch(&xv)?, &yv)
    };
    let scores: Vec<(ClassifierSpec, f64)> = grid
        .par_iter()
        .map(|spec| {
            if folds.is_empty() {
                return (*spec, f64::NAN);
            }
            let mut total = 0.0;
            for fold in folds {
                match score_fold(spec, fold) {
                    Ok(a) => total += a,
                    Err(_) => return (*spec, f64::NAN),
                }
            }
            (*spec, total / folds.len() as f64)
        })
        .collect();
    let mut best = (grid[0], f64::NEG_INFINITY);
    for (spec, s) in &scores {
        if *s > best.1 {
            best = (*spec, *s);
        }
    }
    Ok(GridResult { best: best.0, best_score: best.1, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummaryRow {
    pub family: Family,
    pub spec: ClassifierSpec,
    pub fold: usize,
    pub auc: f64,
}

/// `family,hyperparams,fold,auc`.
pub fn write_model_summary<W: Write>(rows: &[ModelSummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "hyperparams", "fold", "auc"])?;
    for r in rows {
        w.write_record([r.family.name().to_string(), r.spec.to_string(), r.fold.to_string(), fmt_f64(r.auc)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_the_protocol() {
        assert_eq!(Family::LogReg.grid().len(), 8);
        assert_eq!(Family::Knn.grid().len(), 8);
        assert_eq!(Family::Lda.grid().len(), 2);
        assert_eq!(Family::Gnb.grid().len(), 1);
        assert_eq!(Family::AdaBoost.grid().len(), 9);
        assert_eq!(Family::LogReg.grid()[0].to_string(), "C=0.01;penalty=l1");
        assert_eq!(Family::AdaBoost.grid()[8].to_string(), "n_estimators=200;learning_rate=1");
    }

    #[test]
    fn gnb_singletons() {
        let m = fit(&ClassifierSpec::Gnb, &[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        assert!(1.0 - m.predict_proba(&[0.0]).unwrap() > 0.99);
        assert!(m.predict_proba(&[1.0]).unwrap() > 0.99);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(fit(&ClassifierSpec::Gnb, &[vec![0.0], vec![1.0]], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn flip_boundary() {
        let y = [0, 1, 0, 1];
        let (p, flipped) = flip_if_auc_below_half(&[0.5; 4], &y).unwrap();
        assert!(!flipped && p == vec![0.5; 4]);
        let (p, flipped) = flip_if_auc_below_half(&[0.9, 0.1, 0.8, 0.2], &y).unwrap();
        assert!(flipped);
        assert_eq!(auc(&p, &y).unwrap(), 1.0);
    }
}
