//! Model-agnostic feature importance: column permutation and finite
//! perturbation of the predicted probability.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{auc, fmt_f64};
use crate::qsim::split_seed;
use crate::{Error, ProbabilityModel, Result};

pub const DEFAULT_REPEATS: usize = 100;
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ImportanceMethod {
    Permutation { repeats: usize },
    Gradient { epsilon: f64 },
}

impl ImportanceMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ImportanceMethod::Permutation { .. } => "permutation",
            ImportanceMethod::Gradient { .. } => "gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub features: Vec<String>,
    /// Unfloored scores. For permutation: mean AUC drop. For gradient: mean |Δp|.
    pub raw: Vec<f64>,
    /// Standard error of `raw` over repeats (permutation) or samples (gradient).
    pub std_error: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Which raw scores were negative and set to zero before normalizing.
    pub floored: Vec<bool>,
    /// No feature had a positive score; `normalized` is then uniform.
    pub degenerate: bool,
}

impl ImportanceReport {
    fn build(method: ImportanceMethod, features: &[String], raw: Vec<f64>, std_error: Vec<f64>) -> Self {
        let floored: Vec<bool> = raw.iter().map(|&r| r < 0.0).collect();
        let clipped: Vec<f64> = raw.iter().map(|&r| r.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let degenerate = !(total > 0.0);
        let k = raw.len() as f64;
        let normalized = if degenerate {
            vec![1.0 / k; raw.len()]
        } else {
            clipped.iter().map(|c| c / total).collect()
        };
        Self { method, features: features.to_vec(), raw, std_error, normalized, floored, degenerate }
    }

    /// Gradient scores divided by ε, i.e. the finite-difference slope. `None` for permutation reports.
    pub fn per_unit(&self) -> Option<Vec<f64>> {
        match self.method {
            ImportanceMethod::Gradient { epsilon } => Some(self.raw.iter().map(|r| r / epsilon).collect()),
            ImportanceMethod::Permutation { .. } => None,
        }
    }

    /// Index of the highest normalized score (first on ties).
    pub fn top_feature(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.normalized.iter().enumerate() {
            if *v > self.normalized[best] {
                best = i;
            }
        }
        best
    }
}

fn check_inputs<M: ProbabilityModel + ?Sized>(model: &M, x: &[Vec<f64>], names: &[String]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = model.n_features();
    if names.len() != k {
        return Err(Error::DimensionMismatch { expected: k, actual: names.len() });
    }
    if let Some(r) = x.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, actual: r.len() });
    }
    Ok(k)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean AUC drop when one column is shuffled, over `repeats` independent shuffles.
/// Repeat `r` of feature `j` draws from `split_seed(seed, j * repeats + r)`.
pub fn permutation_importance<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[Vec<f64>],
    y: &[u8],
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let k = check_inputs(model, x, names)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if repeats == 0 {
        return Err(Error::Config("permutation importance needs at least one repeat".into()));
    }
    let baseline = auc(&model.predict_proba_batch(x)?, y)?;
    let mut raw = Vec::with_capacity(k);
    let mut se = Vec::with_capacity(k);
    for j in 0..k {
        let drops: Vec<f64> = (0..repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, (j * repeats + r) as u64));
                let mut column: Vec<f64> = x.iter().map(|row| row[j]).collect();
                column.shuffle(&mut rng);
                let shuffled: Vec<Vec<f64>> = x
                    .iter()
                    .zip(column)
                    .map(|(row, v)| {
                        let mut row = row.clone();
                        row[j] = v;
                        row
                    })
                    .collect();
                Ok(baseline - auc(&model.predict_proba_batch(&shuffled)?, y)?)
            })
            .collect::<Result<_>>()?;
        let (m, s) = mean_and_se(&drops);
        raw.push(m);
        se.push(s);
    }
    Ok(ImportanceReport::build(ImportanceMethod::Permutation { repeats }, names, raw, se))
}

/// Mean absolute change of the predicted probability when feature `i` is
/// shifted by `epsilon` (forward difference).
pub fn gradient_importance<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[Vec<f64>],
    names: &[String],
    epsilon: f64,
) -> Result<ImportanceReport> {
    let k = check_inputs(model, x, names)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let base = model.predict_proba_batch(x)?;
    let mut raw = Vec::with_capacity(k);
    let mut se = Vec::with_capacity(k);
    for j in 0..k {
        let shifted: Vec<Vec<f64>> = x
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row[j] += epsilon;
                row
            })
            .collect();
        let moved = model.predict_proba_batch(&shifted)?;
        let deltas: Vec<f64> = moved.iter().zip(&base).map(|(a, b)| (a - b).abs()).collect();
        let (m, s) = mean_and_se(&deltas);
        raw.push(m);
        se.push(s);
    }
    Ok(ImportanceReport::build(ImportanceMethod::Gradient { epsilon }, names, raw, se))
}

/// `feature,raw,normalized,method`. Gradient reports add a second block
/// tagged `gradient_per_unit` holding raw/ε.
pub fn write_importance_csv<W: Write>(reports: &[ImportanceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "raw", "normalized", "method"])?;
    for rep in reports {
        for (i, f) in rep.features.iter().enumerate() {
            w.write_record([f.as_str(), &fmt_f64(rep.raw[i]), &fmt_f64(rep.normalized[i]), rep.method.tag()])?;
        }
        if let Some(per_unit) = rep.per_unit() {
            for (i, f) in rep.features.iter().enumerate() {
                w.write_record([f.as_str(), &fmt_f64(per_unit[i]), &fmt_f64(rep.normalized[i]), "gradient_per_unit"])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
