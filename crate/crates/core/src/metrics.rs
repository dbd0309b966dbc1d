//! Discrimination, calibration, pseudo-R² and threshold selection.
//!
//! Labels are `0`/`1`; a sample is predicted positive iff `p >= threshold`.

use std::io::Write;

use serde::Serialize;

use crate::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points ordered by decreasing threshold; the first point is
/// `(+inf, 0, 0)` and the last is `(min score, 1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.10}")
    }
}

fn class_counts(y: &[u8]) -> (usize, usize) {
    let pos = y.iter().filter(|&&v| v == 1).count();
    (pos, y.len() - pos)
}

fn require_both_classes(probs: &[f64], y: &[u8]) -> Result<(usize, usize)> {
    if probs.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: probs.len() });
    }
    let (pos, neg) = class_counts(y);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// `(threshold, tp, fp)` at every distinct score, descending.
fn cumulative_counts(probs: &[f64], y: &[u8]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&j| probs[j] != probs[i]);
        if last_of_group {
            out.push((probs[i], tp, fp));
        }
    }
    out
}

pub fn roc_and_auc(probs: &[f64], y: &[u8]) -> Result<(RocCurve, f64)> {
    let (pos, neg) = require_both_classes(probs, y)?;
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    for (threshold, tp, fp) in cumulative_counts(probs, y) {
        points.push(RocPoint { threshold, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    Ok((RocCurve { points }, auc))
}

pub fn auc(probs: &[f64], y: &[u8]) -> Result<f64> {
    roc_and_auc(probs, y).map(|(_, a)| a)
}

/// `AP = sum_k (R_k - R_{k-1}) P_k` over descending-score prefixes, ties
/// forming one prefix.
pub fn average_precision(probs: &[f64], y: &[u8]) -> Result<f64> {
    if probs.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: probs.len() });
    }
    let (pos, _) = class_counts(y);
    if pos == 0 {
        return Err(Error::Config("average precision needs at least one positive".into()));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (_, tp, fp) in cumulative_counts(probs, y) {
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

pub fn brier_score(probs: &[f64], y: &[u8]) -> f64 {
    probs.iter().zip(y).map(|(p, &t)| (p - t as f64).powi(2)).sum::<f64>() / probs.len() as f64
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn log_loss(probs: &[f64], y: &[u8]) -> f64 {
    probs
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = clamp_probability(p);
            if t == 1 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum::<f64>()
        / probs.len() as f64
}

/// `(brier, log_loss)`.
pub fn calibration_losses(probs: &[f64], y: &[u8]) -> (f64, f64) {
    (brier_score(probs, y), log_loss(probs, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoR2 {
    pub efron: f64,
    pub mckelvey_zavoina: f64,
    pub count: f64,
}

fn population_variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
}

pub fn logit(p: f64) -> f64 {
    let p = clamp_probability(p);
    (p / (1.0 - p)).ln()
}

/// Efron, McKelvey–Zavoina and Count R². The latent index defaults to
/// `logit(p)`.
pub fn pseudo_r2(probs: &[f64], y: &[u8], latent_index: Option<&[f64]>, threshold: f64) -> Result<PseudoR2> {
    if probs.len() != y.len() || probs.is_empty() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: probs.len() });
    }
    let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|&v| (v as f64 - ybar).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::SingleClass);
    }
    let resid: f64 = probs.iter().zip(y).map(|(p, &v)| (v as f64 - p).powi(2)).sum();
    let index: Vec<f64> = match latent_index {
        Some(ix) => ix.to_vec(),
        None => probs.iter().map(|&p| logit(p)).collect(),
    };
    let var = population_variance(&index);
    let logistic_var = std::f64::consts::PI.powi(2) / 3.0;
    Ok(PseudoR2 {
        efron: 1.0 - resid / denom,
        mckelvey_zavoina: var / (var + logistic_var),
        count: confusion_metrics(probs, y, threshold).accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub accuracy: f64,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(probs: &[f64], y: &[u8], threshold: f64) -> Confusion {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in probs.iter().zip(y) {
        match (p >= threshold, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Confusion {
        tp,
        fp,
        tn,
        fn_,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        ppv: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fn_),
        accuracy: (tp + tn) as f64 / probs.len().max(1) as f64,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    }
}

fn f_beta(tp: usize, fp: usize, fn_: usize, beta: f64) -> f64 {
    let b2 = beta * beta;
    let num = (1.0 + b2) * tp as f64;
    let den = num + b2 * fn_ as f64 + fp as f64;
    if den == 0.0 { 0.0 } else { num / den }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThresholdRule {
    /// Maximize `TPR - FPR`.
    Youden,
    /// Largest threshold whose sensitivity is at least the floor.
    FixedSensitivity(f64),
    /// Maximize `F_beta`.
    FBeta(f64),
    /// Maximize `F_beta` among thresholds meeting the sensitivity floor.
    SensitivityFloorFBeta { sensitivity: f64, beta: f64 },
}

/// Candidate thresholds are the distinct scores; ties go to the larger
/// threshold.
pub fn select_threshold(probs: &[f64], y: &[u8], rule: ThresholdRule) -> Result<f64> {
    let (pos, neg) = require_both_classes(probs, y)?;
    let candidates = cumulative_counts(probs, y);
    let sens = |tp: usize| tp as f64 / pos as f64;
    let argmax = |score: &dyn Fn(usize, usize) -> Option<f64>| {
        let mut best: Option<(f64, f64)> = None;
        for &(t, tp, fp) in &candidates {
            if let Some(s) = score(tp, fp) {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((t, s));
                }
            }
        }
        best.map(|(t, _)| t)
    };
    let chosen = match rule {
        ThresholdRule::Youden => argmax(&|tp, fp| Some(sens(tp) - fp as f64 / neg as f64)),
        ThresholdRule::FixedSensitivity(s) => {
            candidates.iter().find(|&&(_, tp, _)| sens(tp) >= s).map(|&(t, _, _)| t)
        }
        ThresholdRule::FBeta(beta) => argmax(&|tp, fp| Some(f_beta(tp, fp, pos - tp, beta))),
        ThresholdRule::SensitivityFloorFBeta { sensitivity, beta } => {
            argmax(&|tp, fp| (sens(tp) >= sensitivity).then(|| f_beta(tp, fp, pos - tp, beta)))
        }
    };
    chosen.ok_or(match rule {
        ThresholdRule::FixedSensitivity(s) | ThresholdRule::SensitivityFloorFBeta { sensitivity: s, .. } => {
            Error::UnattainableSensitivity(s)
        }
        _ => Error::SingleClass,
    })
}

/// Metric bundle for one set of predictions at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub average_precision: f64,
    pub f1: Option<f64>,
    pub accuracy: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub efron_r2: f64,
    pub mz_r2: f64,
    pub count_r2: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub threshold: f64,
}

impl EvalReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "auc",
        "average_precision",
        "f1",
        "accuracy",
        "brier",
        "log_loss",
        "efron_r2",
        "mz_r2",
        "count_r2",
        "sensitivity",
        "specificity",
        "ppv",
        "npv",
        "threshold",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            fmt_f64(self.auc),
            fmt_f64(self.average_precision),
            opt(self.f1),
            fmt_f64(self.accuracy),
            fmt_f64(self.brier),
            fmt_f64(self.log_loss),
            fmt_f64(self.efron_r2),
            fmt_f64(self.mz_r2),
            fmt_f64(self.count_r2),
            opt(self.sensitivity),
            opt(self.specificity),
            opt(self.ppv),
            opt(self.npv),
            fmt_f64(self.threshold),
        ]
    }

    /// All numeric fields in CSV order, absent values as NaN.
    pub fn values(&self) -> [f64; 14] {
        let o = |v: Option<f64>| v.unwrap_or(f64::NAN);
        [
            self.auc,
            self.average_precision,
            o(self.f1),
            self.accuracy,
            self.brier,
            self.log_loss,
            self.efron_r2,
            self.mz_r2,
            self.count_r2,
            o(self.sensitivity),
            o(self.specificity),
            o(self.ppv),
            o(self.npv),
            self.threshold,
        ]
    }
}

pub fn evaluate(probs: &[f64], y: &[u8], threshold: f64) -> Result<EvalReport> {
    let (_, auc) = roc_and_auc(probs, y)?;
    let ap = average_precision(probs, y)?;
    let (brier, log_loss) = calibration_losses(probs, y);
    let r2 = pseudo_r2(probs, y, None, threshold)?;
    let c = confusion_metrics(probs, y, threshold);
    Ok(EvalReport {
        auc,
        average_precision: ap,
        f1: c.f1,
        accuracy: c.accuracy,
        brier,
        log_loss,
        efron_r2: r2.efron,
        mz_r2: r2.mckelvey_zavoina,
        count_r2: r2.count,
        sensitivity: c.sensitivity,
        specificity: c.specificity,
        ppv: c.ppv,
        npv: c.npv,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!((auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
        // All tied: diagonal.
        assert!((auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn roc_endpoints_and_monotone() {
        let (roc, _) = roc_and_auc(&[0.3, 0.3, 0.9, 0.1, 0.6], &[0, 1, 1, 0, 0]).unwrap();
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr && w[1].threshold < w[0].threshold);
        }
    }

    #[test]
    fn calibration_examples() {
        let y = [1, 0, 1, 0];
        let (b, l) = calibration_losses(&[1.0, 0.0, 1.0, 0.0], &y);
        assert_eq!(b, 0.0);
        assert!(l < 1e-11);
        let (b, l) = calibration_losses(&[0.5; 4], &y);
        assert_eq!(b, 0.25);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn pseudo_r2_examples() {
        let y = [1, 0, 0, 0];
        let r = pseudo_r2(&[0.25; 4], &y, None, 0.5).unwrap();
        assert!(r.efron.abs() < 1e-15);
        assert_eq!(r.mckelvey_zavoina, 0.0);
        let r = pseudo_r2(&[1.0, 0.0, 0.0, 0.0], &y, None, 0.5).unwrap();
        assert_eq!(r.efron, 1.0);
        assert!(matches!(pseudo_r2(&[0.2; 3], &[0, 0, 0], None, 0.5), Err(Error::SingleClass)));
    }

    #[test]
    fn confusion_examples() {
        let y = [1, 1, 0, 0];
        let p = [0.9, 0.2, 0.8, 0.1];
        let c = confusion_metrics(&p, &y, 0.5);
        for v in [c.sensitivity, c.specificity, c.ppv, c.npv, c.f1] {
            assert_eq!(v, Some(0.5));
        }
        assert_eq!(c.accuracy, 0.5);
        let all = confusion_metrics(&p, &y, 0.0);
        assert_eq!((all.sensitivity, all.specificity), (Some(1.0), Some(0.0)));
        let none = confusion_metrics(&p, &y, 1.0 + 1e-9);
        assert_eq!((none.sensitivity, none.specificity), (Some(0.0), Some(1.0)));
        assert_eq!(none.ppv, None);
    }

    #[test]
    fn threshold_rules() {
        let y = [0, 0, 1, 1];
        let p = [0.1, 0.3, 0.7, 0.9];
        let t = select_threshold(&p, &y, ThresholdRule::Youden).unwrap();
        assert_eq!(t, 0.7);
        assert_eq!(select_threshold(&p, &y, ThresholdRule::FixedSensitivity(0.0)).unwrap(), 0.9);
        assert_eq!(select_threshold(&p, &y, ThresholdRule::FixedSensitivity(0.83)).unwrap(), 0.7);
        assert!(matches!(
            select_threshold(&p, &y, ThresholdRule::FixedSensitivity(1.1)),
            Err(Error::UnattainableSensitivity(_))
        ));
        assert_eq!(select_threshold(&p, &y, ThresholdRule::FBeta(2.0)).unwrap(), 0.7);
    }

    #[test]
    fn fbeta_prefers_recall_for_large_beta() {
        let y = [1, 0, 1, 0, 0, 1];
        let p = [0.95, 0.9, 0.6, 0.5, 0.4, 0.2];
        let hi = select_threshold(&p, &y, ThresholdRule::FBeta(0.5)).unwrap();
        let lo = select_threshold(&p, &y, ThresholdRule::FBeta(4.0)).unwrap();
        assert!(lo <= hi);
        let floor = select_threshold(&p, &y, ThresholdRule::SensitivityFloorFBeta { sensitivity: 0.83, beta: 2.0 }).unwrap();
        assert_eq!(floor, 0.2);
    }

    #[test]
    fn average_precision_examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[0, 0, 0, 1]).unwrap();
        assert!((ap - 0.25).abs() < 1e-15);
        assert!((average_precision(&[0.2, 0.9], &[1, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(average_precision(&[0.2], &[0]).is_err());
    }
}
