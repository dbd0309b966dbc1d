//! Contingency tests, rank tests and logistic-regression inference.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::metrics::fmt_f64;
use crate::{Error, Result};

/// Standard-normal quantile used for every 95% interval.
pub const Z95: f64 = 1.96;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn chi2_sf(statistic: f64, df: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive df").sf(statistic)
}

/// Two-sided normal p-value.
pub fn normal_two_sided(z: f64) -> f64 {
    (2.0 * std_normal().sf(z.abs())).min(1.0)
}

/// `a` exposed with event, `b` exposed without, `c` unexposed with event,
/// `d` unexposed without.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Swaps the exposed and unexposed rows.
    pub fn swap_rows(&self) -> Self {
        Self::new(self.c, self.d, self.a, self.b)
    }

    pub fn swap_columns(&self) -> Self {
        Self::new(self.b, self.a, self.d, self.c)
    }

    /// Expected counts under independence, in `a, b, c, d` order.
    pub fn expected(&self) -> [f64; 4] {
        let n = self.total() as f64;
        let (r1, r2) = ((self.a + self.b) as f64, (self.c + self.d) as f64);
        let (c1, c2) = ((self.a + self.c) as f64, (self.b + self.d) as f64);
        [r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Continuity {
    None,
    Yates,
    /// Yates when the smallest expected count is below 5, plain Pearson otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub p_value: f64,
    pub yates: bool,
}

pub fn chi2_test(t: &ContingencyTable2x2, continuity: Continuity) -> Result<Chi2Result> {
    let margins = [t.a + t.b, t.c + t.d, t.a + t.c, t.b + t.d];
    if margins.contains(&0) {
        return Err(Error::DegenerateTable(format!("zero margin in {t:?}")));
    }
    let expected = t.expected();
    let yates = match continuity {
        Continuity::None => false,
        Continuity::Yates => true,
        Continuity::Auto => expected.iter().copied().fold(f64::INFINITY, f64::min) < 5.0,
    };
    let observed = [t.a, t.b, t.c, t.d].map(|v| v as f64);
    let statistic = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| {
            let dev = (o - e).abs();
            let dev = if yates { (dev - 0.5).max(0.0) } else { dev };
            dev * dev / e
        })
        .sum::<f64>();
    Ok(Chi2Result { statistic, p_value: chi2_sf(statistic, 1.0), yates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeRisk {
    pub rr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Log-method 95% interval.
pub fn relative_risk(t: &ContingencyTable2x2) -> Result<RelativeRisk> {
    if t.a + t.b == 0 || t.c + t.d == 0 {
        return Err(Error::DegenerateTable(format!("empty exposure group in {t:?}")));
    }
    if t.c == 0 {
        return Err(Error::DegenerateTable(format!("no events in the reference group of {t:?}")));
    }
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let rr = (a / (a + b)) / (c / (c + d));
    if t.a == 0 {
        return Ok(RelativeRisk { rr, ci_low: 0.0, ci_high: f64::INFINITY });
    }
    let se = (1.0 / a - 1.0 / (a + b) + 1.0 / c - 1.0 / (c + d)).sqrt();
    Ok(RelativeRisk { rr, ci_low: (rr.ln() - Z95 * se).exp(), ci_high: (rr.ln() + Z95 * se).exp() })
}

/// Midranks (1-based) of the concatenation of `x` and `y`, plus the tie
/// term `sum(t^3 - t)`.
fn midranks(x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&i, &j| all[i].total_cmp(&all[j]));
    let mut ranks = vec![0.0; all.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && all[order[end]] == all[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// `U` for the first sample: the number of pairs with `x > y`, ties counting one half.
    pub u_x: f64,
    /// `min(U_x, U_y)`.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Normal approximation with tie-corrected variance, no continuity correction.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (ranks, ties) = midranks(x, y);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u_x = r1 - n1 * (n1 + 1.0) / 2.0;
    let u_y = n1 * n2 - u_x;
    let n = n1 + n2;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let mean = n1 * n2 / 2.0;
    let (z, p_value) = if var > 0.0 {
        let z = (u_x - mean) / var.sqrt();
        (z, normal_two_sided(z))
    } else {
        (0.0, 1.0)
    };
    Ok(MannWhitney { u_x, u: u_x.min(u_y), z, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianDifference {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Hodges–Lehmann shift `median(x_i - y_j)` with the Moses distribution-free
/// 95% interval.
pub fn median_difference_ci(x: &[f64], y: &[f64]) -> Result<MedianDifference> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut diffs: Vec<f64> = x.iter().flat_map(|a| y.iter().map(move |b| a - b)).collect();
    diffs.sort_by(f64::total_cmp);
    let point = median_sorted(&diffs);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let nm = diffs.len();
    let k = (n1 * n2 / 2.0 - Z95 * (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt()).floor();
    let k = (k.max(1.0) as usize).min(nm);
    Ok(MedianDifference { point, ci_low: diffs[k - 1], ci_high: diffs[nm - k] })
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile (the usual "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Median and interquartile bounds.
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64, f64)> {
    Some((quantile(values, 0.5)?, quantile(values, 0.25)?, quantile(values, 0.75)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    /// Covariate names, excluding the intercept.
    pub names: Vec<String>,
    /// Intercept first.
    pub beta: Vec<f64>,
    pub loglik: f64,
    /// Inverse observed information, row-major `(k+1) x (k+1)`.
    pub covariance: Vec<Vec<f64>>,
    pub n: usize,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }

    pub fn se(&self, index: usize) -> f64 {
        self.covariance[index][index].max(0.0).sqrt()
    }

    pub fn z(&self, index: usize) -> f64 {
        self.beta[index] / self.se(index)
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params() as f64 - 2.0 * self.loglik
    }

    pub fn bic(&self) -> f64 {
        self.n_params() as f64 * (self.n as f64).ln() - 2.0 * self.loglik
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic(),
            Criterion::Bic => self.bic(),
        }
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood of the linear predictor `eta`, stable for large `|eta|`.
fn bernoulli_loglik(eta: f64, y: u8) -> f64 {
    // log(1 + e^eta) computed without overflow.
    let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
    if y == 1 {
        eta - softplus
    } else {
        -softplus
    }
}

const SEPARATION_NORM: f64 = 30.0;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

/// Newton–Raphson maximum likelihood with an intercept column prepended.
pub fn logistic_fit(x: &[Vec<f64>], y: &[u8], names: &[String]) -> Result<LogisticModel> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), actual: x.len() });
    }
    let k = names.len();
    if let Some(row) = x.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, actual: row.len() });
    }
    let n = x.len();
    let design = DMatrix::from_fn(n, k + 1, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] });
    let yv = DVector::from_fn(n, |r, _| y[r] as f64);
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &design * beta;
        eta.iter().zip(y).map(|(&e, &t)| bernoulli_loglik(e, t)).sum()
    };

    let mut beta = DVector::<f64>::zeros(k + 1);
    let mut ll = loglik(&beta);
    let mut iterations = 0;
    let mut info;
    loop {
        let eta = &design * &beta;
        let p = eta.map(sigmoid);
        let w = p.map(|v| v * (1.0 - v));
        let grad = design.transpose() * (&yv - &p);
        info = weighted_gram(&design, &w);
        let Some(chol) = info.clone().cholesky() else {
            return Err(Error::Singular("logistic information matrix"));
        };
        let step = chol.solve(&grad);
        // Halve the step until the likelihood does not decrease.
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut cand_ll = loglik(&candidate);
        while cand_ll < ll - 1e-12 && scale > 1e-6 {
            scale *= 0.5;
            candidate = &beta + scale * &step;
            cand_ll = loglik(&candidate);
        }
        let max_change = (scale * &step).amax();
        beta = candidate;
        ll = cand_ll;
        iterations += 1;
        if beta.norm() > SEPARATION_NORM {
            return Err(Error::Separation(beta.norm()));
        }
        if max_change < NEWTON_TOL || iterations >= NEWTON_MAX_ITER {
            break;
        }
    }
    let p = (&design * &beta).map(sigmoid);
    info = weighted_gram(&design, &p.map(|v| v * (1.0 - v)));
    let cov = info.try_inverse().ok_or(Error::Singular("logistic information matrix"))?;
    Ok(LogisticModel {
        names: names.to_vec(),
        beta: beta.iter().copied().collect(),
        loglik: ll,
        covariance: (0..=k).map(|r| (0..=k).map(|c| cov[(r, c)]).collect()).collect(),
        n,
        iterations,
    })
}

fn weighted_gram(design: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = design.clone();
    for (mut row, wi) in scaled.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    design.transpose() * scaled
}

/// Intercept-only model.
pub fn null_model(y: &[u8]) -> Result<LogisticModel> {
    logistic_fit(&vec![Vec::new(); y.len()], y, &[])
}

/// Logistic fit on a named subset of columns.
pub fn fit_subset(x: &[Vec<f64>], y: &[u8], names: &[String], keep: &[String]) -> Result<LogisticModel> {
    let idx: Vec<usize> = keep
        .iter()
        .map(|k| names.iter().position(|n| n == k).ok_or_else(|| Error::Config(format!("unknown covariate {k}"))))
        .collect::<Result<_>>()?;
    let sub: Vec<Vec<f64>> = x.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
    logistic_fit(&sub, y, keep)
}

/// Two-sided Wald p-value of coefficient `index` (0 is the intercept).
pub fn wald_test(model: &LogisticModel, index: usize) -> f64 {
    if model.beta[index] == 0.0 {
        return 1.0;
    }
    normal_two_sided(model.z(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodRatio {
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `D = 2 (l_full - l_reduced)` against chi-square with `df` degrees of freedom.
pub fn likelihood_ratio_from_loglik(full: f64, reduced: f64, df: usize) -> LikelihoodRatio {
    let deviance = 2.0 * (full - reduced);
    let p_value = if df == 0 { 1.0 } else { chi2_sf(deviance, df as f64) };
    LikelihoodRatio { deviance, df, p_value }
}

pub fn likelihood_ratio_test(full: &LogisticModel, reduced: &LogisticModel) -> Result<LikelihoodRatio> {
    let full_names: BTreeSet<&String> = full.names.iter().collect();
    if let Some(extra) = reduced.names.iter().find(|n| !full_names.contains(n)) {
        return Err(Error::NotNested(format!("{extra} is not in the full model")));
    }
    if full.n != reduced.n {
        return Err(Error::NotNested(format!("fitted on {} vs {} samples", full.n, reduced.n)));
    }
    Ok(likelihood_ratio_from_loglik(full.loglik, reduced.loglik, full.n_params() - reduced.n_params()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub dropped: String,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepwiseResult {
    pub model: LogisticModel,
    pub initial_criterion: f64,
    pub steps: Vec<StepRecord>,
}

/// Backward elimination: drop the covariate whose removal lowers the
/// criterion most, until no removal lowers it. Candidate fits that fail
/// (separation, singularity) are skipped.
pub fn stepwise_reduce(x: &[Vec<f64>], y: &[u8], names: &[String], criterion: Criterion) -> Result<StepwiseResult> {
    if names.is_empty() {
        return Err(Error::Config("stepwise reduction needs at least one covariate".into()));
    }
    let mut current = logistic_fit(x, y, names)?;
    let initial_criterion = current.criterion(criterion);
    let mut steps = Vec::new();
    while !current.names.is_empty() {
        let mut best: Option<(LogisticModel, String)> = None;
        for drop in &current.names {
            let keep: Vec<String> = current.names.iter().filter(|n| *n != drop).cloned().collect();
            let Ok(candidate) = fit_subset(x, y, names, &keep) else { continue };
            let better = best.as_ref().is_none_or(|(b, _)| candidate.criterion(criterion) < b.criterion(criterion));
            if better {
                best = Some((candidate, drop.clone()));
            }
        }
        match best {
            Some((model, dropped)) if model.criterion(criterion) < current.criterion(criterion) => {
                steps.push(StepRecord { dropped, criterion: model.criterion(criterion) });
                current = model;
            }
            _ => break,
        }
    }
    Ok(StepwiseResult { model: current, initial_criterion, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Determination {
    pub mcfadden: f64,
    pub cox_snell: f64,
    pub nagelkerke: f64,
}

pub fn determination_coefficients(loglik: f64, null_loglik: f64, n: usize) -> Determination {
    let n = n as f64;
    let mcfadden = 1.0 - loglik / null_loglik;
    let cox_snell = 1.0 - (2.0 * (null_loglik - loglik) / n).exp();
    let max_cs = 1.0 - (2.0 * null_loglik / n).exp();
    Determination { mcfadden, cox_snell, nagelkerke: cox_snell / max_cs }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddsRatio {
    pub covariate: String,
    pub or: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `exp(beta * direction)` with its Wald interval; `directions[i]` is `+1`
/// or `-1` for covariate `i` and orients the contrast towards the risky category.
pub fn odds_ratios(model: &LogisticModel, directions: &[f64]) -> Result<Vec<OddsRatio>> {
    if directions.len() != model.names.len() {
        return Err(Error::DimensionMismatch { expected: model.names.len(), actual: directions.len() });
    }
    Ok(model
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (b, se, dir) = (model.beta[i + 1], model.se(i + 1), directions[i]);
            let lo = ((b - Z95 * se) * dir).exp();
            let hi = ((b + Z95 * se) * dir).exp();
            OddsRatio { covariate: name.clone(), or: (b * dir).exp(), ci_low: lo.min(hi), ci_high: lo.max(hi) }
        })
        .collect())
}

/// One row of a categorical-factor table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRow {
    pub variable: String,
    pub category: String,
    pub table: ContingencyTable2x2,
}

pub fn write_factor_table<W: Write>(rows: &[FactorRow], continuity: Continuity, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variable", "category", "a", "b", "c", "d", "rr", "ci_low", "ci_high", "chi2", "p_value"])?;
    for row in rows {
        let t = row.table;
        let named = |e: Error| e.context(format!("variable {}", row.variable));
        let rr = relative_risk(&t).map_err(named)?;
        let chi = chi2_test(&t, continuity).map_err(named)?;
        w.write_record([
            row.variable.clone(),
            row.category.clone(),
            t.a.to_string(),
            t.b.to_string(),
            t.c.to_string(),
            t.d.to_string(),
            fmt_f64(rr.rr),
            fmt_f64(rr.ci_low),
            fmt_f64(rr.ci_high),
            fmt_f64(chi.statistic),
            fmt_f64(chi.p_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `covariate,coefficient,se,z,p_value`, intercept first.
pub fn write_coefficient_table<W: Write>(model: &LogisticModel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["covariate", "coefficient", "se", "z", "p_value"])?;
    let names = std::iter::once("(Intercept)".to_string()).chain(model.names.iter().cloned());
    for (i, name) in names.enumerate() {
        w.write_record([
            name,
            fmt_f64(model.beta[i]),
            fmt_f64(model.se(i)),
            fmt_f64(model.z(i)),
            fmt_f64(wald_test(model, i)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a continuous-variable comparison between the event and
/// non-event groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousRow {
    pub event: (f64, f64, f64),
    pub non_event: (f64, f64, f64),
    pub shift: MedianDifference,
    pub test: MannWhitney,
}

pub fn compare_continuous(event: &[f64], non_event: &[f64]) -> Result<ContinuousRow> {
    Ok(ContinuousRow {
        event: median_iqr(event).ok_or(Error::EmptyDataset)?,
        non_event: median_iqr(non_event).ok_or(Error::EmptyDataset)?,
        shift: median_difference_ci(event, non_event)?,
        test: mann_whitney(event, non_event)?,
    })
}

pub fn write_continuous_table<W: Write>(rows: &[(String, ContinuousRow)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "variable", "median_event", "q1_event", "q3_event", "median_non_event", "q1_non_event", "q3_non_event",
        "shift", "shift_ci_low", "shift_ci_high", "u", "p_value",
    ])?;
    for (name, r) in rows {
        let mut rec = vec![name.clone()];
        rec.extend([r.event.0, r.event.1, r.event.2, r.non_event.0, r.non_event.1, r.non_event.2].map(fmt_f64));
        rec.extend([r.shift.point, r.shift.ci_low, r.shift.ci_high, r.test.u, r.test.p_value].map(fmt_f64));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nocoil_chi2_and_rr() {
        let t = ContingencyTable2x2::new(25, 120, 3, 52);
        let chi = chi2_test(&t, Continuity::Auto).unwrap();
        assert!(!chi.yates);
        assert!(close(chi.statistic, 4.60, 0.01), "{}", chi.statistic);
        assert!(close(chi.p_value, 0.032, 0.001));
        let rr = relative_risk(&t).unwrap();
        assert!(close(rr.rr, 3.16, 0.005));
        assert!(close(rr.ci_low, 0.99, 0.005) && close(rr.ci_high, 10.05, 0.005));
    }

    #[test]
    fn independent_table() {
        let chi = chi2_test(&ContingencyTable2x2::new(10, 10, 10, 10), Continuity::None).unwrap();
        assert_eq!(chi.statistic, 0.0);
        assert_eq!(chi.p_value, 1.0);
        assert_eq!(relative_risk(&ContingencyTable2x2::new(4, 4, 4, 4)).unwrap().rr, 1.0);
    }

    #[test]
    fn chi2_zero_margin_errors() {
        assert!(chi2_test(&ContingencyTable2x2::new(0, 0, 3, 4), Continuity::Auto).is_err());
        assert!(relative_risk(&ContingencyTable2x2::new(1, 2, 0, 4)).is_err());
    }

    #[test]
    fn mann_whitney_separation_and_identity() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.p_value < 0.1);
        let x = [1.0, 2.0, 2.0, 5.0];
        let r = mann_whitney(&x, &x).unwrap();
        assert_eq!(r.u, 8.0);
        assert!(close(r.p_value, 1.0, 1e-12));
    }

    #[test]
    fn hodges_lehmann_shift() {
        let y = [1.0, 4.0, 2.5, 7.0, 3.0];
        let x: Vec<f64> = y.iter().map(|v| v + 5.0).collect();
        let r = median_difference_ci(&x, &y).unwrap();
        assert_eq!(r.point, 5.0);
        let same = median_difference_ci(&y, &y).unwrap();
        assert_eq!(same.point, 0.0);
        assert!(same.ci_low <= 0.0 && same.ci_high >= 0.0);
    }

    #[test]
    fn lrt_from_quoted_logliks() {
        assert!(likelihood_ratio_from_loglik(-70.0, -81.0, 4).p_value < 0.001);
        assert!(close(likelihood_ratio_from_loglik(-67.0, -70.0, 11).p_value, 0.8734, 1e-3));
        assert_eq!(likelihood_ratio_from_loglik(-5.0, -5.0, 0).p_value, 1.0);
    }

    #[test]
    fn determination_edge_cases() {
        let d = determination_coefficients(-50.0, -50.0, 100);
        assert_eq!((d.mcfadden, d.cox_snell, d.nagelkerke), (0.0, 0.0, 0.0));
        let d = determination_coefficients(-40.0, -50.0, 100);
        assert!(d.nagelkerke >= d.cox_snell);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median_iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some((3.0, 2.0, 4.0)));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
