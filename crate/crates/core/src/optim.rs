//! Black-box minimizers over real parameter vectors.
//!
//! Every method counts "iterations" as outer steps (CMA-ES generations, SPSA
//! steps, COBYLA trial points, quasi-Newton iterations); `budget` caps them.
//! `OptResult::trace` holds the best value seen after each iteration.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub trait Objective: Sync {
    fn dimension(&self) -> usize;

    /// May be stochastic; non-finite values are treated as failures by the
    /// callers that care.
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Closure-backed objective.
pub struct FnObjective<F> {
    dimension: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

struct Counted<'a> {
    inner: &'a dyn Objective,
    count: AtomicUsize,
}

impl<'a> Counted<'a> {
    fn new(inner: &'a dyn Objective) -> Self {
        Self { inner, count: AtomicUsize::new(0) }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(x)
    }

    fn evaluations(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

/// Central differences with step `h_i = rel_step * max(1, |x_i|)`.
pub fn central_gradient(obj: &dyn Objective, x: &[f64], rel_step: f64) -> Vec<f64> {
    let counted = Counted::new(obj);
    central_gradient_counted(&counted, x, rel_step)
}

fn central_gradient_counted(obj: &Counted<'_>, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = obj.eval(&probe);
            probe[i] = x[i] - h;
            let down = obj.eval(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmaEsConfig {
    pub sigma0: f64,
    /// Defaults to `ceil(4 + 3 ln m)`.
    pub population: Option<usize>,
    pub parent_fraction: f64,
    pub c_mean: f64,
    /// Multiplies the standard CSA damping.
    pub damping: f64,
}

impl Default for CmaEsConfig {
    fn default() -> Self {
        Self { sigma0: 0.15, population: None, parent_fraction: 0.5, c_mean: 1.0, damping: 1.0 }
    }
}

pub fn cmaes_population(m: usize) -> usize {
    (4.0 + 3.0 * (m as f64).ln()).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub allowed_increase: f64,
    pub blocking: bool,
    /// Stop once this many consecutive accepted steps fail to improve the best value.
    pub termination_window: Option<usize>,
    /// Perturbation gain `c`.
    pub perturbation: f64,
    /// Step gain `a`; calibrated from the objective when `None`.
    pub learning_rate: Option<f64>,
    /// Desired magnitude of the first update when calibrating `a`.
    pub target_magnitude: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
    pub calibration_samples: usize,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            allowed_increase: 1e-3,
            blocking: true,
            termination_window: Some(10),
            perturbation: 0.2,
            learning_rate: None,
            target_magnitude: 2.0 * std::f64::consts::PI / 10.0,
            alpha: 0.602,
            gamma: 0.101,
            stability: 0.0,
            calibration_samples: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CobylaConfig {
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        Self { rho_begin: 1.0, rho_end: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonConfig {
    pub ftol: f64,
    pub armijo: f64,
    pub max_line_search: usize,
    pub rel_step: f64,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        Self { ftol: 1e-4, armijo: 1e-4, max_line_search: 30, rel_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    CmaEs(CmaEsConfig),
    Spsa(SpsaConfig),
    Cobyla(CobylaConfig),
    Bfgs(QuasiNewtonConfig),
    Slsqp(QuasiNewtonConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::CmaEs(_) => "CMAES",
            Method::Spsa(_) => "SPSA",
            Method::Cobyla(_) => "COBYLA",
            Method::Bfgs(_) => "BFGS",
            Method::Slsqp(_) => "SLSQP",
        }
    }

    /// Parses `cmaes`, `spsa`, `cobyla`, `bfgs` or `slsqp` with default settings.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().replace('-', "").as_str() {
            "cmaes" => Method::CmaEs(CmaEsConfig::default()),
            "spsa" => Method::Spsa(SpsaConfig::default()),
            "cobyla" => Method::Cobyla(CobylaConfig::default()),
            "bfgs" => Method::Bfgs(QuasiNewtonConfig::default()),
            "slsqp" => Method::Slsqp(QuasiNewtonConfig::default()),
            other => return Err(Error::Config(format!("unknown optimizer {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub budget: usize,
}

impl OptimizerConfig {
    pub fn new(method: Method) -> Self {
        Self { method, budget: 75 }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Budget,
    FunctionTolerance,
    TrustRegionConverged,
    Stalled,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub termination: Termination,
}

struct Best {
    x: Vec<f64>,
    value: f64,
}

impl Best {
    fn new(x: &[f64], value: f64) -> Self {
        Self { x: x.to_vec(), value: if value.is_nan() { f64::INFINITY } else { value } }
    }

    fn offer(&mut self, x: &[f64], value: f64) -> bool {
        if value < self.value {
            self.value = value;
            self.x.clear();
            self.x.extend_from_slice(x);
            true
        } else {
            false
        }
    }
}

fn check_start(obj: &dyn Objective, x0: &[f64]) -> Result<()> {
    if x0.len() != obj.dimension() {
        return Err(Error::DimensionMismatch { expected: obj.dimension(), actual: x0.len() });
    }
    if x0.is_empty() {
        return Err(Error::Config("objective dimension must be at least 1".into()));
    }
    Ok(())
}

pub fn minimize(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig, seed: u64) -> Result<OptResult> {
    match cfg.method {
        Method::CmaEs(c) => cmaes_minimize(obj, x0, &c, cfg.budget, seed),
        Method::Spsa(c) => spsa_minimize(obj, x0, &c, cfg.budget, seed),
        Method::Cobyla(c) => cobyla_minimize(obj, x0, &c, cfg.budget),
        Method::Bfgs(c) => bfgs_minimize(obj, x0, &c, cfg.budget),
        Method::Slsqp(c) => slsqp_minimize(obj, x0, &c, cfg.budget),
    }
}

/// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance updates.
pub fn cmaes_minimize(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &CmaEsConfig,
    budget: usize,
    seed: u64,
) -> Result<OptResult> {
    check_start(obj, x0)?;
    if cfg.sigma0 <= 0.0 {
        return Err(Error::Config("sigma0 must be positive".into()));
    }
    let counted = Counted::new(obj);
    let n = x0.len();
    let nf = n as f64;
    let lambda = cfg.population.unwrap_or_else(|| cmaes_population(n));
    if lambda < 4 {
        return Err(Error::Config("CMA-ES population must be at least 4".into()));
    }
    let mu = ((cfg.parent_fraction * lambda as f64).ceil() as usize).clamp(1, lambda);
    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = cfg.damping * (1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma);
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let f0 = counted.eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut best = Best::new(x0, f0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = cfg.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);
    let mut trace = Vec::with_capacity(budget);

    for generation in 0..budget {
        let eig = cov.clone().symmetric_eigen();
        let b = eig.eigenvectors;
        let d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let steps: Vec<DVector<f64>> = (0..lambda)
            .map(|_| {
                let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
                &b * z.component_mul(&d)
            })
            .collect();
        let candidates: Vec<Vec<f64>> =
            steps.iter().map(|y| (&mean + sigma * y).iter().copied().collect()).collect();
        let values: Vec<f64> = candidates.par_iter().map(|x| counted.eval(x)).collect();
        let mut order: Vec<usize> = (0..lambda).collect();
        let rank_key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
        order.sort_by(|&i, &j| rank_key(values[i]).total_cmp(&rank_key(values[j])));
        best.offer(&candidates[order[0]], rank_key(values[order[0]]));

        let y_w = order[..mu].iter().zip(&weights).fold(DVector::zeros(n), |acc, (&i, w)| acc + *w * &steps[i]);
        mean += cfg.c_mean * sigma * &y_w;

        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * (generation as i32 + 1))).sqrt() / chi_n
            < 1.4 + 2.0 / (nf + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - c_c) * &p_c + h * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;
        let rank_mu = order[..mu]
            .iter()
            .zip(&weights)
            .fold(DMatrix::zeros(n, n), |acc, (&i, w)| acc + *w * &steps[i] * steps[i].transpose());
        let delta_h = (1.0 - h) * c_c * (2.0 - c_c);
        cov = (1.0 - c_1 - c_mu) * &cov + c_1 * (&p_c * p_c.transpose() + delta_h * &cov) + c_mu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        trace.push(best.value);
    }
    Ok(OptResult {
        best_x: best.x,
        best_value: best.value,
        trace,
        evaluations: counted.evaluations(),
        termination: Termination::Budget,
    })
}

/// Simultaneous-perturbation stochastic approximation with Rademacher
/// directions, gains `a/(k+1+A)^alpha`, `c/(k+1)^gamma`, optional blocking and
/// a stall window over accepted steps.
pub fn spsa_minimize(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &SpsaConfig,
    budget: usize,
    seed: u64,
) -> Result<OptResult> {
    check_start(obj, x0)?;
    let counted = Counted::new(obj);
    let n = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rademacher = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    };
    let shifted = |x: &[f64], d: &[f64], s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };

    let mut x = x0.to_vec();
    let mut fx = counted.eval(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut best = Best::new(&x, fx);
    let c = cfg.perturbation;
    let a = match cfg.learning_rate {
        Some(a) => a,
        None => {
            let samples = cfg.calibration_samples.max(1);
            let mut magnitude = 0.0;
            for _ in 0..samples {
                let d = rademacher(&mut rng);
                let diff = counted.eval(&shifted(&x, &d, c)) - counted.eval(&shifted(&x, &d, -c));
                magnitude += (diff / (2.0 * c)).abs() / samples as f64;
            }
            let scale = if magnitude > 1e-12 { magnitude } else { 1.0 };
            cfg.target_magnitude * (cfg.stability + 1.0).powf(cfg.alpha) / scale
        }
    };

    let mut trace = Vec::with_capacity(budget);
    let mut stale_accepted = 0usize;
    let mut termination = Termination::Budget;
    for k in 0..budget {
        let ak = a / (k as f64 + 1.0 + cfg.stability).powf(cfg.alpha);
        let ck = c / (k as f64 + 1.0).powf(cfg.gamma);
        let d = rademacher(&mut rng);
        let diff = counted.eval(&shifted(&x, &d, ck)) - counted.eval(&shifted(&x, &d, -ck));
        let g = diff / (2.0 * ck);
        let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi - ak * g * di).collect();
        let f_new = counted.eval(&candidate);
        let accepted = !(cfg.blocking && !(f_new <= fx + cfg.allowed_increase));
        if accepted {
            x = candidate;
            fx = f_new;
            if best.offer(&x, fx) {
                stale_accepted = 0;
            } else {
                stale_accepted += 1;
            }
        }
        trace.push(best.value);
        if cfg.termination_window.is_some_and(|w| stale_accepted >= w) {
            termination = Termination::Stalled;
            break;
        }
    }
    Ok(OptResult { best_x: best.x, best_value: best.value, trace, evaluations: counted.evaluations(), termination })
}

/// Unconstrained COBYLA-style trust-region method: a linear model through
/// `m + 1` simplex vertices is minimized on a ball of radius `rho`, which
/// shrinks from `rho_begin` to `rho_end`.
pub fn cobyla_minimize(obj: &dyn Objective, x0: &[f64], cfg: &CobylaConfig, budget: usize) -> Result<OptResult> {
    check_start(obj, x0)?;
    let counted = Counted::new(obj);
    let n = x0.len();
    let mut rho = cfg.rho_begin;
    let f0 = counted.eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut sim: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut fval = vec![f0];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += rho;
        fval.push(counted.eval(&v));
        sim.push(v);
    }
    let sanitize = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut best = Best::new(x0, f0);
    for (v, f) in sim.iter().zip(&fval) {
        best.offer(v, sanitize(*f));
    }

    let mut trace = Vec::with_capacity(budget);
    let mut termination = Termination::Budget;
    let mut iterations = 0;
    while iterations < budget {
        let b = (0..=n).min_by(|&i, &j| sanitize(fval[i]).total_cmp(&sanitize(fval[j]))).unwrap();
        let others: Vec<usize> = (0..=n).filter(|&i| i != b).collect();
        let disp = DMatrix::from_fn(n, n, |r, c| sim[others[r]][c] - sim[b][c]);
        let Some(inv) = disp.clone().try_inverse() else {
            return Err(Error::Singular("COBYLA simplex"));
        };
        let df = DVector::from_fn(n, |r, _| sanitize(fval[others[r]]) - sanitize(fval[b]));
        let grad = &inv * &df;
        // Lagrange function of vertex others[r] has gradient inv.column(r).
        let lagrange = |pt: &[f64]| -> Vec<f64> {
            let d = DVector::from_fn(n, |c, _| pt[c] - sim[b][c]);
            (0..n).map(|r| inv.column(r).dot(&d)).collect()
        };

        let far = others
            .iter()
            .enumerate()
            .map(|(r, &i)| (r, dist(&sim[i], &sim[b])))
            .max_by(|a, c| a.1.total_cmp(&c.1))
            .filter(|&(_, d)| d > 2.0 * rho);

        let gnorm = grad.norm();
        let model_step = far.is_none() && gnorm.is_finite() && gnorm > 0.0;
        let trial: Vec<f64> = if model_step {
            (0..n).map(|c| sim[b][c] - rho * grad[c] / gnorm).collect()
        } else if let Some((r, _)) = far {
            let w = inv.column(r);
            let sign = if grad.dot(&w) > 0.0 { -1.0 } else { 1.0 };
            let wn = w.norm();
            (0..n).map(|c| sim[b][c] + sign * rho * w[c] / wn).collect()
        } else {
            // Flat model on a well-shaped simplex: refine the radius.
            if rho <= cfg.rho_end {
                termination = Termination::TrustRegionConverged;
                break;
            }
            rho = (rho * 0.5).max(cfg.rho_end);
            shrink_toward(&mut sim, &mut fval, b, rho, &counted);
            for (v, f) in sim.iter().zip(&fval) {
                best.offer(v, sanitize(*f));
            }
            continue;
        };

        let ft = sanitize(counted.eval(&trial));
        iterations += 1;
        best.offer(&trial, ft);
        let ell = lagrange(&trial);
        if let Some((r, _)) = far.filter(|_| !model_step) {
            sim[others[r]] = trial;
            fval[others[r]] = ft;
        } else if ft < sanitize(fval[b]) {
            // Replace the vertex whose swap keeps the simplex volume largest.
            let ell_b = 1.0 - ell.iter().sum::<f64>();
            let (mut j, mut score) = (b, ell_b.abs());
            for (r, &i) in others.iter().enumerate() {
                if ell[r].abs() > score {
                    j = i;
                    score = ell[r].abs();
                }
            }
            sim[j] = trial;
            fval[j] = ft;
        } else {
            let worst = others.iter().enumerate().max_by(|a, c| sanitize(fval[*a.1]).total_cmp(&sanitize(fval[*c.1])));
            if let Some((r, &i)) = worst {
                if ft < sanitize(fval[i]) && ell[r].abs() > 0.5 {
                    sim[i] = trial;
                    fval[i] = ft;
                }
            }
            if rho <= cfg.rho_end {
                trace.push(best.value);
                termination = Termination::TrustRegionConverged;
                break;
            }
            rho = (rho * 0.5).max(cfg.rho_end);
        }
        trace.push(best.value);
    }
    Ok(OptResult { best_x: best.x, best_value: best.value, trace, evaluations: counted.evaluations(), termination })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Rebuilds an axis simplex of edge `rho` around vertex `b`.
fn shrink_toward(sim: &mut [Vec<f64>], fval: &mut [f64], b: usize, rho: f64, obj: &Counted<'_>) {
    let center = sim[b].clone();
    let mut axis = 0;
    for i in 0..sim.len() {
        if i == b {
            continue;
        }
        let mut v = center.clone();
        v[axis] += rho;
        axis += 1;
        fval[i] = obj.eval(&v);
        sim[i] = v;
    }
}

enum QuasiNewton {
    InverseHessian,
    DampedHessian,
}

/// Quasi-Newton with inverse-Hessian BFGS updates, Armijo backtracking and
/// central-difference gradients.
pub fn bfgs_minimize(obj: &dyn Objective, x0: &[f64], cfg: &QuasiNewtonConfig, budget: usize) -> Result<OptResult> {
    quasi_newton(obj, x0, cfg, budget, QuasiNewton::InverseHessian)
}

/// Unconstrained SQP: each step solves the quadratic model `B d = -g` with a
/// Powell-damped BFGS Hessian approximation `B`, followed by the same line
/// search and stopping rule as [`bfgs_minimize`].
pub fn slsqp_minimize(obj: &dyn Objective, x0: &[f64], cfg: &QuasiNewtonConfig, budget: usize) -> Result<OptResult> {
    quasi_newton(obj, x0, cfg, budget, QuasiNewton::DampedHessian)
}

fn quasi_newton(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &QuasiNewtonConfig,
    budget: usize,
    variant: QuasiNewton,
) -> Result<OptResult> {
    check_start(obj, x0)?;
    let counted = Counted::new(obj);
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut f = counted.eval(x0);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut g = DVector::from_vec(central_gradient_counted(&counted, x.as_slice(), cfg.rel_step));
    // Inverse Hessian for BFGS, Hessian for the SQP variant.
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut trace = Vec::with_capacity(budget);
    let mut termination = Termination::Budget;

    for k in 0..budget {
        let mut p = match variant {
            QuasiNewton::InverseHessian => -(&m * &g),
            QuasiNewton::DampedHessian => match m.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => -g.clone(),
            },
        };
        let mut slope = g.dot(&p);
        if !(slope <= 0.0) {
            m = DMatrix::identity(n, n);
            p = -g.clone();
            slope = g.dot(&p);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_line_search.max(1) {
            let cand = &x + alpha * &p;
            let fc = counted.eval(cand.as_slice());
            if fc.is_finite() && fc <= f + cfg.armijo * alpha * slope {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            trace.push(f);
            termination = Termination::LineSearchFailed;
            break;
        };
        let g_new = DVector::from_vec(central_gradient_counted(&counted, x_new.as_slice(), cfg.rel_step));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        match variant {
            QuasiNewton::InverseHessian => {
                if k == 0 && sy > 0.0 {
                    m = DMatrix::identity(n, n) * (sy / y.dot(&y));
                }
                if sy > 1e-12 * s.norm() * y.norm() {
                    let rho = 1.0 / sy;
                    let eye = DMatrix::<f64>::identity(n, n);
                    let left = &eye - rho * &s * y.transpose();
                    let right = &eye - rho * &y * s.transpose();
                    m = &left * &m * &right + rho * &s * s.transpose();
                }
            }
            QuasiNewton::DampedHessian => {
                if k == 0 && sy > 0.0 {
                    m = DMatrix::identity(n, n) * (y.dot(&y) / sy);
                }
                let bs = &m * &s;
                let sbs = s.dot(&bs);
                if sbs > 0.0 {
                    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
                    let r = theta * &y + (1.0 - theta) * &bs;
                    let sr = s.dot(&r);
                    if sr > 0.0 {
                        m = &m - &bs * bs.transpose() / sbs + &r * r.transpose() / sr;
                    }
                }
            }
        }
        let delta = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        if delta.abs() <= cfg.ftol * f.abs().max(1.0) {
            termination = Termination::FunctionTolerance;
            break;
        }
    }
    Ok(OptResult {
        best_x: x.iter().copied().collect(),
        best_value: f,
        trace,
        evaluations: counted.evaluations(),
        termination,
    })
}
