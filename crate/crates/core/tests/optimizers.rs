use alqnn::optim::*;
use proptest::prelude::*;

fn sphere(m: usize) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective::new(m, |x: &[f64]| x.iter().map(|v| v * v).sum())
}

// (x - c)^T A (x - c) with A = [[3, 1], [1, 2]].
fn quadratic(c: [f64; 2]) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective::new(2, move |x: &[f64]| {
        let (a, b) = (x[0] - c[0], x[1] - c[1]);
        3.0 * a * a + 2.0 * a * b + 2.0 * b * b
    })
}

fn rosenbrock() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
    FnObjective::new(2, |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
}

fn all_methods() -> Vec<Method> {
    ["cmaes", "spsa", "cobyla", "bfgs", "slsqp"].iter().map(|n| Method::from_name(n).unwrap()).collect()
}

const START: [f64; 4] = [0.8, -0.6, 0.4, 1.0];

#[test]
fn sphere_targets() {
    let f = sphere(4);
    let targets = [("CMAES", 1e-3), ("SPSA", 1e-1), ("COBYLA", 1e-2), ("BFGS", 1e-8), ("SLSQP", 1e-8)];
    for method in all_methods() {
        let r = minimize(&f, &START, &OptimizerConfig::new(method), 7).unwrap();
        let target = targets.iter().find(|t| t.0 == method.name()).unwrap().1;
        assert!(r.best_value < target, "{} reached {}", method.name(), r.best_value);
        assert!(r.trace.len() <= 75);
    }
}

#[test]
fn rosenbrock_bfgs_reaches_minimum() {
    // With the default ftol the absolute floor stops anywhere below f ~ 1e-4,
    // which is too coarse to pin the minimizer to 1e-3.
    let cfg = QuasiNewtonConfig { ftol: 1e-12, ..QuasiNewtonConfig::default() };
    let r = bfgs_minimize(&rosenbrock(), &[-1.2, 1.0], &cfg, 75).unwrap();
    let err = ((r.best_x[0] - 1.0).powi(2) + (r.best_x[1] - 1.0).powi(2)).sqrt();
    assert!(err < 1e-3, "ended at {:?} after {} iterations", r.best_x, r.trace.len());
}

#[test]
fn quadratic_minimizers() {
    let c = [0.7, -1.3];
    let f = quadratic(c);
    let cma = cmaes_minimize(&f, &[0.0, 0.0], &CmaEsConfig::default(), 75, 3).unwrap();
    assert!((cma.best_x[0] - c[0]).abs() < 1e-2 && (cma.best_x[1] - c[1]).abs() < 1e-2);
    let sq = slsqp_minimize(&f, &[0.0, 0.0], &QuasiNewtonConfig::default(), 75).unwrap();
    assert!((sq.best_x[0] - c[0]).abs() < 1e-4 && (sq.best_x[1] - c[1]).abs() < 1e-4);
}

#[test]
fn slsqp_matches_bfgs_on_convex() {
    for f in [&quadratic([0.2, 0.5]) as &dyn Objective, &sphere(2)] {
        let a = bfgs_minimize(f, &[1.5, -2.0], &QuasiNewtonConfig::default(), 75).unwrap();
        let b = slsqp_minimize(f, &[1.5, -2.0], &QuasiNewtonConfig::default(), 75).unwrap();
        assert!((a.best_value - b.best_value).abs() < 1e-6);
    }
}

#[test]
fn cobyla_abs_value() {
    let f = FnObjective::new(1, |x: &[f64]| x[0].abs());
    let r = cobyla_minimize(&f, &[1.0], &CobylaConfig::default(), 75).unwrap();
    assert!(r.best_value < 0.05);
}

#[test]
fn evaluation_bounds() {
    let m = 4;
    let f = sphere(m);
    let budget = 20;
    let lambda = cmaes_population(m);
    let r = cmaes_minimize(&f, &START, &CmaEsConfig::default(), budget, 1).unwrap();
    assert!(r.evaluations <= lambda * budget + 1);
    let cfg = SpsaConfig::default();
    let r = spsa_minimize(&f, &START, &cfg, budget, 1).unwrap();
    assert!(r.evaluations <= 3 * budget + 1 + 2 * cfg.calibration_samples);
    let qn = QuasiNewtonConfig::default();
    let r = bfgs_minimize(&f, &START, &qn, budget).unwrap();
    assert!(r.evaluations <= budget * (2 * m + qn.max_line_search) + 2 * m + 1);
}

#[test]
fn stochastic_methods_are_seeded() {
    let f = sphere(4);
    for method in [Method::from_name("cmaes").unwrap(), Method::from_name("spsa").unwrap()] {
        let cfg = OptimizerConfig::new(method).with_budget(30);
        let a = minimize(&f, &START, &cfg, 11).unwrap();
        let b = minimize(&f, &START, &cfg, 11).unwrap();
        assert_eq!(a, b);
        let c = minimize(&f, &START, &cfg, 12).unwrap();
        assert_ne!(a.trace, c.trace);
    }
}

#[test]
fn line_search_failure_is_flagged() {
    // Gradient points the wrong way: the objective is noisy at every trial.
    let f = FnObjective::new(1, |x: &[f64]| if x[0] == 0.5 { 0.0 } else { 1.0 + x[0] });
    let r = bfgs_minimize(&f, &[0.5], &QuasiNewtonConfig::default(), 10).unwrap();
    assert_eq!(r.termination, Termination::LineSearchFailed);
    assert_eq!(r.best_x, vec![0.5]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn traces_are_non_increasing(seed in 0u64..1000, x in prop::array::uniform4(-2.0f64..2.0)) {
        let f = sphere(4);
        for method in all_methods() {
            let r = minimize(&f, &x, &OptimizerConfig::new(method).with_budget(25), seed).unwrap();
            prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
            let min = r.trace.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(r.best_value <= min);
        }
    }

    #[test]
    fn translation_equivariance(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
        let base = quadratic([0.3, -0.4]);
        let shifted = quadratic([0.3 + c0, -0.4 + c1]);
        let x0 = [1.0, 1.0];
        let xs = [1.0 + c0, 1.0 + c1];
        for method in ["cmaes", "bfgs", "slsqp"] {
            let cfg = OptimizerConfig::new(Method::from_name(method).unwrap());
            let a = minimize(&base, &x0, &cfg, 5).unwrap();
            let b = minimize(&shifted, &xs, &cfg, 5).unwrap();
            prop_assert!((b.best_x[0] - a.best_x[0] - c0).abs() < 1e-3, "{method}");
            prop_assert!((b.best_x[1] - a.best_x[1] - c1).abs() < 1e-3, "{method}");
        }
    }
}
