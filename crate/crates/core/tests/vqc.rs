use alqnn::circuits::{compose, AnsatzSpec, FeatureMapSpec};
use alqnn::optim::{Method, OptimizerConfig};
use alqnn::qsim::{run_exact, Bindings, NoiseModel};
use alqnn::vqc::*;
use alqnn::ProbabilityModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(ansatz: AnsatzSpec, noise: NoiseModel, mode: EvalMode) -> VqcModel {
    VqcModel::new(FeatureMapSpec::new(4, 1), ansatz, noise, mode).unwrap()
}

#[test]
fn zero_parameters_give_even_split() {
    let m = model(AnsatzSpec::real_amplitudes(4, 3), NoiseModel::noiseless(), EvalMode::Exact);
    let (p0, p1) = m.predict_pair(&[0.0; 4]).unwrap();
    assert!((p0 - 0.5).abs() < 1e-12 && (p1 - 0.5).abs() < 1e-12);
}

#[test]
fn parity_decoding_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let fm = alqnn::circuits::build_feature_map(&FeatureMapSpec::new(4, 1)).unwrap();
    for (ansatz, p) in [(AnsatzSpec::efficient_su2(4, 3), 0.05), (AnsatzSpec::real_amplitudes(4, 3), 0.0)] {
        let noise = NoiseModel::new(p).unwrap();
        let full = compose(&fm, &alqnn::circuits::build_ansatz(&ansatz).unwrap()).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta: Vec<f64> = (0..ansatz.parameter_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m = model(ansatz, noise, EvalMode::Exact).with_theta(theta.clone()).unwrap();
            let probs = run_exact(&full, &Bindings::new(&x, &theta), &noise).unwrap();
            let mut odd = 0.0;
            for (i, p) in probs.iter().enumerate() {
                let bits: Vec<u8> = (0..4).map(|q| (i >> q & 1) as u8).collect();
                if bits.iter().fold(0, |a, b| a ^ b) == 1 {
                    odd += p;
                }
            }
            let (p0, p1) = m.predict_pair(&x).unwrap();
            assert!((p1 - odd).abs() < 1e-12);
            assert!((p0 + p1 - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn dimension_mismatch() {
    let m = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), EvalMode::Exact);
    assert!(matches!(m.predict_pair(&[0.0; 3]), Err(alqnn::Error::DimensionMismatch { .. })));
    assert!(m.clone().with_theta(vec![0.0; 16]).is_err());
    assert!(m.loss(&[], &[]).is_err());
}

#[test]
fn shots_are_reproducible_and_partition() {
    let mode = EvalMode::Shots { shots: DEFAULT_SHOTS, seed: 3 };
    let m = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), mode)
        .with_theta((0..32).map(|i| 0.1 * i as f64).collect())
        .unwrap();
    let x = [0.3, -1.0, 1.2, 0.0];
    let a = m.predict_pair(&x).unwrap();
    assert_eq!(a, m.predict_pair(&x).unwrap());
    assert_eq!(a.0 + a.1, 1.0);
    // Agrees with the exact value within a few shot standard errors.
    let exact = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), EvalMode::Exact)
        .with_theta(m.theta().to_vec())
        .unwrap()
        .predict_proba(&x)
        .unwrap();
    let se = alqnn::qsim::shot_standard_error(exact, DEFAULT_SHOTS);
    assert!((a.1 - exact).abs() < 5.0 * se + 1e-9);
}

#[test]
fn batch_prediction_matches_single() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), EvalMode::Exact)
        .with_theta((0..32).map(|_| rng.random_range(-3.0..3.0)).collect())
        .unwrap();
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 2) as f64, (i % 3) as f64, -0.5, 1.0]).collect();
    let batch = m.predict_proba_batch(&xs).unwrap();
    for (x, b) in xs.iter().zip(&batch) {
        assert!((m.predict_proba(x).unwrap() - b).abs() < 1e-14);
    }
}

#[test]
fn loss_is_mean_bce() {
    let m = model(AnsatzSpec::real_amplitudes(4, 3), NoiseModel::noiseless(), EvalMode::Exact);
    let x = vec![vec![0.0; 4]; 3];
    assert!((m.loss(&x, &[0, 1, 1]).unwrap() - 2f64.ln()).abs() < 1e-12);
}

fn toy_data() -> (Vec<Vec<f64>>, Vec<u8>) {
    let x: Vec<Vec<f64>> = (0..16).map(|i| (0..4).map(|q| if i >> q & 1 == 1 { 1.2 } else { -0.8 }).collect()).collect();
    let y = (0..16).map(|i: usize| u8::from(i.count_ones() >= 3)).collect();
    (x, y)
}

#[test]
fn zero_budget_returns_initial_loss() {
    let (x, y) = toy_data();
    let m = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), EvalMode::Exact);
    let cfg = OptimizerConfig::new(Method::from_name("bfgs").unwrap()).with_budget(0);
    let r = train(&m, &x, &y, &cfg, 2).unwrap();
    assert_eq!(r.loss_trace.len(), 1);
    assert_eq!(r.best_loss, r.initial_loss);
    let check = m.with_theta(r.initial_theta.clone()).unwrap().loss(&x, &y).unwrap();
    assert_eq!(check, r.initial_loss);
}

#[test]
fn single_sample_cmaes_improves() {
    let m = model(AnsatzSpec::efficient_su2(4, 3), NoiseModel::default(), EvalMode::Exact);
    let cfg = OptimizerConfig::new(Method::from_name("cmaes").unwrap());
    let r = train(&m, &[vec![0.5, -1.0, 1.0, 0.2]], &[1], &cfg, 7).unwrap();
    assert!(r.best_loss < r.initial_loss);
    assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn training_is_seeded() {
    let (x, y) = toy_data();
    let m = model(AnsatzSpec::real_amplitudes(4, 3), NoiseModel::default(), EvalMode::Exact);
    for method in ["cmaes", "spsa", "cobyla", "bfgs", "slsqp"] {
        let cfg = OptimizerConfig::new(Method::from_name(method).unwrap()).with_budget(10);
        let mut a = train(&m, &x, &y, &cfg, 4).unwrap();
        let mut b = train(&m, &x, &y, &cfg, 4).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b, "{method}");
        assert!(a.best_loss <= a.initial_loss);
        let check = m.clone().with_theta(a.best_theta.clone()).unwrap().loss(&x, &y).unwrap();
        assert!((check - a.best_loss).abs() < 1e-12, "{method}");
    }
}

#[test]
fn convergence_csv_layout() {
    let (x, y) = toy_data();
    let m = model(AnsatzSpec::real_amplitudes(4, 3), NoiseModel::default(), EvalMode::Exact);
    let cfg = OptimizerConfig::new(Method::from_name("cobyla").unwrap()).with_budget(3);
    let r = train(&m, &x, &y, &cfg, 1).unwrap();
    let mut buf = Vec::new();
    write_convergence_csv(&[("ra-cobyla-0".to_string(), &r)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "run_id,iteration,loss");
    assert_eq!(lines.len(), 1 + r.loss_trace.len());
    assert!(lines[1].starts_with("ra-cobyla-0,0,"));
}
