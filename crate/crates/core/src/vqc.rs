//! Variational quantum classifier with parity decoding.
//!
//! In exact mode the state after the feature map depends only on the input,
//! so loss evaluation caches one density matrix per distinct input pattern
//! and re-runs only the ansatz for each new `theta`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{build_ansatz, build_feature_map, AnsatzSpec, FeatureMapSpec};
use crate::metrics::{clamp_probability, fmt_f64};
use crate::optim::{minimize, Objective, OptimizerConfig, Termination};
use crate::qsim::{evolve_mixed, final_density, run_shots, split_seed, Bindings, Circuit, DensityMatrix, NoiseModel};
use crate::{Error, ProbabilityModel, Result};

pub const DEFAULT_SHOTS: u64 = 1024;

/// Parity of a basis-state index.
pub fn parity(index: usize) -> u8 {
    (index.count_ones() & 1) as u8
}

/// XOR of explicit bits.
pub fn parity_of_bits(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, b| acc ^ (b & 1))
}

/// `(P(class 0), P(class 1))` from basis probabilities.
pub fn decode_parity(probs: &[f64]) -> (f64, f64) {
    let p1: f64 = probs.iter().enumerate().filter(|(i, _)| parity(*i) == 1).map(|(_, p)| p).sum();
    let p0: f64 = probs.iter().enumerate().filter(|(i, _)| parity(*i) == 0).map(|(_, p)| p).sum();
    (p0, p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Exact,
    /// Trajectory sampling; every prediction derives its seed from `seed`,
    /// the input and `theta`, so repeated calls are reproducible.
    Shots { shots: u64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct VqcModel {
    feature_map: FeatureMapSpec,
    ansatz: AnsatzSpec,
    theta: Vec<f64>,
    noise: NoiseModel,
    eval_mode: EvalMode,
    fm_circuit: Circuit,
    ansatz_circuit: Circuit,
    full_circuit: Circuit,
}

impl VqcModel {
    /// Model with `theta = 0`.
    pub fn new(feature_map: FeatureMapSpec, ansatz: AnsatzSpec, noise: NoiseModel, eval_mode: EvalMode) -> Result<Self> {
        if feature_map.n_features != ansatz.n_qubits {
            return Err(Error::QubitCountMismatch { left: feature_map.n_features, right: ansatz.n_qubits });
        }
        NoiseModel::new(noise.p_gate)?;
        if let EvalMode::Shots { shots: 0, .. } = eval_mode {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let fm_circuit = build_feature_map(&feature_map)?;
        let ansatz_circuit = build_ansatz(&ansatz)?;
        let full_circuit = fm_circuit.compose(&ansatz_circuit)?;
        Ok(Self {
            theta: vec![0.0; ansatz.parameter_count()],
            feature_map,
            ansatz,
            noise,
            eval_mode,
            fm_circuit,
            ansatz_circuit,
            full_circuit,
        })
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Result<Self> {
        self.set_theta(theta)?;
        Ok(self)
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.n_parameters() {
            return Err(Error::DimensionMismatch { expected: self.n_parameters(), actual: theta.len() });
        }
        self.theta = theta;
        Ok(())
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n_parameters(&self) -> usize {
        self.ansatz.parameter_count()
    }

    pub fn feature_map(&self) -> &FeatureMapSpec {
        &self.feature_map
    }

    pub fn ansatz(&self) -> &AnsatzSpec {
        &self.ansatz
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn eval_mode(&self) -> EvalMode {
        self.eval_mode
    }

    pub fn circuit(&self) -> &Circuit {
        &self.full_circuit
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_map.n_features {
            return Err(Error::DimensionMismatch { expected: self.feature_map.n_features, actual: x.len() });
        }
        Ok(())
    }

    /// Density matrix after the (noisy) feature map.
    pub fn encode(&self, x: &[f64]) -> Result<DensityMatrix> {
        self.check_input(x)?;
        final_density(&self.fm_circuit, &Bindings::new(x, &[]), &self.noise)
    }

    fn exact_from_encoded(&self, encoded: &DensityMatrix, theta: &[f64]) -> Result<(f64, f64)> {
        let mut rho = encoded.clone();
        evolve_mixed(&mut rho, &self.ansatz_circuit, &Bindings::new(&[], theta), &self.noise)?;
        Ok(decode_parity(&rho.diagonal()))
    }

    fn shots_seed(root: u64, x: &[f64], theta: &[f64]) -> u64 {
        let mut h = DefaultHasher::new();
        for v in x.iter().chain(theta) {
            v.to_bits().hash(&mut h);
        }
        split_seed(root, h.finish())
    }

    fn predict_with(&self, x: &[f64], theta: &[f64]) -> Result<(f64, f64)> {
        self.check_input(x)?;
        match self.eval_mode {
            EvalMode::Exact => self.exact_from_encoded(&self.encode(x)?, theta),
            EvalMode::Shots { shots, seed } => {
                let r = run_shots(&self.full_circuit, &Bindings::new(x, theta), &self.noise, shots, Self::shots_seed(seed, x, theta))?;
                Ok(decode_parity(&r.frequencies()))
            }
        }
    }

    /// `(P(class 0), P(class 1))` for one standardized input.
    pub fn predict_pair(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.predict_with(x, &self.theta)
    }

    /// Mean binary cross-entropy of `P(class 1)` against `y`.
    pub fn loss(&self, x: &[Vec<f64>], y: &[u8]) -> Result<f64> {
        let data = EncodedData::new(self, x, y)?;
        data.loss(self, &self.theta)
    }
}

impl ProbabilityModel for VqcModel {
    fn n_features(&self) -> usize {
        self.feature_map.n_features
    }

    fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_pair(x)?.1)
    }

    fn predict_proba_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self.eval_mode {
            EvalMode::Exact => {
                let data = EncodedData::new(self, xs, &vec![0; xs.len()])?;
                let unique = data.unique_probabilities(self, &self.theta)?;
                Ok(data.pattern_of.iter().map(|&k| unique[k]).collect())
            }
            EvalMode::Shots { .. } => xs.par_iter().map(|x| self.predict_proba(x)).collect(),
        }
    }
}

pub fn binary_cross_entropy(p1: f64, y: u8) -> f64 {
    let p = clamp_probability(p1);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// A dataset prepared for repeated loss evaluation.
struct EncodedData {
    samples: Vec<Vec<f64>>,
    labels: Vec<u8>,
    /// Feature-map state of each distinct input pattern (exact mode only).
    encoded: Vec<DensityMatrix>,
    pattern_of: Vec<usize>,
}

impl EncodedData {
    fn new(model: &VqcModel, x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), actual: x.len() });
        }
        for row in x {
            model.check_input(row)?;
        }
        let mut patterns = Vec::new();
        let mut pattern_of = Vec::with_capacity(x.len());
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for row in x {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let k = *seen.entry(key).or_insert_with(|| {
                patterns.push(row.clone());
                patterns.len() - 1
            });
            pattern_of.push(k);
        }
        let encoded = match model.eval_mode {
            EvalMode::Exact => patterns.par_iter().map(|p| model.encode(p)).collect::<Result<Vec<_>>>()?,
            EvalMode::Shots { .. } => Vec::new(),
        };
        Ok(Self { samples: x.to_vec(), labels: y.to_vec(), encoded, pattern_of })
    }

    fn unique_probabilities(&self, model: &VqcModel, theta: &[f64]) -> Result<Vec<f64>> {
        self.encoded.par_iter().map(|rho| Ok(model.exact_from_encoded(rho, theta)?.1)).collect()
    }

    fn loss(&self, model: &VqcModel, theta: &[f64]) -> Result<f64> {
        let probs: Vec<f64> = match model.eval_mode {
            EvalMode::Exact => {
                let unique = self.unique_probabilities(model, theta)?;
                self.pattern_of.iter().map(|&k| unique[k]).collect()
            }
            EvalMode::Shots { .. } => self
                .samples
                .par_iter()
                .map(|x| Ok(model.predict_with(x, theta)?.1))
                .collect::<Result<Vec<_>>>()?,
        };
        let total: f64 = probs.iter().zip(&self.labels).map(|(&p, &t)| binary_cross_entropy(p, t)).sum();
        Ok(total / probs.len() as f64)
    }
}

struct LossObjective<'a> {
    model: &'a VqcModel,
    data: EncodedData,
}

impl Objective for LossObjective<'_> {
    fn dimension(&self) -> usize {
        self.model.n_parameters()
    }

    fn evaluate(&self, theta: &[f64]) -> f64 {
        self.data.loss(self.model, theta).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Loss at the initial `theta`, then the best loss after each iteration.
    pub loss_trace: Vec<f64>,
    pub initial_theta: Vec<f64>,
    pub best_theta: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub evaluations: usize,
    pub termination: Termination,
    pub wall_time_s: f64,
}

/// Uniform draw in `[-pi, pi]` per parameter.
pub fn initial_theta(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-PI..=PI)).collect()
}

/// Minimizes the training loss from a seeded random start. The optimizer
/// draws its own randomness from `seed + 1`.
pub fn train(model: &VqcModel, x: &[Vec<f64>], y: &[u8], optimizer: &OptimizerConfig, seed: u64) -> Result<TrainRecord> {
    let start = Instant::now();
    let objective = LossObjective { model, data: EncodedData::new(model, x, y)? };
    let theta0 = initial_theta(model.n_parameters(), seed);
    let initial_loss = objective.evaluate(&theta0);
    if !initial_loss.is_finite() {
        return Err(Error::Divergence { trace: vec![initial_loss] });
    }
    if optimizer.budget == 0 {
        return Ok(TrainRecord {
            loss_trace: vec![initial_loss],
            best_theta: theta0.clone(),
            initial_theta: theta0,
            initial_loss,
            best_loss: initial_loss,
            evaluations: 1,
            termination: Termination::Budget,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    let result = match minimize(&objective, &theta0, optimizer, split_seed(seed, 1)) {
        Ok(r) => r,
        Err(Error::NonFiniteObjective) => return Err(Error::Divergence { trace: vec![initial_loss] }),
        Err(e) => return Err(e),
    };
    let mut loss_trace = vec![initial_loss];
    loss_trace.extend(&result.trace);
    if !result.best_value.is_finite() || loss_trace.iter().any(|v| v.is_nan()) {
        return Err(Error::Divergence { trace: loss_trace });
    }
    let (best_theta, best_loss) = if result.best_value <= initial_loss {
        (result.best_x, result.best_value)
    } else {
        (theta0.clone(), initial_loss)
    };
    Ok(TrainRecord {
        loss_trace,
        initial_theta: theta0,
        best_theta,
        initial_loss,
        best_loss,
        evaluations: result.evaluations + 1,
        termination: result.termination,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `run_id,iteration,loss`; iteration 0 is the initial loss.
pub fn write_convergence_csv<W: Write>(runs: &[(String, &TrainRecord)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "iteration", "loss"])?;
    for (id, rec) in runs {
        for (i, v) in rec.loss_trace.iter().enumerate() {
            w.write_record([id.clone(), i.to_string(), fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_examples() {
        assert_eq!(parity(0b0000), 0);
        assert_eq!(parity(0b0001), 1);
        assert_eq!(parity(0b1111), 0);
        assert_eq!(parity_of_bits(&[1, 1, 1, 1]), 0);
        assert_eq!(parity_of_bits(&[0, 0, 0, 1]), 1);
    }

    #[test]
    fn bce_examples() {
        assert!(binary_cross_entropy(1.0, 1) < 1e-11);
        assert!((binary_cross_entropy(0.5, 0) - 2f64.ln()).abs() < 1e-15);
        assert!(binary_cross_entropy(0.0, 1).is_finite());
    }

    #[test]
    fn rejects_mismatched_specs() {
        let r = VqcModel::new(
            FeatureMapSpec::new(4, 1),
            AnsatzSpec::real_amplitudes(3, 3),
            NoiseModel::noiseless(),
            EvalMode::Exact,
        );
        assert!(matches!(r, Err(Error::QubitCountMismatch { .. })));
    }

    #[test]
    fn initial_theta_is_seeded_and_bounded() {
        let a = initial_theta(32, 4);
        assert_eq!(a, initial_theta(32, 4));
        assert_ne!(a, initial_theta(32, 5));
        assert!(a.iter().all(|v| (-PI..=PI).contains(v)));
    }
}
