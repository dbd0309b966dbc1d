//! Desk-scale pipeline for predicting anastomotic leak with a noise-simulated
//! variational quantum classifier, benchmarked against classical models.
//!
//! The crate is organised bottom-up:
//!
//! - [`qsim`]: statevector / density-matrix simulation with a depolarizing
//!   noise model, shot sampling and structural circuit analysis.
//! - [`circuits`]: the ZZ feature map and the RealAmplitudes / EfficientSU2
//!   ansätze.
//! - [`vqc`]: parity-decoded classifier, cross-entropy loss and training.
//! - [`optim`]: CMA-ES, SPSA, COBYLA, BFGS and SLSQP minimizers.
//! - [`baselines`]: classical classifiers and the nested grid search.
//! - [`metrics`]: discrimination, calibration and threshold selection.
//! - [`stats`]: contingency tests, logistic regression inference.
//! - [`importance`]: permutation and gradient feature importance.
//! - [`cohort`]: records, CSV I/O, the synthetic cohort generator, folds.
//! - [`runner`]: configuration and the end-to-end commands of the CLI.

pub mod baselines;
pub mod circuits;
pub mod cohort;
mod error;
pub mod importance;
pub mod metrics;
pub mod optim;
pub mod qsim;
pub mod runner;
pub mod stats;
pub mod vqc;

pub use error::{Error, Result};

/// A fitted model that maps a feature vector to the probability of class 1.
pub trait ProbabilityModel: Sync {
    fn n_features(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Result<f64>;

    fn predict_proba_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict_proba(x)).collect()
    }
}
