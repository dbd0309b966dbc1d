//! Feature map and ansatz constructions.
//!
//! Parameter ordering for both ansätze is layer-major, then qubit, then
//! rotation axis: `theta[layer * n_qubits * k + qubit * k + axis]` with `k`
//! rotations per qubit per layer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::qsim::{Angle, Circuit, Gate, GateKind, Symbol};
use crate::{Error, Result};

/// How the pairwise phase of the ZZ feature map depends on the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairPhase {
    /// `phi(a, b) = a * b`.
    #[default]
    Product,
    /// `phi(a, b) = (pi - a)(pi - b)`.
    PiShiftedProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub n_features: usize,
    pub reps: usize,
    pub pair_phase: PairPhase,
}

impl FeatureMapSpec {
    pub fn new(n_features: usize, reps: usize) -> Self {
        Self { n_features, reps, pair_phase: PairPhase::Product }
    }

    fn validate(&self) -> Result<()> {
        if self.n_features < 2 || self.reps < 1 {
            return Err(Error::Config(format!(
                "feature map needs n_features >= 2 and reps >= 1 (got {}, {})",
                self.n_features, self.reps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnsatzFamily {
    RealAmplitudes,
    EfficientSU2,
}

impl AnsatzFamily {
    pub fn short_name(self) -> &'static str {
        match self {
            AnsatzFamily::RealAmplitudes => "RA",
            AnsatzFamily::EfficientSU2 => "ESU2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub family: AnsatzFamily,
    pub n_qubits: usize,
    pub reps: usize,
    /// Rotation pair used by EfficientSU2; ignored for RealAmplitudes.
    pub su2_rotations: (GateKind, GateKind),
    pub entanglement: Entanglement,
}

/// Nearest-neighbour CNOT chain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Entanglement {
    /// `CNOT(0,1), CNOT(1,2), ...`
    Linear,
    /// `..., CNOT(1,2), CNOT(0,1)`
    #[default]
    ReverseLinear,
}

impl AnsatzSpec {
    pub fn real_amplitudes(n_qubits: usize, reps: usize) -> Self {
        Self {
            family: AnsatzFamily::RealAmplitudes,
            n_qubits,
            reps,
            su2_rotations: (GateKind::RY, GateKind::RZ),
            entanglement: Entanglement::default(),
        }
    }

    pub fn efficient_su2(n_qubits: usize, reps: usize) -> Self {
        Self { family: AnsatzFamily::EfficientSU2, ..Self::real_amplitudes(n_qubits, reps) }
    }

    pub fn rotations(&self) -> Vec<GateKind> {
        match self.family {
            AnsatzFamily::RealAmplitudes => vec![GateKind::RY],
            AnsatzFamily::EfficientSU2 => vec![self.su2_rotations.0, self.su2_rotations.1],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.rotations().len() * self.n_qubits * (self.reps + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.n_qubits < 1 {
            return Err(Error::Config("ansatz needs at least one qubit".into()));
        }
        let rotation = |k: GateKind| matches!(k, GateKind::RX | GateKind::RY | GateKind::RZ);
        if !rotation(self.su2_rotations.0) || !rotation(self.su2_rotations.1) {
            return Err(Error::Config("EfficientSU2 rotations must be RX, RY or RZ".into()));
        }
        Ok(())
    }
}

/// Per rep: `H` on every qubit, `P(2 x_i)` on qubit `i`, then for each pair
/// `i < j` in lexicographic order `CNOT(i,j) P(2 phi(x_i,x_j)) CNOT(i,j)`.
pub fn build_feature_map(spec: &FeatureMapSpec) -> Result<Circuit> {
    spec.validate()?;
    let n = spec.n_features;
    let shift = match spec.pair_phase {
        PairPhase::Product => 0.0,
        PairPhase::PiShiftedProduct => PI,
    };
    let mut c = Circuit::new(n);
    for _ in 0..spec.reps {
        for q in 0..n {
            c.push(Gate::h(q))?;
        }
        for q in 0..n {
            c.push(Gate::rotation(GateKind::P, q, Angle::Linear { symbol: Symbol::data(q), scale: 2.0 }))?;
        }
        for i in 0..n {
            for j in i + 1..n {
                c.push(Gate::cnot(i, j))?;
                c.push(Gate::rotation(
                    GateKind::P,
                    j,
                    Angle::Product { a: Symbol::data(i), b: Symbol::data(j), scale: 2.0, shift },
                ))?;
                c.push(Gate::cnot(i, j))?;
            }
        }
    }
    Ok(c)
}

/// Rotation layer, then `reps` x (nearest-neighbour CNOT chain, rotation layer).
pub fn build_ansatz(spec: &AnsatzSpec) -> Result<Circuit> {
    spec.validate()?;
    let n = spec.n_qubits;
    let rotations = spec.rotations();
    let mut c = Circuit::new(n);
    let mut next = 0usize;
    let mut rotation_layer = |c: &mut Circuit| -> Result<()> {
        for q in 0..n {
            for &kind in &rotations {
                c.push(Gate::rotation(kind, q, Angle::Linear { symbol: Symbol::theta(next), scale: 1.0 }))?;
                next += 1;
            }
        }
        Ok(())
    };
    rotation_layer(&mut c)?;
    for _ in 0..spec.reps {
        let pairs: Vec<usize> = match spec.entanglement {
            Entanglement::Linear => (0..n.saturating_sub(1)).collect(),
            Entanglement::ReverseLinear => (0..n.saturating_sub(1)).rev().collect(),
        };
        for q in pairs {
            c.push(Gate::cnot(q, q + 1))?;
        }
        rotation_layer(&mut c)?;
    }
    Ok(c)
}

pub fn compose(feature_map: &Circuit, ansatz: &Circuit) -> Result<Circuit> {
    feature_map.compose(ansatz)
}
