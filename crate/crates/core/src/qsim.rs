//! Small-n quantum circuit simulation.
//!
//! Two evaluation modes share one gate model:
//!
//! - exact: the density matrix is evolved gate by gate, with the depolarizing
//!   channel applied after every single-qubit gate;
//! - trajectory: each shot evolves a statevector and, after every single-qubit
//!   gate, inserts `I`, `X`, `Y` or `Z` with probabilities
//!   `(1 - p, p/3, p/3, p/3)` before sampling one basis outcome.
//!
//! Basis index bit `q` holds qubit `q` (qubit 0 is the least significant bit).
//! Bitstrings are printed with qubit 0 rightmost.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used for state invariants (norm, trace, hermiticity).
pub const STATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    P,
    RX,
    RY,
    RZ,
    CNOT,
}

impl GateKind {
    pub fn is_single_qubit(self) -> bool {
        !matches!(self, GateKind::CNOT)
    }

    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::P | GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::P => "P",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CNOT => "CNOT",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    /// Input feature `x[i]`.
    Data,
    /// Variational parameter `theta[i]`.
    Theta,
}

/// A named parameter slot referenced by gate angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub kind: SymbolKind,
    pub index: usize,
}

impl Symbol {
    pub fn data(index: usize) -> Self {
        Self { kind: SymbolKind::Data, index }
    }

    pub fn theta(index: usize) -> Self {
        Self { kind: SymbolKind::Theta, index }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SymbolKind::Data => write!(f, "x[{}]", self.index),
            SymbolKind::Theta => write!(f, "theta[{}]", self.index),
        }
    }
}

/// Values for the data and variational slots of a circuit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub data: &'a [f64],
    pub theta: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub const NONE: Bindings<'static> = Bindings { data: &[], theta: &[] };

    pub fn new(data: &'a [f64], theta: &'a [f64]) -> Self {
        Self { data, theta }
    }

    fn get(&self, symbol: Symbol) -> Option<f64> {
        match symbol.kind {
            SymbolKind::Data => self.data.get(symbol.index).copied(),
            SymbolKind::Theta => self.theta.get(symbol.index).copied(),
        }
    }
}

/// A gate angle: a constant, an affine function of one slot, or the
/// pairwise feature-map product `scale * (shift - a) * (shift - b)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Linear { symbol: Symbol, scale: f64 },
    Product { a: Symbol, b: Symbol, scale: f64, shift: f64 },
    /// A bound value that remembers the expression it came from.
    Bound { value: f64, expr: Box<Angle> },
}

impl Angle {
    pub fn symbols(&self) -> Vec<Symbol> {
        match self {
            Angle::Fixed(_) | Angle::Bound { .. } => Vec::new(),
            Angle::Linear { symbol, .. } => vec![*symbol],
            Angle::Product { a, b, .. } => vec![*a, *b],
        }
    }

    pub fn resolve(&self, bindings: &Bindings<'_>) -> Option<f64> {
        match self {
            Angle::Fixed(v) | Angle::Bound { value: v, .. } => Some(*v),
            Angle::Linear { symbol, scale } => bindings.get(*symbol).map(|v| scale * v),
            Angle::Product { a, b, scale, shift } => {
                let va = bindings.get(*a)?;
                let vb = bindings.get(*b)?;
                Some(scale * (shift - va) * (shift - vb))
            }
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Fixed(v) | Angle::Bound { value: v, .. } => write!(f, "{v:.6}"),
            Angle::Linear { symbol, scale } if *scale == 1.0 => write!(f, "{symbol}"),
            Angle::Linear { symbol, scale } => write!(f, "{scale}*{symbol}"),
            Angle::Product { a, b, scale, shift } if *shift == 0.0 => {
                write!(f, "{scale}*{a}*{b}")
            }
            Angle::Product { a, b, scale, .. } => write!(f, "{scale}*(pi-{a})*(pi-{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Self { kind: GateKind::H, target, control: None, angle: None }
    }

    pub fn rotation(kind: GateKind, target: usize, angle: Angle) -> Self {
        debug_assert!(kind.is_parameterized());
        Self { kind, target, control: None, angle: Some(angle) }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::CNOT, target, control: Some(control), angle: None }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.control.into_iter().chain(std::iter::once(self.target))
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if self.control == Some(self.target) {
            return Err(Error::ControlEqualsTarget(self.target));
        }
        Ok(())
    }

    /// The 2x2 unitary of a single-qubit gate after resolving its angle.
    pub fn matrix(&self, bindings: &Bindings<'_>, index: usize) -> Result<Mat2> {
        let theta = match &self.angle {
            None => 0.0,
            Some(angle) => angle.resolve(bindings).ok_or_else(|| Error::UnboundParameter {
                gate: index,
                symbol: angle.symbols().iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            })?,
        };
        Ok(single_qubit_matrix(self.kind, theta))
    }
}

pub fn single_qubit_matrix(kind: GateKind, theta: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match kind {
        GateKind::H => {
            let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [[r, r], [r, -r]]
        }
        GateKind::P => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, theta)]],
        GateKind::RX => [[c.into(), -I * s], [-I * s, c.into()]],
        GateKind::RY => [[c.into(), (-s).into()], [s.into(), c.into()]],
        GateKind::RZ => [
            [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
        ],
        GateKind::CNOT => panic!("CNOT has no single-qubit matrix"),
    }
}

pub fn pauli_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Mat2 {
    [[ZERO, -I], [I, ZERO]]
}

pub fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

pub fn identity2() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// Ordered gate list over a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    /// Concatenates `other` after `self`; slots of both are preserved.
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Ok(Circuit { n_qubits: self.n_qubits, gates })
    }

    /// `(gate index, symbol)` for every unbound slot, in gate order.
    pub fn parameter_slots(&self) -> Vec<(usize, Symbol)> {
        self.gates
            .iter()
            .enumerate()
            .flat_map(|(i, g)| {
                g.angle.iter().flat_map(Angle::symbols).map(move |s| (i, s))
            })
            .collect()
    }

    /// Number of distinct slots of the given kind (highest index + 1).
    pub fn slot_count(&self, kind: SymbolKind) -> usize {
        self.parameter_slots()
            .iter()
            .filter(|(_, s)| s.kind == kind)
            .map(|(_, s)| s.index + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_bound(&self) -> bool {
        self.parameter_slots().is_empty()
    }

    /// Replaces every resolvable slot expression with its value. Slots whose
    /// symbols are absent from `bindings` stay unbound.
    pub fn bind(&self, bindings: &Bindings<'_>) -> Circuit {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let angle = g.angle.as_ref().map(|a| match a.resolve(bindings) {
                    Some(value) if !matches!(a, Angle::Fixed(_) | Angle::Bound { .. }) => {
                        Angle::Bound { value, expr: Box::new(a.clone()) }
                    }
                    _ => a.clone(),
                });
                Gate { angle, ..g.clone() }
            })
            .collect();
        Circuit { n_qubits: self.n_qubits, gates }
    }

    /// Restores the slot expressions replaced by [`Circuit::bind`].
    pub fn unbind(&self) -> Circuit {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let angle = g.angle.as_ref().map(|a| match a {
                    Angle::Bound { expr, .. } => (**expr).clone(),
                    other => other.clone(),
                });
                Gate { angle, ..g.clone() }
            })
            .collect();
        Circuit { n_qubits: self.n_qubits, gates }
    }

    /// Text listing `index kind qubits angle-or-slot`, one gate per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.gates.iter().enumerate() {
            let qubits = g.qubits().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
            let angle = g.angle.as_ref().map_or_else(|| "-".to_string(), ToString::to_string);
            out.push_str(&format!("{i} {} {qubits} {angle}\n", g.kind));
        }
        out
    }
}

/// Longest path through the gate dependency DAG with unit gate cost: gates on
/// disjoint qubits may share a time step.
pub fn circuit_depth(circuit: &Circuit) -> usize {
    let mut frontier = vec![0usize; circuit.n_qubits()];
    for gate in circuit.gates() {
        let level = gate.qubits().map(|q| frontier[q]).max().unwrap_or(0) + 1;
        for q in gate.qubits() {
            frontier[q] = level;
        }
    }
    frontier.into_iter().max().unwrap_or(0)
}

pub fn gate_census(circuit: &Circuit) -> BTreeMap<GateKind, usize> {
    let mut census = BTreeMap::new();
    for g in circuit.gates() {
        *census.entry(g.kind).or_insert(0) += 1;
    }
    census
}

/// Single-qubit depolarizing noise applied after every single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_gate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p_gate: 0.05 }
    }
}

impl NoiseModel {
    pub fn new(p_gate: f64) -> Result<Self> {
        check_probability(p_gate)?;
        Ok(Self { p_gate })
    }

    pub fn noiseless() -> Self {
        Self { p_gate: 0.0 }
    }

    /// `{sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z}`.
    pub fn kraus_operators(&self) -> [Mat2; 4] {
        depolarizing_kraus(self.p_gate)
    }
}

pub fn depolarizing_kraus(p: f64) -> [Mat2; 4] {
    let scale = |m: Mat2, s: f64| m.map(|row| row.map(|z| z * s));
    let a = (1.0 - p).sqrt();
    let b = (p / 3.0).sqrt();
    [scale(identity2(), a), scale(pauli_x(), b), scale(pauli_y(), b), scale(pauli_z(), b)]
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Standard error of a probability estimated from `shots` samples.
pub fn shot_standard_error(p: f64, shots: u64) -> f64 {
    (p * (1.0 - p) / shots as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n_qubits || amps.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, actual: amps.len() });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    pub fn apply_single(&mut self, qubit: usize, u: &Mat2) {
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[i | bit] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if r < acc {
                return i;
            }
        }
        // Rounding can leave acc slightly below 1.
        self.amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
    }
}

/// Row-major `2^n x 2^n` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|0...0><0...0|`.
    pub fn zero(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = ONE;
        Self { n_qubits, dim, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Self { n_qubits, dim, data }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let dim = state.amps.len();
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = state.amps[i] * state.amps[j].conj();
            }
        }
        Self { n_qubits: state.n_qubits, dim, data }
    }

    /// Builds a density matrix from row-major entries; checks only the shape.
    pub fn from_entries(n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = 1 << n_qubits;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: data.len() });
        }
        Ok(Self { n_qubits, dim, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += (self.get(i, j) * self.get(j, i)).re;
            }
        }
        acc
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j));
        m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    /// `rho -> U rho U^dagger` for a 2x2 operator on `qubit`.
    pub fn apply_single(&mut self, qubit: usize, u: &Mat2) {
        self.left_multiply(qubit, u);
        self.right_multiply_adjoint(qubit, u);
    }

    fn left_multiply(&mut self, qubit: usize, u: &Mat2) {
        let bit = 1 << qubit;
        let dim = self.dim;
        for i in (0..dim).filter(|i| i & bit == 0) {
            let (r0, r1) = (i * dim, (i | bit) * dim);
            for c in 0..dim {
                let (a, b) = (self.data[r0 + c], self.data[r1 + c]);
                self.data[r0 + c] = u[0][0] * a + u[0][1] * b;
                self.data[r1 + c] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    fn right_multiply_adjoint(&mut self, qubit: usize, u: &Mat2) {
        let bit = 1 << qubit;
        let dim = self.dim;
        let (c00, c01, c10, c11) = (u[0][0].conj(), u[0][1].conj(), u[1][0].conj(), u[1][1].conj());
        for r in 0..dim {
            let row = r * dim;
            for j in (0..dim).filter(|j| j & bit == 0) {
                let (a, b) = (self.data[row + j], self.data[row + (j | bit)]);
                self.data[row + j] = a * c00 + b * c01;
                self.data[row + (j | bit)] = a * c10 + b * c11;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1 << control, 1 << target);
        let dim = self.dim;
        for i in (0..dim).filter(|i| i & cb != 0 && i & tb == 0) {
            for c in 0..dim {
                self.data.swap(i * dim + c, (i | tb) * dim + c);
            }
        }
        for r in 0..dim {
            for j in (0..dim).filter(|j| j & cb != 0 && j & tb == 0) {
                self.data.swap(r * dim + j, r * dim + (j | tb));
            }
        }
    }

    /// `rho -> sum_k K rho K^dagger` for single-qubit Kraus operators.
    pub fn apply_kraus(&mut self, qubit: usize, ops: &[Mat2]) {
        let mut acc = vec![ZERO; self.data.len()];
        for k in ops {
            let mut term = self.clone();
            term.apply_single(qubit, k);
            for (a, t) in acc.iter_mut().zip(&term.data) {
                *a += t;
            }
        }
        self.data = acc;
    }

    /// `rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)` on `qubit`.
    pub fn depolarize(&mut self, qubit: usize, p: f64) -> Result<()> {
        check_probability(p)?;
        if p == 0.0 {
            return Ok(());
        }
        let bit = 1 << qubit;
        let dim = self.dim;
        let keep = 1.0 - 2.0 * p / 3.0;
        let swap = 2.0 * p / 3.0;
        let coherence = 1.0 - 4.0 * p / 3.0;
        for i in (0..dim).filter(|i| i & bit == 0) {
            for j in (0..dim).filter(|j| j & bit == 0) {
                let (i1, j1) = (i | bit, j | bit);
                let a = self.data[i * dim + j];
                let d = self.data[i1 * dim + j1];
                self.data[i * dim + j] = a * keep + d * swap;
                self.data[i1 * dim + j1] = d * keep + a * swap;
                self.data[i * dim + j1] *= coherence;
                self.data[i1 * dim + j] *= coherence;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.n_qubits(),
            QuantumState::Mixed(r) => r.n_qubits(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(s) => s.probabilities(),
            QuantumState::Mixed(r) => r.diagonal(),
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate, bindings: &Bindings<'_>) -> Result<()> {
        apply_gate_indexed(self, gate, bindings, 0)
    }

    pub fn apply_depolarizing(&mut self, qubit: usize, p: f64) -> Result<()> {
        match self {
            QuantumState::Mixed(r) => {
                if qubit >= r.n_qubits() {
                    return Err(Error::QubitOutOfRange { index: qubit, n_qubits: r.n_qubits() });
                }
                r.depolarize(qubit, p)
            }
            QuantumState::Pure(_) => Err(Error::RequiresMixedState),
        }
    }
}

fn apply_gate_indexed(
    state: &mut QuantumState,
    gate: &Gate,
    bindings: &Bindings<'_>,
    index: usize,
) -> Result<()> {
    gate.validate(state.n_qubits())?;
    match (gate.kind, state) {
        (GateKind::CNOT, QuantumState::Pure(s)) => s.apply_cnot(gate.control.unwrap(), gate.target),
        (GateKind::CNOT, QuantumState::Mixed(r)) => r.apply_cnot(gate.control.unwrap(), gate.target),
        (_, QuantumState::Pure(s)) => s.apply_single(gate.target, &gate.matrix(bindings, index)?),
        (_, QuantumState::Mixed(r)) => r.apply_single(gate.target, &gate.matrix(bindings, index)?),
    }
    Ok(())
}

/// Evolves `rho` through `circuit` with depolarizing noise after every
/// single-qubit gate.
pub fn evolve_mixed(
    rho: &mut DensityMatrix,
    circuit: &Circuit,
    bindings: &Bindings<'_>,
    noise: &NoiseModel,
) -> Result<()> {
    check_probability(noise.p_gate)?;
    if rho.n_qubits() != circuit.n_qubits() {
        return Err(Error::QubitCountMismatch { left: rho.n_qubits(), right: circuit.n_qubits() });
    }
    for (i, gate) in circuit.gates().iter().enumerate() {
        match gate.kind {
            GateKind::CNOT => rho.apply_cnot(gate.control.unwrap(), gate.target),
            _ => {
                rho.apply_single(gate.target, &gate.matrix(bindings, i)?);
                rho.depolarize(gate.target, noise.p_gate)?;
            }
        }
    }
    Ok(())
}

/// Final density matrix of `circuit` started from `|0...0>`.
pub fn final_density(circuit: &Circuit, bindings: &Bindings<'_>, noise: &NoiseModel) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero(circuit.n_qubits());
    evolve_mixed(&mut rho, circuit, bindings, noise)?;
    Ok(rho)
}

/// Basis-state probabilities (diagonal of the final density matrix).
pub fn run_exact(circuit: &Circuit, bindings: &Bindings<'_>, noise: &NoiseModel) -> Result<Vec<f64>> {
    Ok(final_density(circuit, bindings, noise)?.diagonal())
}

/// Measurement counts over `2^n` outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    n_qubits: usize,
    counts: Vec<u64>,
    shots: u64,
}

impl ShotResult {
    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Dense counts indexed by basis state.
    pub fn dense_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Non-zero counts keyed by bitstring (qubit 0 rightmost).
    pub fn counts(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (bitstring(i, self.n_qubits), *c))
            .collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.shots as f64).collect()
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).rev().map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

/// Trajectory simulation: one noisy statevector evolution per shot.
pub fn run_shots(
    circuit: &Circuit,
    bindings: &Bindings<'_>,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<ShotResult> {
    check_probability(noise.p_gate)?;
    if shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let n = circuit.n_qubits();
    let mut matrices = Vec::with_capacity(circuit.len());
    for (i, g) in circuit.gates().iter().enumerate() {
        g.validate(n)?;
        matrices.push(match g.kind {
            GateKind::CNOT => None,
            _ => Some(g.matrix(bindings, i)?),
        });
    }
    let evolve = |rng: Option<&mut ChaCha8Rng>| {
        let mut rng = rng;
        let mut state = StateVector::zero(n);
        for (g, m) in circuit.gates().iter().zip(&matrices) {
            match m {
                None => state.apply_cnot(g.control.unwrap(), g.target),
                Some(u) => {
                    state.apply_single(g.target, u);
                    if let Some(rng) = rng.as_deref_mut() {
                        let r: f64 = rng.random();
                        if r < noise.p_gate {
                            let pauli = match (3.0 * r / noise.p_gate) as usize {
                                0 => pauli_x(),
                                1 => pauli_y(),
                                _ => pauli_z(),
                            };
                            state.apply_single(g.target, &pauli);
                        }
                    }
                }
            }
        }
        state
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; 1 << n];
    if noise.p_gate == 0.0 {
        let state = evolve(None);
        for _ in 0..shots {
            counts[state.sample(&mut rng)] += 1;
        }
    } else {
        for _ in 0..shots {
            let state = evolve(Some(&mut rng));
            counts[state.sample(&mut rng)] += 1;
        }
    }
    Ok(ShotResult { n_qubits: n, counts, shots })
}

/// Seed for evaluation `index` under a root seed.
pub fn split_seed(root: u64, index: u64) -> u64 {
    root.wrapping_add(index)
}
