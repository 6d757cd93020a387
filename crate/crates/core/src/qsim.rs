//! Dense statevector engine for the trapped-ion native gate set.
//!
//! Qubit 0 is the leftmost character of every bitstring. Internally qubit `q`
//! of an `n`-qubit register lives at bit `n - 1 - q` of the amplitude index, so
//! the binary expansion of an index reads exactly like its bitstring.
//!
//! Native gates:
//!
//! ```text
//! R_phi(theta) = exp(-i theta/2 (cos phi X + sin phi Y))
//! R_z(theta)   = exp(-i theta/2 Z)
//! XX(theta)    = exp(+i theta X(x)X)
//! ```

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the engine accepts (a thirteen-ion chain).
pub const MAX_QUBITS: usize = 13;

/// Largest register `unitary_equivalent` will build full matrices for.
pub const MAX_UNITARY_QUBITS: usize = 6;

const NORM_TOL: f64 = 1e-9;

/// A measured computational-basis string, qubit 0 first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn new(bits: Vec<bool>) -> Self {
        Bitstring(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Bitstring(vec![false; len])
    }

    /// Decode an amplitude index of an `n`-qubit register.
    pub fn from_index(index: usize, n: usize) -> Self {
        Bitstring((0..n).map(|q| (index >> (n - 1 - q)) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// True when the number of ones is even.
    pub fn even_parity(&self) -> bool {
        self.count_ones() % 2 == 0
    }

    /// Sub-string `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Bitstring {
        Bitstring(self.0[start..start + len].to_vec())
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Bitstring>) -> Bitstring {
        Bitstring(parts.into_iter().flat_map(|b| b.0.iter().copied()).collect())
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstring({self})")
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Level {
    Logical,
    Native,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Logical => "LOGICAL",
            Level::Native => "NATIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    RPhi,
    Rz,
    Xx,
    H,
    Cnot,
    Z,
    X,
    Y,
}

impl GateKind {
    pub fn level(self) -> Level {
        match self {
            GateKind::RPhi | GateKind::Rz | GateKind::Xx => Level::Native,
            _ => Level::Logical,
        }
    }

    pub fn is_pauli(self) -> bool {
        matches!(self, GateKind::X | GateKind::Y | GateKind::Z)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RPhi => "R_PHI",
            GateKind::Rz => "R_Z",
            GateKind::Xx => "XX",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Z => "Z",
            GateKind::X => "X",
            GateKind::Y => "Y",
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "R_PHI" => GateKind::RPhi,
            "R_Z" => GateKind::Rz,
            "XX" => GateKind::Xx,
            "H" => GateKind::H,
            "CNOT" => GateKind::Cnot,
            "Z" => GateKind::Z,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            other => return Err(Error::UnsupportedGate(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    RPhi { q: usize, theta: f64, phi: f64 },
    Rz { q: usize, theta: f64 },
    Xx { a: usize, b: usize, theta: f64 },
    H(usize),
    Cnot { control: usize, target: usize },
    Z(usize),
    X(usize),
    Y(usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::RPhi { .. } => GateKind::RPhi,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Xx { .. } => GateKind::Xx,
            Gate::H(_) => GateKind::H,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Z(_) => GateKind::Z,
            Gate::X(_) => GateKind::X,
            Gate::Y(_) => GateKind::Y,
        }
    }

    /// Target qubits in gate order (control first for CNOT).
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::Xx { a, b, .. } => vec![a, b],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::RPhi { q, .. } | Gate::Rz { q, .. } | Gate::H(q) | Gate::Z(q) | Gate::X(q) | Gate::Y(q) => vec![q],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Xx { .. } | Gate::Cnot { .. } => 2,
            _ => 1,
        }
    }

    /// Rotation angle; zero for fixed gates.
    pub fn theta(&self) -> f64 {
        match *self {
            Gate::RPhi { theta, .. } | Gate::Rz { theta, .. } | Gate::Xx { theta, .. } => theta,
            _ => 0.0,
        }
    }

    /// Rotation axis angle; zero for everything but R_PHI.
    pub fn phi(&self) -> f64 {
        match *self {
            Gate::RPhi { phi, .. } => phi,
            _ => 0.0,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let targets = self.targets();
        for &t in &targets {
            if t >= n_qubits {
                return Err(Error::QubitIndex { index: t, n_qubits });
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Parameter(format!(
                "{} needs two distinct targets, got {} twice",
                self.kind().name(),
                targets[0]
            )));
        }
        Ok(())
    }
}

/// Ordered gate list at a single abstraction level.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    level: Level,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, level: Level) -> Self {
        Circuit {
            n_qubits,
            level,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n_qubits: usize, level: Level, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits, level);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    /// Append a gate, checking its targets and level.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if gate.kind().level() != self.level {
            return Err(Error::Level {
                expected: self.level.to_string(),
                found: format!("{} gate {}", gate.kind().level(), gate.kind().name()),
            });
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn level(&self) -> Level {
        self.level
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
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size {
                n_qubits,
                max: MAX_QUBITS,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Parameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    /// Build from raw amplitudes; they must already be normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Parameter(format!("amplitude count {dim} is not a power of two")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size {
                n_qubits,
                max: MAX_QUBITS,
            });
        }
        let sv = Statevector { n_qubits, amplitudes };
        let norm = sv.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!("state norm {norm} is not 1")));
        }
        Ok(sv)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, bits: &Bitstring) -> Complex64 {
        self.amplitudes[bits.to_index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// |<self|other>|^2.
    pub fn overlap(&self, other: &Statevector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check(&self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)
    }

    /// Apply a native gate or a Pauli. H and CNOT are rejected; compile them
    /// first or go through [`Statevector::apply_gate_ideal`].
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let kind = gate.kind();
        if kind.level() == Level::Logical && !kind.is_pauli() {
            return Err(Error::UnsupportedGate(kind.name().to_string()));
        }
        self.apply_gate_ideal(gate)
    }

    /// Apply any gate kind, including the logical-level H and CNOT. Used for
    /// reference simulations and for building unitaries.
    pub fn apply_gate_ideal(&mut self, gate: &Gate) -> Result<()> {
        self.check(gate)?;
        match *gate {
            Gate::RPhi { q, theta, phi } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let off = Complex64::new(0.0, -s);
                let m01 = off * Complex64::from_polar(1.0, -phi);
                let m10 = off * Complex64::from_polar(1.0, phi);
                let cc = Complex64::new(c, 0.0);
                self.apply_1q(q, [[cc, m01], [m10, cc]]);
            }
            Gate::Rz { q, theta } => {
                let lo = Complex64::from_polar(1.0, -theta / 2.0);
                let hi = Complex64::from_polar(1.0, theta / 2.0);
                self.apply_diag(q, lo, hi);
            }
            Gate::Xx { a, b, theta } => self.apply_xx(a, b, theta),
            Gate::H(q) => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.apply_1q(q, [[h, h], [h, -h]]);
            }
            Gate::Cnot { control, target } => {
                let cm = self.mask(control);
                let tm = self.mask(target);
                for i in 0..self.amplitudes.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amplitudes.swap(i, i | tm);
                    }
                }
            }
            Gate::X(q) => self.apply_x(q),
            Gate::Y(q) => {
                let m = self.mask(q);
                let i = Complex64::i();
                for k in 0..self.amplitudes.len() {
                    if k & m == 0 {
                        let a0 = self.amplitudes[k];
                        let a1 = self.amplitudes[k | m];
                        self.amplitudes[k] = -i * a1;
                        self.amplitudes[k | m] = i * a0;
                    }
                }
            }
            Gate::Z(q) => self.apply_diag(q, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)),
        }
        debug_assert!((self.norm_sqr() - 1.0).abs() < NORM_TOL, "norm drifted after {gate:?}");
        Ok(())
    }

    /// Run every gate of `circuit` in order, whatever its level.
    pub fn run_ideal(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(Error::Parameter(format!(
                "circuit has {} qubits, state has {}",
                circuit.n_qubits(),
                self.n_qubits
            )));
        }
        for g in circuit.gates() {
            self.apply_gate_ideal(g)?;
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        let m = self.mask(q);
        for k in 0..self.amplitudes.len() {
            if k & m == 0 {
                let a0 = self.amplitudes[k];
                let a1 = self.amplitudes[k | m];
                self.amplitudes[k] = u[0][0] * a0 + u[0][1] * a1;
                self.amplitudes[k | m] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }

    fn apply_diag(&mut self, q: usize, lo: Complex64, hi: Complex64) {
        let m = self.mask(q);
        for (k, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if k & m == 0 { lo } else { hi };
        }
    }

    fn apply_x(&mut self, q: usize) {
        let m = self.mask(q);
        for k in 0..self.amplitudes.len() {
            if k & m == 0 {
                self.amplitudes.swap(k, k | m);
            }
        }
    }

    // exp(i theta XX) = cos(theta) I + i sin(theta) XX; XX maps |x> to |x ^ mask>.
    fn apply_xx(&mut self, a: usize, b: usize, theta: f64) {
        let ma = self.mask(a);
        let both = ma | self.mask(b);
        let (s, c) = theta.sin_cos();
        let is = Complex64::new(0.0, s);
        for k in 0..self.amplitudes.len() {
            if k & ma == 0 {
                let j = k ^ both;
                let ak = self.amplitudes[k];
                let aj = self.amplitudes[j];
                self.amplitudes[k] = c * ak + is * aj;
                self.amplitudes[j] = c * aj + is * ak;
            }
        }
    }
}

/// Exact Born-rule probabilities over all `2^n` bitstrings.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    n_qubits: usize,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    /// Build from a dense probability vector indexed like amplitudes.
    pub fn from_dense(probabilities: Vec<f64>) -> Result<Self> {
        let dim = probabilities.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "probability count {dim} is not a power of two"
            )));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Parameter("negative or NaN probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!("probabilities sum to {total}")));
        }
        Ok(OutcomeDistribution {
            n_qubits: dim.trailing_zeros() as usize,
            probabilities,
        })
    }

    /// Empirical distribution of a list of equal-length bitstrings.
    pub fn from_counts<'a>(n_qubits: usize, shots: impl IntoIterator<Item = &'a Bitstring>) -> Result<Self> {
        let mut counts = vec![0u64; 1 << n_qubits];
        let mut total = 0u64;
        for s in shots {
            if s.len() != n_qubits {
                return Err(Error::Parameter(format!(
                    "shot {s} has length {}, expected {n_qubits}",
                    s.len()
                )));
            }
            counts[s.to_index()] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::InsufficientData("no shots".into()));
        }
        Self::from_dense(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn prob(&self, bits: &Bitstring) -> f64 {
        self.probabilities[bits.to_index()]
    }

    pub fn dense(&self) -> &[f64] {
        &self.probabilities
    }

    /// Non-zero entries in index order.
    pub fn iter(&self) -> impl Iterator<Item = (Bitstring, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (Bitstring::from_index(i, self.n_qubits), p))
    }

    /// Expectation of a product of Z operators on `qubits`.
    pub fn z_parity_expectation(&self, qubits: &[usize]) -> f64 {
        let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << (self.n_qubits - 1 - q)));
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| if (i & mask).count_ones() % 2 == 0 { p } else { -p })
            .sum()
    }
}

pub fn outcome_distribution(state: &Statevector) -> OutcomeDistribution {
    OutcomeDistribution {
        n_qubits: state.n_qubits,
        probabilities: state.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Draw an index from a dense probability vector with a single uniform draw.
pub(crate) fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_nonzero = i;
            if u < acc {
                return i;
            }
        }
    }
    // u landed in the rounding slack above the accumulated total
    last_nonzero
}

/// Projective measurement of every qubit in the computational basis.
pub fn sample_measurement<R: Rng + ?Sized>(state: &Statevector, rng: &mut R) -> Bitstring {
    let probs: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    Bitstring::from_index(sample_index(&probs, rng), state.n_qubits)
}

/// Full unitary of `circuit` as column vectors (column j = U|j>).
pub fn circuit_unitary(circuit: &Circuit) -> Result<Vec<Vec<Complex64>>> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(Error::Size {
            n_qubits: n,
            max: MAX_UNITARY_QUBITS,
        });
    }
    (0..1usize << n)
        .map(|j| {
            let mut sv = Statevector::basis(n, j)?;
            sv.run_ideal(circuit)?;
            Ok(sv.amplitudes)
        })
        .collect()
}

/// Whether two circuits implement the same unitary up to one global phase.
pub fn unitary_equivalent(a: &Circuit, b: &Circuit, tol: f64) -> Result<bool> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::Parameter(format!(
            "qubit counts differ: {} vs {}",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let ua = circuit_unitary(a)?;
    let ub = circuit_unitary(b)?;
    Ok(matrices_equal_up_to_phase(&ua, &ub, tol))
}

pub(crate) fn matrices_equal_up_to_phase(ua: &[Vec<Complex64>], ub: &[Vec<Complex64>], tol: f64) -> bool {
    // Fix the phase on the largest entry of `ua`.
    let (mut best, mut pivot) = (0.0, (0, 0));
    for (j, col) in ua.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            if v.norm() > best {
                best = v.norm();
                pivot = (j, i);
            }
        }
    }
    if best == 0.0 {
        return false;
    }
    let ratio = ub[pivot.0][pivot.1] / ua[pivot.0][pivot.1];
    if (ratio.norm() - 1.0).abs() > tol {
        return false;
    }
    let phase = ratio / ratio.norm();
    ua.iter()
        .zip(ub)
        .all(|(ca, cb)| ca.iter().zip(cb).all(|(x, y)| (phase * x - y).norm() <= tol))
}
