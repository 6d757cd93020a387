//! Monte Carlo Pauli-trajectory noise.
//!
//! Each native gate may be followed by a depolarizing fault: a uniformly
//! random non-identity Pauli on its support, with probability `p1` for
//! single-qubit rotations and `p2` for XX gates. R_z is a classical frame
//! update and only faults when `rz_noisy` is set. After the last gate every
//! qubit's readout is flipped independently with probability `p_ro`.
//!
//! All fault draws for a shot happen before any amplitude work, so the
//! cached runner ([`ShotRunner`]) and the direct path ([`run_noisy_shot`])
//! consume the random stream identically and return identical records.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{Basis, Sign};
use crate::error::{Error, Result};
use crate::qsim::{outcome_distribution, sample_index, Bitstring, Circuit, Gate, GateKind, Level, Statevector};
use crate::rng::shot_rng;
use crate::stats::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub p_ro: f64,
    #[serde(default)]
    pub rz_noisy: bool,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, p_ro: f64) -> Result<Self> {
        let model = NoiseModel {
            p1,
            p2,
            p_ro,
            rz_noisy: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            p1: 0.0,
            p2: 0.0,
            p_ro: 0.0,
            rz_noisy: false,
        }
    }

    pub fn with_rz_noisy(mut self, rz_noisy: bool) -> Self {
        self.rz_noisy = rz_noisy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p_ro", self.p_ro)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p_ro == 0.0
    }
}

/// Settings for the nine-qubit direct encoding run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NineQubitNoise {
    pub p1: f64,
    pub p2: f64,
    pub p_ro: f64,
}

/// Calibration file contents. JSON map keys are code sizes written as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub p1: f64,
    pub p2_by_m: BTreeMap<String, f64>,
    pub p_ro: f64,
    /// Per-size readout overrides; falls back to `p_ro`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub p_ro_by_m: BTreeMap<String, f64>,
    #[serde(default)]
    pub rz_noisy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nine_qubit: Option<NineQubitNoise>,
}

fn default_version() -> u32 {
    1
}

/// The calibration shipped with the crate (`config/noise_default.json`).
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../config/noise_default.json");

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::from_json(DEFAULT_CONFIG_JSON).expect("bundled noise config parses")
    }
}

impl NoiseConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: NoiseConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let mut probs = vec![("p1".to_string(), self.p1), ("p_ro".to_string(), self.p_ro)];
        for (tag, map) in [("p2_by_m", &self.p2_by_m), ("p_ro_by_m", &self.p_ro_by_m)] {
            for (k, &v) in map {
                k.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{tag} key {k:?} is not an integer")))?;
                probs.push((format!("{tag}[{k}]"), v));
            }
        }
        if let Some(n) = &self.nine_qubit {
            probs.extend([
                ("nine_qubit.p1".to_string(), n.p1),
                ("nine_qubit.p2".to_string(), n.p2),
                ("nine_qubit.p_ro".to_string(), n.p_ro),
            ]);
        }
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    /// Model for GHZ blocks of size `m`.
    pub fn model_for(&self, m: usize) -> Result<NoiseModel> {
        let key = m.to_string();
        let p2 = *self
            .p2_by_m
            .get(&key)
            .ok_or_else(|| Error::Config(format!("no two-qubit error rate for m = {m}")))?;
        let p_ro = self.p_ro_by_m.get(&key).copied().unwrap_or(self.p_ro);
        Ok(NoiseModel {
            p1: self.p1,
            p2,
            p_ro,
            rz_noisy: self.rz_noisy,
        })
    }

    /// Model for the nine-qubit encoder; defaults to the m = 3 entry.
    pub fn nine_qubit_model(&self) -> Result<NoiseModel> {
        match self.nine_qubit {
            Some(n) => Ok(NoiseModel {
                p1: n.p1,
                p2: n.p2,
                p_ro: n.p_ro,
                rz_noisy: self.rz_noisy,
            }),
            None => self.model_for(3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_index(i: usize) -> Pauli {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][i]
    }

    pub fn gate(self, q: usize) -> Option<Gate> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(Gate::X(q)),
            Pauli::Y => Some(Gate::Y(q)),
            Pauli::Z => Some(Gate::Z(q)),
        }
    }
}

/// Pauli operator aligned with a gate's targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

/// Draw the fault, if any, that follows `gate`.
pub fn sample_fault<R: Rng + ?Sized>(gate: &Gate, model: &NoiseModel, rng: &mut R) -> Option<PauliString> {
    let (p, arity) = match gate.kind() {
        GateKind::Xx | GateKind::Cnot => (model.p2, 2),
        GateKind::Rz if !model.rz_noisy => return None,
        _ => (model.p1, 1),
    };
    if p == 0.0 || rng.gen::<f64>() >= p {
        return None;
    }
    Some(if arity == 1 {
        PauliString(vec![Pauli::from_index(rng.gen_range(1..4))])
    } else {
        let k = rng.gen_range(1..16);
        PauliString(vec![Pauli::from_index(k / 4), Pauli::from_index(k % 4)])
    })
}

/// A fault inserted right after gate `gate_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub gate_index: usize,
    pub pauli: PauliString,
}

/// Reproducibility record for one noisy shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub circuit: Circuit,
    pub faults: Vec<Fault>,
    pub seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        for f in &self.faults {
            let gate = self.circuit.gates().get(f.gate_index).ok_or_else(|| {
                Error::Parameter(format!(
                    "fault references gate {} of {}",
                    f.gate_index,
                    self.circuit.len()
                ))
            })?;
            if gate.arity() != f.pauli.0.len() {
                return Err(Error::Parameter(format!(
                    "fault {} does not match arity of gate {}",
                    f.pauli, f.gate_index
                )));
            }
        }
        Ok(())
    }
}

fn sample_faults<R: Rng + ?Sized>(circuit: &Circuit, model: &NoiseModel, rng: &mut R) -> Vec<Fault> {
    circuit
        .gates()
        .iter()
        .enumerate()
        .filter_map(|(i, g)| sample_fault(g, model, rng).map(|pauli| Fault { gate_index: i, pauli }))
        .collect()
}

fn apply_fault(state: &mut Statevector, gate: &Gate, pauli: &PauliString) -> Result<()> {
    for (q, p) in gate.targets().into_iter().zip(&pauli.0) {
        if let Some(g) = p.gate(q) {
            state.apply_gate(&g)?;
        }
    }
    Ok(())
}

fn apply_readout<R: Rng + ?Sized>(bits: &mut Bitstring, p_ro: f64, rng: &mut R) {
    if p_ro == 0.0 {
        return;
    }
    for q in 0..bits.len() {
        if rng.gen::<f64>() < p_ro {
            bits.flip(q);
        }
    }
}

fn require_native(circuit: &Circuit) -> Result<()> {
    if circuit.level() != Level::Native {
        return Err(Error::Level {
            expected: Level::Native.to_string(),
            found: circuit.level().to_string(),
        });
    }
    Ok(())
}

/// One noisy repetition simulated gate by gate from |0...0>.
pub fn run_noisy_shot<R: Rng + ?Sized>(circuit: &Circuit, model: &NoiseModel, rng: &mut R) -> Result<Bitstring> {
    run_noisy_shot_traced(circuit, model, rng).map(|(bits, _)| bits)
}

/// Like [`run_noisy_shot`] but also returns the faults that were inserted.
pub fn run_noisy_shot_traced<R: Rng + ?Sized>(
    circuit: &Circuit,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<(Bitstring, Vec<Fault>)> {
    require_native(circuit)?;
    let faults = sample_faults(circuit, model, rng);
    let mut state = Statevector::zero(circuit.n_qubits())?;
    let mut next = faults.iter().peekable();
    for (i, g) in circuit.gates().iter().enumerate() {
        state.apply_gate(g)?;
        while let Some(f) = next.next_if(|f| f.gate_index == i) {
            apply_fault(&mut state, g, &f.pauli)?;
        }
    }
    let mut bits = Bitstring::from_index(
        sample_index(outcome_distribution(&state).dense(), rng),
        state.n_qubits(),
    );
    apply_readout(&mut bits, model.p_ro, rng);
    Ok((bits, faults))
}

/// Replays a trajectory: shot `stream` of a batch seeded with `seed`.
pub fn replay(circuit: &Circuit, model: &NoiseModel, seed: u64, stream: u64) -> Result<(Bitstring, Trajectory)> {
    let mut rng = shot_rng(seed, stream);
    let (bits, faults) = run_noisy_shot_traced(circuit, model, &mut rng)?;
    let t = Trajectory {
        circuit: circuit.clone(),
        faults,
        seed,
        stream,
    };
    Ok((bits, t))
}

/// Shot simulator that caches the fault-free state after every gate, so a
/// trajectory only pays for the gates after its first fault.
pub struct ShotRunner<'a> {
    circuit: &'a Circuit,
    model: NoiseModel,
    prefix: Vec<Statevector>,
    ideal_probs: Vec<f64>,
}

impl<'a> ShotRunner<'a> {
    pub fn new(circuit: &'a Circuit, model: NoiseModel) -> Result<Self> {
        require_native(circuit)?;
        model.validate()?;
        let mut state = Statevector::zero(circuit.n_qubits())?;
        let mut prefix = Vec::with_capacity(circuit.len() + 1);
        prefix.push(state.clone());
        for g in circuit.gates() {
            state.apply_gate(g)?;
            prefix.push(state.clone());
        }
        let ideal_probs = outcome_distribution(&state).dense().to_vec();
        Ok(ShotRunner {
            circuit,
            model,
            prefix,
            ideal_probs,
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Bitstring> {
        let faults = sample_faults(self.circuit, &self.model, rng);
        let n = self.circuit.n_qubits();
        let index = match faults.first() {
            None => sample_index(&self.ideal_probs, rng),
            Some(first) => {
                let gates = self.circuit.gates();
                let mut state = self.prefix[first.gate_index + 1].clone();
                let mut next = faults.iter().peekable();
                for (i, g) in gates.iter().enumerate().skip(first.gate_index) {
                    if i > first.gate_index {
                        state.apply_gate(g)?;
                    }
                    while let Some(f) = next.next_if(|f| f.gate_index == i) {
                        apply_fault(&mut state, g, &f.pauli)?;
                    }
                }
                sample_index(outcome_distribution(&state).dense(), rng)
            }
        };
        let mut bits = Bitstring::from_index(index, n);
        apply_readout(&mut bits, self.model.p_ro, rng);
        Ok(bits)
    }
}

/// Batch size, seed and optional thread count for [`run_shots`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchParams {
    pub n_shots: usize,
    pub master_seed: u64,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl BatchParams {
    pub fn new(n_shots: usize, master_seed: u64) -> Self {
        BatchParams {
            n_shots,
            master_seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// `n_shots` independent trajectories; shot i draws from stream `(seed, i)`.
pub fn run_shots(circuit: &Circuit, model: &NoiseModel, params: &BatchParams) -> Result<Vec<Bitstring>> {
    if params.n_shots == 0 {
        return Err(Error::Parameter("n_shots must be >= 1".into()));
    }
    let runner = ShotRunner::new(circuit, *model)?;
    let seed = params.master_seed;
    let work = || -> Result<Vec<Bitstring>> {
        (0..params.n_shots)
            .into_par_iter()
            .map(|i| runner.run(&mut shot_rng(seed, i as u64)))
            .collect()
    };
    match params.threads {
        None => work(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(work),
    }
}

/// Run a batch and label it for the estimators.
pub fn run_batch(
    circuit: &Circuit,
    model: &NoiseModel,
    basis: Basis,
    target_sign: Sign,
    m: usize,
    params: &BatchParams,
) -> Result<SampleSet> {
    let shots = run_shots(circuit, model, params)?;
    SampleSet::new(basis, target_sign, m, shots)
}
