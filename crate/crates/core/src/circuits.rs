//! GHZ preparation, Shor-code encoders, X-basis readout and native compilation.
//!
//! The logical GHZ circuit is the textbook one: H on the first qubit of the
//! block, a CNOT ladder `q0 -> q1 -> ... -> q(m-1)`, and a trailing Z on the
//! first qubit for the minus state. The native circuit is always the
//! gate-by-gate compilation of the logical one, so the two agree exactly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Circuit, Gate, GateKind, Level};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "z",
            Basis::X => "x",
        })
    }
}

/// One |GHZ_m±> block. `phi` is 0 for plus and π for minus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhzSpec {
    m: usize,
    sign: Sign,
}

impl GhzSpec {
    pub fn new(m: usize, sign: Sign) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!("GHZ block size m = {m} must be >= 2")));
        }
        Ok(GhzSpec { m, sign })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn phi(&self) -> f64 {
        match self.sign {
            Sign::Plus => 0.0,
            Sign::Minus => PI,
        }
    }
}

/// Layout of the [[m², 1, m]] code: row-major blocks of m qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeSpec {
    m: usize,
    blocks: Vec<Vec<usize>>,
    z_stabilizers: Vec<(usize, usize)>,
    x_stabilizers: Vec<Vec<usize>>,
}

impl CodeSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!("code size m = {m} must be >= 2")));
        }
        let blocks: Vec<Vec<usize>> = (0..m).map(|b| (b * m..(b + 1) * m).collect()).collect();
        let z_stabilizers = blocks
            .iter()
            .flat_map(|blk| blk.windows(2).map(|w| (w[0], w[1])))
            .collect();
        let x_stabilizers = blocks
            .windows(2)
            .map(|pair| pair[0].iter().chain(&pair[1]).copied().collect())
            .collect();
        Ok(CodeSpec {
            m,
            blocks,
            z_stabilizers,
            x_stabilizers,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_data(&self) -> usize {
        self.m * self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Adjacent pairs (j, j+1) inside each block, 0-based.
    pub fn z_stabilizers(&self) -> &[(usize, usize)] {
        &self.z_stabilizers
    }

    /// Union of blocks i and i+1, 0-based.
    pub fn x_stabilizers(&self) -> &[Vec<usize>] {
        &self.x_stabilizers
    }
}

fn ghz_gates(offset: usize, spec: &GhzSpec) -> Vec<Gate> {
    let mut gates = vec![Gate::H(offset)];
    gates.extend((0..spec.m - 1).map(|k| Gate::Cnot {
        control: offset + k,
        target: offset + k + 1,
    }));
    if spec.sign == Sign::Minus {
        gates.push(Gate::Z(offset));
    }
    gates
}

pub fn build_ghz_logical(spec: &GhzSpec) -> Circuit {
    Circuit::from_gates(spec.m, Level::Logical, ghz_gates(0, spec)).expect("GHZ gates stay inside the block")
}

/// Native |GHZ_m±> preparation; the sign enters as R_z(φ) on the first qubit.
pub fn build_ghz_native(spec: &GhzSpec) -> Circuit {
    compile_to_native(&build_ghz_logical(spec)).expect("GHZ circuits only use H, CNOT and Z")
}

/// m independent GHZ blocks laid out on the rows of an m x m array.
pub fn build_shor_encoder(m: usize, sign: Sign) -> Result<Circuit> {
    let spec = GhzSpec::new(m, sign)?;
    let mut c = Circuit::new(m * m, Level::Logical);
    for b in 0..m {
        c.extend(ghz_gates(b * m, &spec))?;
    }
    Ok(c)
}

/// Native rendering of a single logical gate.
pub fn compile_gate(gate: &Gate) -> Result<Vec<Gate>> {
    Ok(match *gate {
        // H = R_y(π/2) · Z up to phase
        Gate::H(q) => vec![
            Gate::Rz { q, theta: PI },
            Gate::RPhi {
                q,
                theta: FRAC_PI_2,
                phi: FRAC_PI_2,
            },
        ],
        Gate::Cnot { control, target } => vec![
            Gate::RPhi {
                q: control,
                theta: FRAC_PI_2,
                phi: FRAC_PI_2,
            },
            Gate::Xx {
                a: control,
                b: target,
                theta: FRAC_PI_4,
            },
            Gate::RPhi {
                q: control,
                theta: FRAC_PI_2,
                phi: 3.0 * FRAC_PI_2,
            },
            Gate::RPhi {
                q: target,
                theta: FRAC_PI_2,
                phi: 0.0,
            },
            Gate::Rz {
                q: control,
                theta: FRAC_PI_2,
            },
        ],
        Gate::Z(q) => vec![Gate::Rz { q, theta: PI }],
        Gate::X(q) => vec![Gate::RPhi { q, theta: PI, phi: 0.0 }],
        Gate::Y(q) => vec![Gate::RPhi {
            q,
            theta: PI,
            phi: FRAC_PI_2,
        }],
        Gate::RPhi { .. } | Gate::Rz { .. } | Gate::Xx { .. } => {
            return Err(Error::UnsupportedGate(format!(
                "{} is already native",
                gate.kind().name()
            )))
        }
    })
}

/// Gate-by-gate translation to {R_PHI, R_Z, XX}. No cancellation is done.
pub fn compile_to_native(c: &Circuit) -> Result<Circuit> {
    if c.level() != Level::Logical {
        return Err(Error::Level {
            expected: Level::Logical.to_string(),
            found: c.level().to_string(),
        });
    }
    let mut out = Circuit::new(c.n_qubits(), Level::Native);
    for g in c.gates() {
        out.extend(compile_gate(g)?)?;
    }
    Ok(out)
}

/// Append one H per listed qubit, for X-basis readout.
pub fn append_x_basis_change(c: &Circuit, qubits: &[usize]) -> Result<Circuit> {
    let mut out = c.clone();
    match c.level() {
        Level::Logical => out.extend(qubits.iter().map(|&q| Gate::H(q)))?,
        Level::Native => {
            for &q in qubits {
                out.extend(compile_gate(&Gate::H(q))?)?;
            }
        }
    }
    Ok(out)
}

/// Preparation plus optional basis change for every qubit.
pub fn with_measurement_basis(c: &Circuit, basis: Basis) -> Result<Circuit> {
    match basis {
        Basis::Z => Ok(c.clone()),
        Basis::X => append_x_basis_change(c, &(0..c.n_qubits()).collect::<Vec<_>>()),
    }
}

fn fmt_angle(x: f64) -> String {
    // `{:?}` is the shortest representation that round-trips exactly.
    format!("{x:?}")
}

/// Line-oriented dump: a `QUBITS n LEVEL` header, then `KIND targets [theta] [phi]`.
pub fn to_text(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "QUBITS {} {}", c.n_qubits(), c.level());
    for g in c.gates() {
        let mut line = g.kind().name().to_string();
        for t in g.targets() {
            let _ = write!(line, " {t}");
        }
        match g.kind() {
            GateKind::RPhi => {
                let _ = write!(line, " {} {}", fmt_angle(g.theta()), fmt_angle(g.phi()));
            }
            GateKind::Rz | GateKind::Xx => {
                let _ = write!(line, " {}", fmt_angle(g.theta()));
            }
            _ => {}
        }
        let _ = writeln!(s, "{line}");
    }
    s
}

pub fn from_text(text: &str) -> Result<Circuit> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty circuit text".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, level) = match fields.as_slice() {
        ["QUBITS", n, level] => {
            let n: usize = n.parse().map_err(|_| Error::Parse(format!("bad qubit count {n:?}")))?;
            let level = match *level {
                "LOGICAL" => Level::Logical,
                "NATIVE" => Level::Native,
                other => return Err(Error::Parse(format!("bad level {other:?}"))),
            };
            (n, level)
        }
        _ => return Err(Error::Parse(format!("bad header {header:?}"))),
    };
    let mut c = Circuit::new(n, level);
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let kind: GateKind = f[0].parse()?;
        let idx = |i: usize| -> Result<usize> {
            f.get(i)
                .ok_or_else(|| Error::Parse(format!("missing target in {line:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad target in {line:?}")))
        };
        let ang = |i: usize| -> Result<f64> {
            f.get(i)
                .ok_or_else(|| Error::Parse(format!("missing angle in {line:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad angle in {line:?}")))
        };
        let gate = match kind {
            GateKind::RPhi => Gate::RPhi {
                q: idx(1)?,
                theta: ang(2)?,
                phi: ang(3)?,
            },
            GateKind::Rz => Gate::Rz {
                q: idx(1)?,
                theta: ang(2)?,
            },
            GateKind::Xx => Gate::Xx {
                a: idx(1)?,
                b: idx(2)?,
                theta: ang(3)?,
            },
            GateKind::H => Gate::H(idx(1)?),
            GateKind::Cnot => Gate::Cnot {
                control: idx(1)?,
                target: idx(2)?,
            },
            GateKind::Z => Gate::Z(idx(1)?),
            GateKind::X => Gate::X(idx(1)?),
            GateKind::Y => Gate::Y(idx(1)?),
        };
        c.push(gate)?;
    }
    Ok(c)
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            other => Err(Error::Parse(format!("bad sign {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{outcome_distribution, unitary_equivalent, Statevector};
    use num_complex::Complex64;

    fn run(c: &Circuit) -> Statevector {
        let mut sv = Statevector::zero(c.n_qubits()).unwrap();
        sv.run_ideal(c).unwrap();
        sv
    }

    fn ghz_target(m: usize, sign: Sign) -> Statevector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << m];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = Complex64::new(h, 0.0);
        amps[(1 << m) - 1] = Complex64::new(if sign == Sign::Plus { h } else { -h }, 0.0);
        Statevector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn ghz3_gate_lists() {
        let plus = build_ghz_logical(&GhzSpec::new(3, Sign::Plus).unwrap());
        assert_eq!(
            plus.gates(),
            &[
                Gate::H(0),
                Gate::Cnot { control: 0, target: 1 },
                Gate::Cnot { control: 1, target: 2 }
            ]
        );
        let minus = build_ghz_logical(&GhzSpec::new(3, Sign::Minus).unwrap());
        assert_eq!(minus.gates().last(), Some(&Gate::Z(0)));
    }

    #[test]
    fn ghz_states_exact() {
        for (m, sign) in [(3, Sign::Plus), (3, Sign::Minus), (2, Sign::Plus)] {
            let sv = run(&build_ghz_logical(&GhzSpec::new(m, sign).unwrap()));
            let amps = sv.amplitudes();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let s = if sign == Sign::Plus { h } else { -h };
            assert!((amps[0] - Complex64::new(h, 0.0)).norm() < 1e-12);
            assert!((amps[(1 << m) - 1] - Complex64::new(s, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn ghz_spec_validation_and_phi() {
        assert!(GhzSpec::new(1, Sign::Plus).is_err());
        assert_eq!(GhzSpec::new(4, Sign::Plus).unwrap().phi(), 0.0);
        assert_eq!(GhzSpec::new(4, Sign::Minus).unwrap().phi(), PI);
        assert!(build_shor_encoder(1, Sign::Plus).is_err());
    }

    #[test]
    fn native_ghz_overlap_all_sizes() {
        for m in 2..=7 {
            for sign in [Sign::Plus, Sign::Minus] {
                let spec = GhzSpec::new(m, sign).unwrap();
                let native = build_ghz_native(&spec);
                assert_eq!(native.level(), Level::Native);
                let mut sv = Statevector::zero(m).unwrap();
                for g in native.gates() {
                    sv.apply_gate(g).unwrap();
                }
                let f = ghz_target(m, sign).overlap(&sv);
                assert!((f - 1.0).abs() < 1e-9, "m={m} {sign}: {f}");
            }
        }
    }

    #[test]
    fn cnot_and_h_compile_equivalent() {
        let cnot = Circuit::from_gates(2, Level::Logical, vec![Gate::Cnot { control: 0, target: 1 }]).unwrap();
        let native = compile_to_native(&cnot).unwrap();
        let xx: Vec<_> = native.gates().iter().filter(|g| g.kind() == GateKind::Xx).collect();
        assert_eq!(xx.len(), 1);
        assert_eq!(xx[0].theta(), FRAC_PI_4);
        assert!(unitary_equivalent(&cnot, &native, 1e-8).unwrap());

        let rev = Circuit::from_gates(2, Level::Logical, vec![Gate::Cnot { control: 1, target: 0 }]).unwrap();
        assert!(unitary_equivalent(&rev, &compile_to_native(&rev).unwrap(), 1e-8).unwrap());

        for g in [Gate::H(0), Gate::X(0), Gate::Y(0), Gate::Z(0)] {
            let c = Circuit::from_gates(1, Level::Logical, vec![g]).unwrap();
            assert!(unitary_equivalent(&c, &compile_to_native(&c).unwrap(), 1e-8).unwrap());
        }

        let empty = Circuit::new(3, Level::Logical);
        assert!(compile_to_native(&empty).unwrap().is_empty());
    }

    #[test]
    fn compile_rejects_native_input() {
        let c = Circuit::from_gates(1, Level::Native, vec![Gate::Rz { q: 0, theta: 1.0 }]).unwrap();
        assert!(compile_to_native(&c).is_err());
        assert!(matches!(
            compile_gate(&Gate::Rz { q: 0, theta: 1.0 }),
            Err(Error::UnsupportedGate(_))
        ));
    }

    #[test]
    fn x_basis_populations() {
        for (sign, even) in [(Sign::Plus, true), (Sign::Minus, false)] {
            let prep = build_ghz_logical(&GhzSpec::new(3, sign).unwrap());
            let c = append_x_basis_change(&prep, &[0, 1, 2]).unwrap();
            let d = outcome_distribution(&run(&c));
            for (bits, p) in d.iter() {
                assert_eq!(bits.even_parity(), even);
                assert!((p - 0.25).abs() < 1e-12);
            }
            assert_eq!(d.iter().count(), 4);
        }
        let prep = build_ghz_logical(&GhzSpec::new(3, Sign::Plus).unwrap());
        assert_eq!(append_x_basis_change(&prep, &[]).unwrap(), prep);
    }

    #[test]
    fn encoder_structure() {
        let c = build_shor_encoder(3, Sign::Plus).unwrap();
        assert_eq!(c.n_qubits(), 9);
        assert_eq!(c.gates().iter().filter(|g| g.kind() == GateKind::H).count(), 3);
        assert_eq!(c.gates().iter().filter(|g| g.kind() == GateKind::Cnot).count(), 6);
        let minus = build_shor_encoder(3, Sign::Minus).unwrap();
        let zs: Vec<_> = minus
            .gates()
            .iter()
            .filter(|g| g.kind() == GateKind::Z)
            .map(|g| g.targets()[0])
            .collect();
        assert_eq!(zs, vec![0, 3, 6]);

        for m in 2..=5 {
            let spec = CodeSpec::new(m).unwrap();
            let c = build_shor_encoder(m, Sign::Plus).unwrap();
            for g in c.gates() {
                let blocks: Vec<usize> = g.targets().iter().map(|t| t / m).collect();
                assert!(blocks.iter().all(|&b| b == blocks[0]), "{g:?} straddles blocks");
            }
            assert_eq!(spec.blocks().len(), m);
        }
    }

    #[test]
    fn encoder_plus_m3_state() {
        let sv = run(&build_shor_encoder(3, Sign::Plus).unwrap());
        let d = outcome_distribution(&sv);
        // (|000>+|111>)^{⊗3} / 2√2 : 8 strings each 1/8
        assert_eq!(d.iter().count(), 8);
        for (bits, p) in d.iter() {
            assert!((p - 0.125).abs() < 1e-12);
            for blk in 0..3 {
                let s = bits.slice(3 * blk, 3);
                assert!(s.count_ones() == 0 || s.count_ones() == 3);
            }
        }
        for amp in sv.amplitudes().iter().filter(|a| a.norm() > 0.0) {
            assert!((amp - Complex64::new(1.0 / 8f64.sqrt(), 0.0)).norm() < 1e-12);
        }

        let bell = run(&build_shor_encoder(2, Sign::Plus).unwrap());
        let d = outcome_distribution(&bell);
        let strings: Vec<String> = d.iter().map(|(b, _)| b.to_string()).collect();
        assert_eq!(strings, ["0000", "0011", "1100", "1111"]);
    }

    #[test]
    fn code_spec_m3_matches_listed_indices() {
        let spec = CodeSpec::new(3).unwrap();
        let z_one_based: Vec<usize> = spec
            .z_stabilizers()
            .iter()
            .map(|&(j, k)| {
                assert_eq!(k, j + 1);
                j + 1
            })
            .collect();
        assert_eq!(z_one_based, vec![1, 2, 4, 5, 7, 8]);
        let x_one_based: Vec<Vec<usize>> = spec
            .x_stabilizers()
            .iter()
            .map(|s| s.iter().map(|q| q + 1).collect())
            .collect();
        assert_eq!(x_one_based, vec![vec![1, 2, 3, 4, 5, 6], vec![4, 5, 6, 7, 8, 9]]);
        for m in 2..=9 {
            let s = CodeSpec::new(m).unwrap();
            assert_eq!(s.z_stabilizers().len(), m * (m - 1));
            assert_eq!(s.x_stabilizers().len(), m - 1);
            let mut all: Vec<usize> = s.blocks().iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..m * m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn text_format_roundtrip() {
        let c = build_ghz_native(&GhzSpec::new(4, Sign::Minus).unwrap());
        let text = to_text(&c);
        assert!(text.starts_with("QUBITS 4 NATIVE\n"));
        assert!(text.contains("\nXX 0 1 0.7853981633974483\n"));
        assert_eq!(from_text(&text).unwrap(), c);
        let l = build_shor_encoder(2, Sign::Plus).unwrap();
        assert_eq!(from_text(&to_text(&l)).unwrap(), l);
        assert!(from_text("QUBITS 2 NATIVE\nH 0\n").is_err());
    }
}
