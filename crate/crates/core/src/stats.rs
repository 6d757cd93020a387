//! Fidelity estimators, the up-sampling construction and an exact oracle.
//!
//! Up-sampling groups consecutive GHZ shots into artificial m x m logical
//! shots: shot k of the group plays block k of the code. Remainder shots that
//! do not fill a group are dropped.

use rand::Rng;
use serde::Serialize;

use crate::circuits::{Basis, Sign};
use crate::code::{block_sign, detect_vote, majority_vote, DetectVerdict};
use crate::error::{Error, Result};
use crate::qsim::{Bitstring, OutcomeDistribution};

/// Labeled shot records of one batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    basis: Basis,
    target_sign: Sign,
    m: usize,
    shots: Vec<Bitstring>,
}

impl SampleSet {
    /// Every shot must have length m (one block) or m² (the full code).
    pub fn new(basis: Basis, target_sign: Sign, m: usize, shots: Vec<Bitstring>) -> Result<Self> {
        if let Some(first) = shots.first() {
            let w = first.len();
            if w != m && w != m * m {
                return Err(Error::Parameter(format!(
                    "shot width {w} is neither m = {m} nor m² = {}",
                    m * m
                )));
            }
            if let Some(bad) = shots.iter().find(|s| s.len() != w) {
                return Err(Error::Parameter(format!("shot {bad} has inconsistent width")));
            }
        }
        Ok(SampleSet {
            basis,
            target_sign,
            m,
            shots,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn target_sign(&self) -> Sign {
        self.target_sign
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn shots(&self) -> &[Bitstring] {
        &self.shots
    }

    pub fn n(&self) -> usize {
        self.shots.len()
    }

    fn require(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::Parameter(format!(
                "estimator needs a {basis}-basis sample set, got {}",
                self.basis
            )));
        }
        Ok(())
    }

    fn require_block_width(&self) -> Result<()> {
        if self.shots.first().is_some_and(|s| s.len() != self.m) {
            return Err(Error::Parameter(
                "up-sampling needs single-block shots of length m".into(),
            ));
        }
        Ok(())
    }
}

/// A binomial proportion with sigma = sqrt(F(1-F)/N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub sigma: f64,
    pub trials: usize,
}

impl FidelityEstimate {
    pub fn from_counts(successes: usize, trials: usize) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InsufficientData("zero trials".into()));
        }
        let value = successes as f64 / trials as f64;
        Ok(FidelityEstimate {
            value,
            sigma: binomial_sigma(value, trials),
            trials,
        })
    }
}

pub fn binomial_sigma(value: f64, trials: usize) -> f64 {
    (value * (1.0 - value) / trials as f64).sqrt()
}

/// Fraction of shots reading all-zeros or all-ones.
pub fn estimate_fz(s: &SampleSet) -> Result<FidelityEstimate> {
    s.require(Basis::Z)?;
    let hits = s
        .shots
        .iter()
        .filter(|b| {
            let ones = b.count_ones();
            ones == 0 || ones == b.len()
        })
        .count();
    FidelityEstimate::from_counts(hits, s.n())
}

/// Fraction of shots whose parity matches the prepared sign (even for plus).
pub fn estimate_fx(s: &SampleSet) -> Result<FidelityEstimate> {
    s.require(Basis::X)?;
    let hits = s.shots.iter().filter(|b| block_sign(b) == s.target_sign).count();
    FidelityEstimate::from_counts(hits, s.n())
}

/// Fraction of shots read as `sign`, whatever was prepared (the `Fx_plus` and
/// `Fx_minus` report columns).
pub fn sign_fraction(s: &SampleSet, sign: Sign) -> Result<FidelityEstimate> {
    s.require(Basis::X)?;
    let hits = s.shots.iter().filter(|b| block_sign(b) == sign).count();
    FidelityEstimate::from_counts(hits, s.n())
}

fn groups(s: &SampleSet) -> Result<std::slice::Chunks<'_, Bitstring>> {
    s.require(Basis::X)?;
    s.require_block_width()?;
    if s.n() < s.m {
        return Err(Error::InsufficientData(format!(
            "{} shots cannot fill one group of {}",
            s.n(),
            s.m
        )));
    }
    let full = s.n() / s.m * s.m;
    Ok(s.shots[..full].chunks(s.m))
}

/// Logical readout counts of the majority decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MajorityCounts {
    pub groups: usize,
    pub plus: usize,
    pub ties: usize,
}

/// Majority-vote every group; ties draw from `rng` in group order.
pub fn upsample_majority_counts<R: Rng + ?Sized>(s: &SampleSet, rng: &mut R) -> Result<MajorityCounts> {
    let mut counts = MajorityCounts {
        groups: 0,
        plus: 0,
        ties: 0,
    };
    for g in groups(s)? {
        let signs: Vec<Sign> = g.iter().map(block_sign).collect();
        let v = majority_vote(&signs, rng)?;
        counts.groups += 1;
        counts.plus += (v.logical_sign == Sign::Plus) as usize;
        counts.ties += v.tie_broken as usize;
    }
    Ok(counts)
}

/// Up-sampled logical fidelity under majority voting, for the prepared sign.
pub fn upsample_majority<R: Rng + ?Sized>(s: &SampleSet, rng: &mut R) -> Result<FidelityEstimate> {
    let c = upsample_majority_counts(s, rng)?;
    let hits = match s.target_sign {
        Sign::Plus => c.plus,
        Sign::Minus => c.groups - c.plus,
    };
    FidelityEstimate::from_counts(hits, c.groups)
}

/// Detection-discard result. `fidelity` is `None` when nothing was kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectEstimate {
    pub fidelity: Option<FidelityEstimate>,
    #[serde(rename = "yield")]
    pub yield_: FidelityEstimate,
    pub kept: usize,
    pub groups: usize,
}

pub fn upsample_detect(s: &SampleSet) -> Result<DetectEstimate> {
    let mut kept = 0;
    let mut matching = 0;
    let mut total = 0;
    for g in groups(s)? {
        let signs: Vec<Sign> = g.iter().map(block_sign).collect();
        total += 1;
        if let DetectVerdict::Accept(sign) = detect_vote(&signs)? {
            kept += 1;
            matching += (sign == s.target_sign) as usize;
        }
    }
    let fidelity = if kept == 0 {
        None
    } else {
        Some(FidelityEstimate::from_counts(matching, kept)?)
    };
    Ok(DetectEstimate {
        fidelity,
        yield_: FidelityEstimate::from_counts(kept, total)?,
        kept,
        groups: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Majority,
    Detect,
}

/// Exact decoder statistics derived from a per-block distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValues {
    /// Probability that one block reads the prepared sign.
    pub block_success: f64,
    pub fidelity: f64,
    /// Accepted fraction; 1 for the majority decoder.
    #[serde(rename = "yield")]
    pub yield_: f64,
}

/// Enumerates all 2^m block-sign patterns, weighting each by the product of
/// per-block probabilities. No sampling and no closed-form sums.
pub fn exact_logical_oracle(
    dist: &OutcomeDistribution,
    m: usize,
    decoder: Decoder,
    target_sign: Sign,
) -> Result<OracleValues> {
    if dist.n_qubits() != m {
        return Err(Error::Parameter(format!(
            "distribution over {} qubits, expected one block of {m}",
            dist.n_qubits()
        )));
    }
    if m > 20 {
        return Err(Error::Parameter(format!("m = {m} too large to enumerate")));
    }
    let p: f64 = dist
        .iter()
        .filter(|(bits, _)| block_sign(bits) == target_sign)
        .map(|(_, pr)| pr)
        .sum();
    let q = 1.0 - p;

    let mut correct = 0.0;
    let mut accepted = 0.0;
    for pattern in 0u32..(1 << m) {
        let good = pattern.count_ones() as usize;
        let bad = m - good;
        let weight = p.powi(good as i32) * q.powi(bad as i32);
        match decoder {
            Decoder::Majority => {
                if 2 * good > m {
                    correct += weight;
                } else if 2 * good == m {
                    correct += 0.5 * weight;
                }
            }
            Decoder::Detect => {
                if bad == 0 {
                    correct += weight;
                    accepted += weight;
                } else if good == 0 {
                    accepted += weight;
                }
            }
        }
    }
    Ok(match decoder {
        Decoder::Majority => OracleValues {
            block_success: p,
            fidelity: correct,
            yield_: 1.0,
        },
        Decoder::Detect => OracleValues {
            block_success: p,
            fidelity: correct / accepted,
            yield_: accepted,
        },
    })
}
