//! Post-processing decoders for the [[m², 1, m]] Shor code.
//!
//! Everything here works on terminal measurement records. A row of X-basis
//! outcomes gives that block's sign through its bit parity; the logical
//! value is the majority (or unanimous) block sign. Z-basis records are
//! repaired with a per-block repetition-code majority.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::circuits::{Basis, CodeSpec, Sign};
use crate::error::{Error, Result};
use crate::qsim::Bitstring;

/// Parity bits of one shot; `false` is the +1 eigenvalue.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SyndromeRecord {
    pub z_bits: Vec<bool>,
    pub x_bits: Vec<bool>,
}

impl SyndromeRecord {
    pub fn is_trivial(&self) -> bool {
        !self.z_bits.iter().chain(&self.x_bits).any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VoteOutcome {
    pub logical_sign: Sign,
    pub unanimous: bool,
    pub tie_broken: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectVerdict {
    Accept(Sign),
    Discard,
}

impl DetectVerdict {
    pub fn sign(self) -> Option<Sign> {
        match self {
            DetectVerdict::Accept(s) => Some(s),
            DetectVerdict::Discard => None,
        }
    }
}

/// PLUS iff the row has even parity.
pub fn block_sign(x_basis_bits: &Bitstring) -> Sign {
    if x_basis_bits.even_parity() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn check_non_empty(signs: &[Sign]) -> Result<()> {
    if signs.is_empty() {
        return Err(Error::Parameter("vote over zero block signs".into()));
    }
    Ok(())
}

/// Strict majority of block signs. An exact tie (even m only) is settled by
/// one fair draw from `rng`; nothing is drawn otherwise.
pub fn majority_vote<R: Rng + ?Sized>(signs: &[Sign], rng: &mut R) -> Result<VoteOutcome> {
    check_non_empty(signs)?;
    let plus = signs.iter().filter(|&&s| s == Sign::Plus).count();
    let minus = signs.len() - plus;
    let unanimous = plus == 0 || minus == 0;
    let (logical_sign, tie_broken) = match plus.cmp(&minus) {
        std::cmp::Ordering::Greater => (Sign::Plus, false),
        std::cmp::Ordering::Less => (Sign::Minus, false),
        std::cmp::Ordering::Equal => {
            let s = if rng.gen::<bool>() { Sign::Plus } else { Sign::Minus };
            (s, true)
        }
    };
    Ok(VoteOutcome {
        logical_sign,
        unanimous,
        tie_broken,
    })
}

/// Common sign when all blocks agree, otherwise discard.
pub fn detect_vote(signs: &[Sign]) -> Result<DetectVerdict> {
    check_non_empty(signs)?;
    let first = signs[0];
    Ok(if signs.iter().all(|&s| s == first) {
        DetectVerdict::Accept(first)
    } else {
        DetectVerdict::Discard
    })
}

fn check_len(bits: &Bitstring, spec: &CodeSpec) -> Result<()> {
    if bits.len() != spec.n_data() {
        return Err(Error::Parameter(format!(
            "record has {} bits, code needs {}",
            bits.len(),
            spec.n_data()
        )));
    }
    Ok(())
}

/// One bit per Z_j Z_{j+1} pair, in `spec.z_stabilizers()` order.
pub fn z_syndrome(z_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<Vec<bool>> {
    check_len(z_basis_bits, spec)?;
    Ok(spec
        .z_stabilizers()
        .iter()
        .map(|&(a, b)| z_basis_bits.get(a) ^ z_basis_bits.get(b))
        .collect())
}

/// Block signs of an X-basis record of the full code.
pub fn block_signs(x_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<Vec<Sign>> {
    check_len(x_basis_bits, spec)?;
    let m = spec.m();
    Ok((0..m).map(|b| block_sign(&x_basis_bits.slice(b * m, m))).collect())
}

/// One bit per adjacent-block X stabilizer: the XOR of two block signs.
pub fn x_syndrome(x_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<Vec<bool>> {
    check_len(x_basis_bits, spec)?;
    Ok(spec
        .x_stabilizers()
        .iter()
        .map(|support| support.iter().fold(false, |acc, &q| acc ^ x_basis_bits.get(q)))
        .collect())
}

/// Per-block repetition-code correction: flip the minority bits of each row.
/// A row with an exact tie (even m) is left as measured.
pub fn correct_single_bitflip(z_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<Bitstring> {
    check_len(z_basis_bits, spec)?;
    let m = spec.m();
    let mut out = z_basis_bits.clone();
    for block in spec.blocks() {
        let ones = block.iter().filter(|&&q| z_basis_bits.get(q)).count();
        let majority = match (2 * ones).cmp(&m) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => continue,
        };
        for &q in block {
            if out.get(q) != majority {
                out.flip(q);
            }
        }
    }
    Ok(out)
}

/// Logical Z-type value of a Z-basis record: parity of the corrected row values.
pub fn logical_readout_z(z_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<bool> {
    let corrected = correct_single_bitflip(z_basis_bits, spec)?;
    Ok(spec
        .blocks()
        .iter()
        .fold(false, |acc, block| acc ^ corrected.get(block[0])))
}

/// Block signs of an X-basis record, then a majority vote.
pub fn logical_readout_x<R: Rng + ?Sized>(
    x_basis_bits: &Bitstring,
    spec: &CodeSpec,
    rng: &mut R,
) -> Result<VoteOutcome> {
    majority_vote(&block_signs(x_basis_bits, spec)?, rng)
}

/// Detection-discard readout of an X-basis record.
pub fn logical_detect_x(x_basis_bits: &Bitstring, spec: &CodeSpec) -> Result<DetectVerdict> {
    detect_vote(&block_signs(x_basis_bits, spec)?)
}

/// One row of the per-shot decoder export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub shot_index: usize,
    pub basis: Basis,
    pub bitstring: Bitstring,
    pub block_signs: String,
    pub verdict: String,
    pub tie_broken: bool,
}

impl VerdictRecord {
    pub fn from_vote(shot_index: usize, bitstring: Bitstring, signs: &[Sign], vote: &VoteOutcome) -> Self {
        VerdictRecord {
            shot_index,
            basis: Basis::X,
            bitstring,
            block_signs: signs.iter().map(|s| s.symbol()).collect(),
            verdict: vote.logical_sign.to_string(),
            tie_broken: vote.tie_broken,
        }
    }

    pub fn from_detect(shot_index: usize, bitstring: Bitstring, signs: &[Sign], verdict: DetectVerdict) -> Self {
        VerdictRecord {
            shot_index,
            basis: Basis::X,
            bitstring,
            block_signs: signs.iter().map(|s| s.symbol()).collect(),
            verdict: match verdict {
                DetectVerdict::Accept(s) => s.to_string(),
                DetectVerdict::Discard => "discard".into(),
            },
            tie_broken: false,
        }
    }
}

/// CSV with header `shot_index,basis,bitstring,block_signs,verdict,tie_broken`.
pub fn write_verdicts_csv<W: Write>(out: W, records: &[VerdictRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_rng;
    use proptest::prelude::*;

    fn b(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    use Sign::{Minus as M, Plus as P};

    #[test]
    fn block_sign_parity() {
        assert_eq!(block_sign(&b("000")), P);
        assert_eq!(block_sign(&b("110")), P);
        assert_eq!(block_sign(&b("100")), M);
    }

    #[test]
    fn majority_examples() {
        let mut rng = aux_rng(0, 0);
        let v = majority_vote(&[P, P, M], &mut rng).unwrap();
        assert_eq!((v.logical_sign, v.unanimous, v.tie_broken), (P, false, false));
        let v = majority_vote(&[P, P, P], &mut rng).unwrap();
        assert!(v.unanimous);
        assert!(majority_vote(&[], &mut rng).is_err());
    }

    #[test]
    fn ties_are_fair() {
        let mut rng = aux_rng(1, 0);
        let n = 100_000;
        let plus = (0..n)
            .filter(|_| {
                let v = majority_vote(&[P, P, M, M], &mut rng).unwrap();
                assert!(v.tie_broken);
                v.logical_sign == P
            })
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((plus as f64 - n as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn detect_examples() {
        assert_eq!(detect_vote(&[P, P, P]).unwrap(), DetectVerdict::Accept(P));
        assert_eq!(detect_vote(&[P, P, M]).unwrap(), DetectVerdict::Discard);
        assert!(detect_vote(&[]).is_err());
    }

    #[test]
    fn z_syndrome_examples() {
        let spec = CodeSpec::new(3).unwrap();
        assert_eq!(z_syndrome(&b("000000000"), &spec).unwrap(), vec![false; 6]);
        assert_eq!(
            z_syndrome(&b("010000000"), &spec).unwrap(),
            vec![true, true, false, false, false, false]
        );
        assert_eq!(z_syndrome(&b("111000111"), &spec).unwrap(), vec![false; 6]);
        assert!(z_syndrome(&b("0000"), &spec).is_err());
    }

    #[test]
    fn correction_examples() {
        let spec = CodeSpec::new(3).unwrap();
        assert_eq!(correct_single_bitflip(&b("010111000"), &spec).unwrap(), b("000111000"));
        assert_eq!(correct_single_bitflip(&b("111111111"), &spec).unwrap(), b("111111111"));
        assert_eq!(correct_single_bitflip(&b("011000000"), &spec).unwrap(), b("111000000"));
    }

    #[test]
    fn x_syndrome_examples() {
        let spec = CodeSpec::new(3).unwrap();
        assert_eq!(x_syndrome(&b("000011101"), &spec).unwrap(), vec![false, false]);
        // signs (+, -, +)
        assert_eq!(x_syndrome(&b("011100000"), &spec).unwrap(), vec![true, true]);
        // signs (-, -, -): a logical flip is invisible
        let all_minus = b("100010001");
        assert_eq!(x_syndrome(&all_minus, &spec).unwrap(), vec![false, false]);
        assert_eq!(block_signs(&all_minus, &spec).unwrap(), vec![M, M, M]);
    }

    #[test]
    fn readout_survives_one_flip() {
        let spec = CodeSpec::new(3).unwrap();
        let mut rng = aux_rng(2, 0);
        let clean = b("011101000");
        for q in 0..9 {
            let mut bits = clean.clone();
            bits.flip(q);
            let v = logical_readout_x(&bits, &spec, &mut rng).unwrap();
            assert_eq!(v.logical_sign, P);
            assert_eq!(logical_detect_x(&bits, &spec).unwrap(), DetectVerdict::Discard);
        }
    }

    #[test]
    fn verdict_csv_layout() {
        let spec = CodeSpec::new(3).unwrap();
        let bits = b("011100000");
        let signs = block_signs(&bits, &spec).unwrap();
        let vote = logical_readout_x(&bits, &spec, &mut aux_rng(0, 0)).unwrap();
        let rows = vec![
            VerdictRecord::from_vote(0, bits.clone(), &signs, &vote),
            VerdictRecord::from_detect(1, bits, &signs, DetectVerdict::Discard),
        ];
        let mut out = Vec::new();
        write_verdicts_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "shot_index,basis,bitstring,block_signs,verdict,tie_broken\n\
             0,x,011100000,+-+,plus,false\n\
             1,x,011100000,+-+,discard,false\n"
        );
    }

    fn sign_strategy() -> impl Strategy<Value = Sign> {
        prop_oneof![Just(P), Just(M)]
    }

    proptest! {
        #[test]
        fn majority_is_permutation_invariant(
            signs in proptest::collection::vec(sign_strategy(), 1..10).prop_filter("no ties", |s| {
                let p = s.iter().filter(|&&x| x == P).count();
                2 * p != s.len()
            }),
            seed in any::<u64>(),
        ) {
            let mut rev = signs.clone();
            rev.reverse();
            let mut rot = signs.clone();
            rot.rotate_left(1);
            let mut rng = aux_rng(seed, 0);
            let a = majority_vote(&signs, &mut rng).unwrap();
            prop_assert_eq!(a, majority_vote(&rev, &mut rng).unwrap());
            prop_assert_eq!(a, majority_vote(&rot, &mut rng).unwrap());
        }

        #[test]
        fn detect_never_signs_split_votes(signs in proptest::collection::vec(sign_strategy(), 1..10)) {
            let unanimous = signs.iter().all(|&s| s == signs[0]);
            let v = detect_vote(&signs).unwrap();
            prop_assert_eq!(v.sign().is_some(), unanimous);
        }
    }
}
