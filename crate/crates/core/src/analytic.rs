//! Closed-form logical fidelity and yield of up-sampled Shor codes.
//!
//! With per-block success probability `F` the majority decoder succeeds when
//! more than half the blocks read the right sign, and half the time on an
//! exact tie:
//!
//! ```text
//! F_L = sum_{k > m/2} C(m,k) F^k (1-F)^(m-k)  [+ 1/2 C(m,m/2) F^(m/2) (1-F)^(m/2) for even m]
//! ```
//!
//! Detection keeps only unanimous groups: yield `F^m + (1-F)^m`, fidelity
//! `F^m / yield`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Decoder;

const BISECTION_TOL: f64 = 1e-9;

/// Exact C(n, k) in integer arithmetic.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    // each partial product C(n-k+i, i) is an integer
    (1..=k as u128).fold(1u128, |acc, i| acc * (n as u128 - k as u128 + i) / i)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("{name} = {p} is not in [0, 1]")));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<u32> {
    if m == 0 || m > 60 {
        return Err(Error::Parameter(format!("code size m = {m} out of range 1..=60")));
    }
    Ok(m as u32)
}

/// Majority-vote logical fidelity for block success `fx` (ties split evenly).
pub fn logical_fidelity(m: usize, fx: f64) -> Result<f64> {
    let m = check_m(m)?;
    check_probability("fx", fx)?;
    Ok(binomial_majority(m, fx))
}

fn binomial_majority(m: u32, p: f64) -> f64 {
    let q = 1.0 - p;
    let mut total = 0.0;
    for k in (m / 2)..=m {
        let term = binomial(m, k) as f64 * p.powi(k as i32) * q.powi((m - k) as i32);
        if 2 * k > m {
            total += term;
        } else if 2 * k == m {
            total += 0.5 * term;
        }
    }
    total
}

/// Majority-vote logical error for block error `q`, summed directly so that
/// tiny errors keep full relative precision.
pub fn logical_error(m: usize, q: f64) -> Result<f64> {
    let m = check_m(m)?;
    check_probability("block error", q)?;
    let p = 1.0 - q;
    let mut total = 0.0;
    for k in (m / 2)..=m {
        let term = binomial(m, k) as f64 * q.powi(k as i32) * p.powi((m - k) as i32);
        if 2 * k > m {
            total += term;
        } else if 2 * k == m {
            total += 0.5 * term;
        }
    }
    Ok(total)
}

/// `(fidelity, yield)` of the detection-discard decoder.
pub fn detect_fidelity_yield(m: usize, fx: f64) -> Result<(f64, f64)> {
    let m = check_m(m)? as i32;
    check_probability("fx", fx)?;
    let good = fx.powi(m);
    let yield_ = good + (1.0 - fx).powi(m);
    Ok((good / yield_, yield_))
}

/// Logical fidelity of `decoder` at block success `fx`.
pub fn decoder_fidelity(m: usize, fx: f64, decoder: Decoder) -> Result<f64> {
    match decoder {
        Decoder::Majority => logical_fidelity(m, fx),
        Decoder::Detect => detect_fidelity_yield(m, fx).map(|(f, _)| f),
    }
}

/// How the depolarizing block model turns a physical fidelity into a block
/// success probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockModel {
    /// `p_block = 1 - m (1 - f)`, clamped to [0, 1]: first-order accumulation
    /// of m independent physical errors.
    #[default]
    ErrorRate,
    /// `p_block = m f`, only defined for `f <= 1/m`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizingParams {
    pub f: f64,
    pub m: usize,
}

impl DepolarizingParams {
    pub fn new(f: f64, m: usize) -> Result<Self> {
        check_probability("f", f)?;
        check_m(m)?;
        Ok(DepolarizingParams { f, m })
    }

    pub fn block_success(&self, model: BlockModel) -> Result<f64> {
        let m = self.m as f64;
        match model {
            BlockModel::ErrorRate => Ok((1.0 - m * (1.0 - self.f)).clamp(0.0, 1.0)),
            BlockModel::Literal => {
                let p = m * self.f;
                if p > 1.0 {
                    return Err(Error::Domain {
                        value: self.f,
                        reason: format!("m f = {p} exceeds 1 for m = {}", self.m),
                    });
                }
                Ok(p)
            }
        }
    }

    pub fn logical_fidelity(&self, model: BlockModel) -> Result<f64> {
        logical_fidelity(self.m, self.block_success(model)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingCurve {
    pub m: usize,
    /// `(1 - f, 1 - F_L)` pairs, physical error increasing.
    pub points: Vec<(f64, f64)>,
}

/// Logical error against physical error for one odd code size.
pub fn scaling_curve(m: usize, f_grid: &[f64], model: BlockModel) -> Result<ScalingCurve> {
    if m % 2 == 0 {
        return Err(Error::Parameter(format!("scaling curves use odd m, got {m}")));
    }
    let mut sorted: Vec<f64> = f_grid.to_vec();
    // decreasing fidelity = increasing physical error
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let points = sorted
        .into_iter()
        .map(|f| {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Domain {
                    value: f,
                    reason: "physical fidelity outside [0, 1]".into(),
                });
            }
            DepolarizingParams::new(f, m)?;
            let e = 1.0 - f;
            Ok((e, logical_error_at(m, e, model)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingCurve { m, points })
}

/// Logical error at physical error `e` under the error-rate block model.
pub fn logical_error_at(m: usize, physical_error: f64, model: BlockModel) -> Result<f64> {
    check_probability("physical error", physical_error)?;
    let q = match model {
        BlockModel::ErrorRate => (m as f64 * physical_error).clamp(0.0, 1.0),
        BlockModel::Literal => 1.0 - DepolarizingParams::new(1.0 - physical_error, m)?.block_success(model)?,
    };
    logical_error(m, q)
}

/// Code size with the highest logical fidelity; ties go to the smaller m.
pub fn optimal_m(fx_by_m: &BTreeMap<usize, f64>, decoder: Decoder) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&m, &fx) in fx_by_m {
        let f = decoder_fidelity(m, fx, decoder)?;
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((m, f));
        }
    }
    best.map(|(m, _)| m)
        .ok_or_else(|| Error::Parameter("no code sizes given".into()))
}

/// Bisection on a continuous increasing function over `[lo, hi]`.
pub fn bisect_increasing(mut lo: f64, mut hi: f64, target: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Block fidelity at which an m-block code reaches `target_fl`.
pub fn required_ghz_fidelity(m: usize, target_fl: f64) -> Result<f64> {
    if m < 3 {
        return Err(Error::Parameter(format!("m = {m} must be >= 3")));
    }
    let mm = check_m(m)?;
    if !(target_fl > 0.5 && target_fl < 1.0) {
        return Err(Error::Parameter(format!(
            "target logical fidelity {target_fl} outside (0.5, 1)"
        )));
    }
    Ok(bisect_increasing(0.5, 1.0, target_fl, BISECTION_TOL, |p| {
        binomial_majority(mm, p)
    }))
}

/// Block fidelity needed for the code to match a bare physical qubit's SPAM fidelity.
pub fn required_ghz_for_physical_parity(m: usize, physical_spam: f64) -> Result<f64> {
    required_ghz_fidelity(m, physical_spam)
}

/// Physical errors in `(lo, hi)` where the two curves swap order, each
/// located by bisection to `tol`. Sign changes are found on `scan_points`
/// uniform subintervals first.
pub fn curve_crossings(
    m_small: usize,
    m_large: usize,
    lo: f64,
    hi: f64,
    scan_points: usize,
    tol: f64,
    model: BlockModel,
) -> Result<Vec<f64>> {
    let diff =
        |e: f64| -> Result<f64> { Ok(logical_error_at(m_large, e, model)? - logical_error_at(m_small, e, model)?) };
    let step = (hi - lo) / scan_points as f64;
    let mut out = Vec::new();
    let mut prev_e = lo + step * 1e-3;
    let mut prev = diff(prev_e)?;
    for i in 1..=scan_points {
        let e = if i == scan_points {
            hi - step * 1e-3
        } else {
            lo + step * i as f64
        };
        let d = diff(e)?;
        if (prev < 0.0) != (d < 0.0) {
            let (mut a, mut b) = (prev_e, e);
            let a_neg = prev < 0.0;
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if (diff(mid)? < 0.0) == a_neg {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = d;
        prev_e = e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(9, 4), 126);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(60, 30), 118264581564861424);
        assert_eq!(binomial(3, 5), 0);
    }

    // Expected values frozen from a 40-digit mpmath evaluation of the sums.
    #[test]
    fn logical_fidelity_examples() {
        assert!((logical_fidelity(3, 0.965).unwrap() - 0.99641075).abs() < 1e-8);
        assert!((logical_fidelity(6, 0.917).unwrap() - 0.9949703706).abs() < 1e-9);
        for m in 1..=9 {
            assert!((logical_fidelity(m, 0.5).unwrap() - 0.5).abs() < 1e-14);
        }
        assert_eq!(logical_fidelity(1, 0.73).unwrap(), 0.73);
        assert!(logical_fidelity(3, 1.2).is_err());
        assert!(logical_fidelity(3, -0.1).is_err());
    }

    #[test]
    fn detect_examples() {
        let (f, y) = detect_fidelity_yield(3, 0.965).unwrap();
        assert!((f - 0.9999522909).abs() < 1e-9);
        assert!((y - 0.898675).abs() < 1e-9);
        let (_, y) = detect_fidelity_yield(7, 0.869).unwrap();
        assert!((y - 0.3742305203).abs() < 1e-9);
        assert_eq!(detect_fidelity_yield(5, 1.0).unwrap(), (1.0, 1.0));
        let (_, y) = detect_fidelity_yield(4, 0.5).unwrap();
        assert!((y - 2f64.powi(-3)).abs() < 1e-15);
    }

    #[test]
    fn optimal_m_examples() {
        let table: BTreeMap<usize, f64> = [(3, 0.965), (4, 0.947), (5, 0.936), (6, 0.917), (7, 0.869)].into();
        assert_eq!(optimal_m(&table, Decoder::Majority).unwrap(), 5);
        assert_eq!(optimal_m(&table, Decoder::Detect).unwrap(), 6);
        assert_eq!(optimal_m(&[(3, 0.9)].into(), Decoder::Majority).unwrap(), 3);
        assert_eq!(optimal_m(&[(3, 1.0), (5, 1.0)].into(), Decoder::Majority).unwrap(), 3);
        assert!(optimal_m(&BTreeMap::new(), Decoder::Detect).is_err());
    }

    #[test]
    fn required_fidelity_examples() {
        let target = logical_fidelity(3, 0.965).unwrap();
        assert!((required_ghz_fidelity(5, target).unwrap() - 0.93).abs() < 0.005);
        assert!((required_ghz_fidelity(7, target).unwrap() - 0.895).abs() < 0.005);
        let t9 = logical_fidelity(3, 0.9).unwrap();
        assert!((required_ghz_fidelity(3, t9).unwrap() - 0.9).abs() < 1e-9);
        let t95 = logical_fidelity(3, 0.95).unwrap();
        assert!((required_ghz_for_physical_parity(3, t95).unwrap() - 0.95).abs() < 1e-9);
        let near_half = required_ghz_for_physical_parity(3, 0.5 + 1e-6).unwrap();
        assert!(near_half > 0.5 && near_half < 0.5001);
        assert!(required_ghz_fidelity(3, 1.0).is_err());
        assert!(required_ghz_fidelity(3, 0.5).is_err());
        assert!(required_ghz_fidelity(2, 0.9).is_err());
    }

    #[test]
    fn block_models() {
        let p = DepolarizingParams::new(0.99, 5).unwrap();
        assert!((p.block_success(BlockModel::ErrorRate).unwrap() - 0.95).abs() < 1e-12);
        assert!(matches!(
            p.block_success(BlockModel::Literal),
            Err(Error::Domain { .. })
        ));
        let lit = DepolarizingParams::new(0.19, 5).unwrap();
        assert!((lit.block_success(BlockModel::Literal).unwrap() - 0.95).abs() < 1e-12);
        let far = DepolarizingParams::new(0.5, 3).unwrap();
        assert_eq!(far.block_success(BlockModel::ErrorRate).unwrap(), 0.0);
    }

    #[test]
    fn curve_examples() {
        for m in [3, 5, 7, 9] {
            let c = scaling_curve(m, &[1.0, 0.99, 0.95], BlockModel::ErrorRate).unwrap();
            assert_eq!(c.points[0], (0.0, 0.0));
            assert!(c.points.windows(2).all(|w| w[0].0 < w[1].0));
        }
        // block success 1 - 3e = 0.5 at e = 1/6
        let e = logical_error_at(3, 1.0 / 6.0, BlockModel::ErrorRate).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        assert!(scaling_curve(4, &[0.99], BlockModel::ErrorRate).is_err());
        assert!(matches!(
            scaling_curve(3, &[1.1], BlockModel::ErrorRate),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            scaling_curve(3, &[0.9], BlockModel::Literal),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn three_and_five_cross_once() {
        let xs = curve_crossings(3, 5, 0.0, 0.2, 2000, 1e-9, BlockModel::ErrorRate).unwrap();
        assert_eq!(xs.len(), 1);
        let below = xs[0] * 0.5;
        assert!(
            logical_error_at(5, below, BlockModel::ErrorRate).unwrap()
                < logical_error_at(3, below, BlockModel::ErrorRate).unwrap()
        );
    }

    #[test]
    fn odd_pairs_cross_once() {
        let ms = [3, 5, 7, 9];
        for (i, &a) in ms.iter().enumerate() {
            for &b in &ms[i + 1..] {
                let xs = curve_crossings(a, b, 0.0, 1.0 / b as f64, 4000, 1e-9, BlockModel::ErrorRate).unwrap();
                assert_eq!(xs.len(), 1, "m = {a} vs {b}: {xs:?}");
            }
        }
    }

    #[test]
    fn tiny_errors_keep_precision() {
        // leading term C(5,3) (5e)^3
        let e = 1e-7;
        let le = logical_error_at(5, e, BlockModel::ErrorRate).unwrap();
        assert!((le / (10.0 * (5.0 * e).powi(3)) - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn error_complements_fidelity(m in 1usize..=12, q in 0.0f64..=1.0) {
            let sum = logical_error(m, q).unwrap() + logical_fidelity(m, 1.0 - q).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_increasing(m in 1usize..=9, a in 0.5f64..1.0, b in 0.5f64..1.0) {
            let fa = logical_fidelity(m, a).unwrap();
            let flip = logical_fidelity(m, 1.0 - a).unwrap();
            prop_assert!((fa + flip - 1.0).abs() < 1e-12);
            if m >= 2 && (a - b).abs() > 1e-6 {
                let fb = logical_fidelity(m, b).unwrap();
                prop_assert_eq!(a < b, fa < fb);
            }
        }

        #[test]
        fn detect_beats_majority(m in 2usize..=9, fx in 0.5001f64..0.9999) {
            let (df, _) = detect_fidelity_yield(m, fx).unwrap();
            prop_assert!(df >= logical_fidelity(m, fx).unwrap() - 1e-15);
        }

        #[test]
        fn yield_falls_with_m(m in 1usize..=8, fx in 0.5001f64..0.9999) {
            let (_, y1) = detect_fidelity_yield(m, fx).unwrap();
            let (_, y2) = detect_fidelity_yield(m + 1, fx).unwrap();
            prop_assert!(y2 < y1);
        }

        #[test]
        fn inverse_roundtrip(m in 3usize..=9, fx in 0.55f64..0.99) {
            let t = logical_fidelity(m, fx).unwrap();
            prop_assume!(t < 1.0 - 1e-12);
            let back = required_ghz_fidelity(m, t).unwrap();
            prop_assert!((back - fx).abs() < 1e-6);
        }
    }
}
