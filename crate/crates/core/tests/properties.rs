use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shor_scaler::circuits::{
    build_ghz_native, build_shor_encoder, with_measurement_basis, Basis, CodeSpec, GhzSpec, Sign,
};
use shor_scaler::code::{block_signs, x_syndrome, z_syndrome};
use shor_scaler::noise::{run_batch, run_shots, BatchParams, NoiseConfig, NoiseModel};
use shor_scaler::qsim::{outcome_distribution, Bitstring, Circuit, Gate, Level, OutcomeDistribution, Statevector};
use shor_scaler::stats::{
    estimate_fx, exact_logical_oracle, sign_fraction, upsample_detect, upsample_majority_counts, Decoder, SampleSet,
};

fn native_gate(n: usize) -> impl Strategy<Value = Gate> {
    let angle = -7.0f64..7.0;
    prop_oneof![
        (0..n, angle.clone(), angle.clone()).prop_map(|(q, theta, phi)| Gate::RPhi { q, theta, phi }),
        (0..n, angle.clone()).prop_map(|(q, theta)| Gate::Rz { q, theta }),
        (0..n, 1..n, angle).prop_map(move |(a, d, theta)| Gate::Xx {
            a,
            b: (a + d) % n,
            theta
        }),
    ]
}

fn ghz_x(m: usize, sign: Sign) -> Circuit {
    with_measurement_basis(&build_ghz_native(&GhzSpec::new(m, sign).unwrap()), Basis::X).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn native_circuits_preserve_norm(gates in prop::collection::vec(native_gate(5), 1..40)) {
        let c = Circuit::from_gates(5, Level::Native, gates).unwrap();
        let mut s = Statevector::zero(5).unwrap();
        s.run_ideal(&c).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ideal_codewords_have_trivial_syndromes(m in 2usize..=5, seed in any::<u64>(), plus in any::<bool>()) {
        let spec = CodeSpec::new(m).unwrap();
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Z basis: each block all-equal, blocks independent
        let mut z = Vec::new();
        for _ in 0..m {
            let v = rng.gen::<bool>();
            z.extend(std::iter::repeat_n(v, m));
        }
        prop_assert!(z_syndrome(&Bitstring::new(z), &spec).unwrap().iter().all(|&b| !b));
        // X basis: each block has the parity of the prepared sign
        let mut x = Vec::new();
        for _ in 0..m {
            let mut block: Vec<bool> = (0..m).map(|_| rng.gen()).collect();
            let odd = block.iter().filter(|&&b| b).count() % 2 == 1;
            if odd != (sign == Sign::Minus) {
                block[0] = !block[0];
            }
            x.extend(block);
        }
        let x = Bitstring::new(x);
        prop_assert!(x_syndrome(&x, &spec).unwrap().iter().all(|&b| !b));
        prop_assert!(block_signs(&x, &spec).unwrap().iter().all(|&s| s == sign));
    }

    #[test]
    fn decoders_ignore_order_within_groups(m in 3usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shots: Vec<Bitstring> = (0..m * 40)
            .map(|_| Bitstring::new((0..m).map(|_| rng.gen_bool(0.2)).collect()))
            .collect();
        let mut shuffled = shots.clone();
        for chunk in shuffled.chunks_mut(m) {
            chunk.shuffle(&mut rng);
        }
        let a = SampleSet::new(Basis::X, Sign::Plus, m, shots).unwrap();
        let b = SampleSet::new(Basis::X, Sign::Plus, m, shuffled).unwrap();
        prop_assert_eq!(upsample_detect(&a).unwrap().kept, upsample_detect(&b).unwrap().kept);
        if m % 2 == 1 {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            let ca = upsample_majority_counts(&a, &mut r).unwrap();
            let cb = upsample_majority_counts(&b, &mut r).unwrap();
            prop_assert_eq!(ca, cb);
        }
        // the oracle only sees the empirical distribution
        let da = OutcomeDistribution::from_counts(m, a.shots()).unwrap();
        let db = OutcomeDistribution::from_counts(m, b.shots()).unwrap();
        prop_assert_eq!(
            exact_logical_oracle(&da, m, Decoder::Majority, Sign::Plus).unwrap(),
            exact_logical_oracle(&db, m, Decoder::Majority, Sign::Plus).unwrap()
        );
    }
}

#[test]
fn noiseless_sampling_matches_born_rule() {
    let gates = vec![
        Gate::RPhi {
            q: 0,
            theta: 1.1,
            phi: 0.3,
        },
        Gate::Xx { a: 0, b: 2, theta: 0.7 },
        Gate::RPhi {
            q: 1,
            theta: 2.0,
            phi: -1.2,
        },
        Gate::Rz { q: 2, theta: 0.4 },
        Gate::Xx {
            a: 1,
            b: 2,
            theta: -0.5,
        },
        Gate::RPhi {
            q: 2,
            theta: 0.9,
            phi: 2.1,
        },
    ];
    let c = Circuit::from_gates(3, Level::Native, gates).unwrap();
    let mut s = Statevector::zero(3).unwrap();
    s.run_ideal(&c).unwrap();
    let exact = outcome_distribution(&s);
    let n = 100_000;
    let shots = run_shots(&c, &NoiseModel::noiseless(), &BatchParams::new(n, 11)).unwrap();
    let sampled = OutcomeDistribution::from_counts(3, &shots).unwrap();
    for (i, &p) in exact.dense().iter().enumerate() {
        let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
        let q = sampled.dense()[i];
        assert!((q - p).abs() <= 5.0 * sigma, "outcome {i}: {q} vs {p}");
    }
}

#[test]
fn gate_noise_has_no_sign_bias() {
    let model = NoiseModel::new(0.01, 0.03, 0.0).unwrap();
    for m in [3, 5] {
        let n = 20_000;
        let plus = run_batch(
            &ghz_x(m, Sign::Plus),
            &model,
            Basis::X,
            Sign::Plus,
            m,
            &BatchParams::new(n, 21),
        )
        .unwrap();
        let minus = run_batch(
            &ghz_x(m, Sign::Minus),
            &model,
            Basis::X,
            Sign::Minus,
            m,
            &BatchParams::new(n, 22),
        )
        .unwrap();
        let a = sign_fraction(&plus, Sign::Plus).unwrap();
        let b = sign_fraction(&minus, Sign::Minus).unwrap();
        let sigma = (a.sigma.powi(2) + b.sigma.powi(2)).sqrt();
        assert!(
            (a.value - b.value).abs() <= 3.0 * sigma,
            "m={m}: {} vs {}",
            a.value,
            b.value
        );
    }
}

#[test]
fn more_two_qubit_noise_lowers_fx() {
    let m = 4;
    let n = 20_000;
    let fx: Vec<_> = [0.0, 0.03, 0.08]
        .iter()
        .map(|&p2| {
            let model = NoiseModel::new(0.0, p2, 0.0).unwrap();
            let set = run_batch(
                &ghz_x(m, Sign::Plus),
                &model,
                Basis::X,
                Sign::Plus,
                m,
                &BatchParams::new(n, 5),
            )
            .unwrap();
            estimate_fx(&set).unwrap()
        })
        .collect();
    for w in fx.windows(2) {
        let sigma = (w[0].sigma.powi(2) + w[1].sigma.powi(2)).sqrt().max(1e-12);
        assert!(
            w[0].value - w[1].value > 5.0 * sigma,
            "{} !> {}",
            w[0].value,
            w[1].value
        );
    }
}

#[test]
fn bundled_calibration_near_measured_three_qubit_fidelity() {
    // smoke band for the shipped calibration, not a hard physical claim
    let model = NoiseConfig::default().model_for(3).unwrap();
    let set = run_batch(
        &ghz_x(3, Sign::Plus),
        &model,
        Basis::X,
        Sign::Plus,
        3,
        &BatchParams::new(20_000, 3),
    )
    .unwrap();
    let f = estimate_fx(&set).unwrap().value;
    assert!((f - 0.965).abs() <= 0.01, "F_x+ = {f}");
}

#[test]
fn bundled_nine_qubit_calibration_in_logical_band() {
    let model = NoiseConfig::default().nine_qubit_model().unwrap();
    let spec = CodeSpec::new(3).unwrap();
    let c = with_measurement_basis(
        &shor_scaler::circuits::compile_to_native(&build_shor_encoder(3, Sign::Plus).unwrap()).unwrap(),
        Basis::X,
    )
    .unwrap();
    let set = run_batch(&c, &model, Basis::X, Sign::Plus, 3, &BatchParams::new(20_000, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ok = set
        .shots()
        .iter()
        .filter(|b| {
            let signs = block_signs(b, &spec).unwrap();
            shor_scaler::code::majority_vote(&signs, &mut rng).unwrap().logical_sign == Sign::Plus
        })
        .count();
    let f = ok as f64 / set.n() as f64;
    assert!((0.98..=0.99).contains(&f), "logical fidelity {f}");
}
