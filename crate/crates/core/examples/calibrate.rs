//! Prints simulated F_z and F_x+ per block size for a grid of noise
//! parameters. Used to pick the values in `config/noise_default.json`.
//!
//!     cargo run --release --example calibrate -- <p1> <p2-scale> <p_ro>

use shor_scaler::circuits::{build_ghz_native, with_measurement_basis};
use shor_scaler::noise::{run_batch, BatchParams, NoiseConfig};
use shor_scaler::stats::{estimate_fx, estimate_fz};
use shor_scaler::{Basis, GhzSpec, Sign};

fn main() -> shor_scaler::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let cfg = NoiseConfig::default();
    let p1 = args.first().copied().unwrap_or(cfg.p1);
    let scale = args.get(1).copied().unwrap_or(1.0);
    let p_ro = args.get(2).copied().filter(|p| *p >= 0.0);
    for m in 3..=7 {
        let mut model = cfg.model_for(m)?;
        model.p1 = p1;
        model.p2 = (model.p2 * scale).min(1.0);
        if let Some(p) = p_ro {
            model.p_ro = p;
        }
        let prep = build_ghz_native(&GhzSpec::new(m, Sign::Plus)?);
        let params = BatchParams::new(100_000, 1);
        let z = run_batch(
            &with_measurement_basis(&prep, Basis::Z)?,
            &model,
            Basis::Z,
            Sign::Plus,
            m,
            &params,
        )?;
        let x = run_batch(
            &with_measurement_basis(&prep, Basis::X)?,
            &model,
            Basis::X,
            Sign::Plus,
            m,
            &params,
        )?;
        println!(
            "m={m} p1={p1} p2={:.4} p_ro={:.4}  Fz={:.4}  Fx+={:.4}",
            model.p2,
            model.p_ro,
            estimate_fz(&z)?.value,
            estimate_fx(&x)?.value
        );
    }
    Ok(())
}
