//! Noisy GHZ preparation and up-sampled [[m², 1, m]] Shor-code readout.
//!
//! The crate simulates GHZ blocks in a trapped-ion native gate set under
//! Pauli-trajectory noise, turns groups of block shots into logical shots,
//! decodes them by majority vote or unanimity, and checks every Monte Carlo
//! number against closed-form expressions and brute-force oracles.
//!
//! Module map:
//! - [`qsim`]: dense statevector engine and native gates
//! - [`circuits`]: GHZ and encoder builders, native compilation
//! - [`noise`]: depolarizing faults, readout flips, seeded batches
//! - [`code`]: syndromes and the post-processing decoders
//! - [`stats`]: estimators, up-sampling, exact oracle
//! - [`analytic`]: closed-form fidelity, yield and inverse problems
//! - [`cli`]: the reproduction driver behind the `shor-scaler` binary

pub mod analytic;
pub mod circuits;
pub mod cli;
pub mod code;
pub mod error;
pub mod noise;
pub mod qsim;
pub mod rng;
pub mod stats;

pub use circuits::{Basis, CodeSpec, GhzSpec, Sign};
pub use error::{Error, Result};
pub use noise::{NoiseConfig, NoiseModel};
pub use qsim::{Bitstring, Circuit, Gate, Level, Statevector};
pub use stats::{Decoder, FidelityEstimate, SampleSet};
