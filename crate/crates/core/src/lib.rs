//! Simulation laboratory for Shor's discrete-log algorithm run through a
//! noisy quantum Fourier transform.
//!
//! The crate is split by concern:
//!
//! - [`numtheory`]: primes, factorization, generators, orders, discrete logs.
//! - [`noise`]: the relative, semi-gate-correlated rotation noise model.
//! - [`qft`]: two independent evaluators of the measurement distribution,
//!   a closed-form phase-sum evaluator and a gate-level statevector simulator.
//! - [`peaks`]: the good Fourier-peak sets and the counting quantities around them.
//! - [`lemma_mc`]: Monte Carlo checks of the Gaussian dephasing bound.
//! - [`harness`]: experiment orchestration, sweeps and CSV/JSON output.
//!
//! Everything that draws random numbers takes either an explicit RNG or a
//! master seed; see [`seed`] for how per-trial streams are derived.

pub mod error;
pub mod harness;
pub mod lemma_mc;
pub mod noise;
pub mod numtheory;
pub mod peaks;
pub mod qft;
pub mod seed;
pub mod sum;

pub use error::{LabError, Result};
pub use noise::{NoiseConfig, NoiseRealization};
pub use numtheory::{DlogInstance, PrimeClassification, PrimeMode};
pub use peaks::{Comparison, Gamma, PeakSet, PeakSetParams};
pub use qft::{MeasurementDistribution, Source};
