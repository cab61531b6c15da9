//! Measurement distribution of the discrete-log circuit after (noisy) QFTs
//! on the first two registers.
//!
//! Two evaluators are provided and cross-checked against each other:
//! [`closed_form`] sums the phase expression directly, [`statevector`] runs
//! the gate-level circuit on a full `3n`-qubit state.
//!
//! Bit convention: `x^{[j]}` is the bit of weight `2^j`.

pub mod closed_form;
pub mod statevector;

use serde::{Deserialize, Serialize};

pub use closed_form::{
    closed_form_distribution, exact_probability, noisy_phase, noisy_probability, PhaseEvaluator,
};
pub use statevector::{statevector_run, MAX_STATEVECTOR_BITS};

use crate::numtheory::DlogInstance;

/// `u_k = d·k + u* mod (P-1)`.
#[inline]
pub fn u_k(d: u64, u_star: u64, k: u64, p: u64) -> u64 {
    let m = p - 1;
    ((d as u128 * k as u128 + u_star as u128) % m as u128) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Statevector,
}

/// Dense table of `p(v, w, g^{u*})` over `v, w < 2^n` and `u* < P-1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementDistribution {
    pub n: u32,
    pub p: u64,
    pub source: Source,
    /// Trial index of the noise realization, `None` for noise-free runs.
    pub realization_id: Option<u64>,
    probs: Vec<f64>,
}

impl MeasurementDistribution {
    pub(crate) fn zeroed(inst: &DlogInstance, source: Source, realization_id: Option<u64>) -> Self {
        let len = (inst.dim() * inst.dim() * inst.order()) as usize;
        Self {
            n: inst.n,
            p: inst.p,
            source,
            realization_id,
            probs: vec![0.0; len],
        }
    }

    #[inline]
    fn index(&self, v: u64, w: u64, u_star: u64) -> usize {
        let dim = 1u64 << self.n;
        ((v * dim + w) * (self.p - 1) + u_star) as usize
    }

    pub fn get(&self, v: u64, w: u64, u_star: u64) -> f64 {
        self.probs[self.index(v, w, u_star)]
    }

    pub(crate) fn slot(&mut self, v: u64, w: u64, u_star: u64) -> &mut f64 {
        let i = self.index(v, w, u_star);
        &mut self.probs[i]
    }

    /// `(v, w, u*, probability)` for every outcome.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64, u64, f64)> + '_ {
        let dim = 1u64 << self.n;
        let m = self.p - 1;
        self.probs.iter().enumerate().map(move |(i, &pr)| {
            let i = i as u64;
            let u_star = i % m;
            let vw = i / m;
            (vw / dim, vw % dim, u_star, pr)
        })
    }

    pub fn total(&self) -> f64 {
        crate::sum::sum_f64(self.probs.iter().copied())
    }

    /// Marginal `p(v, w) = Σ_{u*} p(v, w, g^{u*})`.
    pub fn marginal(&self, v: u64, w: u64) -> f64 {
        let start = self.index(v, w, 0);
        crate::sum::sum_f64(self.probs[start..start + (self.p - 1) as usize].iter().copied())
    }

    /// Largest pointwise difference, `None` if the tables do not line up.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.n == other.n && self.p == other.p).then(|| {
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn min_probability(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
