//! Closed-form evaluation of the outcome probabilities.
//!
//! For outcome `(v, w, g^{u*})` the probability is
//!
//! ```text
//! p = |Σ_k exp(2πi θ_k)|² / (2^{2n} (P-1)²)
//! θ_k = (u_k v + k w)/2^n + (ε/2^b) [N_r(u_k, v) + N_ρ(k, w)]
//! ```
//!
//! where `N_r`, `N_ρ` are the register noise sums of [`crate::noise::register_noise`].
//! The noiseless part is computed in exact integer arithmetic mod `2^n`; every
//! term of the noise expansion is kept.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{u_k, MeasurementDistribution, Source};
use crate::error::{LabError, Result};
use crate::noise::{register_noise, row_noise, NoiseConfig, NoiseRealization};
use crate::numtheory::DlogInstance;
use crate::sum::ComplexSum;

/// Outcome tables larger than this many entries are refused.
const MAX_TABLE_ENTRIES: u64 = 1 << 28;

#[inline]
fn cis_turns(turns: f64) -> Complex64 {
    Complex64::cis(std::f64::consts::TAU * (turns - turns.floor()))
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

fn normalization(inst: &DlogInstance) -> f64 {
    let dim = inst.dim() as f64;
    let m = inst.order() as f64;
    1.0 / (dim * dim * m * m)
}

/// Noise-free `p(v, w, g^{u*})`.
pub fn exact_probability(inst: &DlogInstance, v: u64, w: u64, u_star: u64) -> f64 {
    let mask = inst.dim() - 1;
    let scale = 1.0 / inst.dim() as f64;
    let mut acc = ComplexSum::new();
    for k in 0..inst.order() {
        let uk = u_k(inst.d, u_star, k, inst.p);
        let num = (uk.wrapping_mul(v)).wrapping_add(k.wrapping_mul(w)) & mask;
        acc += cis_turns(num as f64 * scale);
    }
    acc.value().norm_sqr() * normalization(inst)
}

/// Full phase `θ_k` in turns, reduced to `[0, 1)`.
pub fn noisy_phase(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    v: u64,
    w: u64,
    k: u64,
    u_star: u64,
) -> f64 {
    let n = inst.n;
    let mask = inst.dim() - 1;
    let uk = u_k(inst.d, u_star, k, inst.p);
    let noiseless = ((uk.wrapping_mul(v)).wrapping_add(k.wrapping_mul(w)) & mask) as f64
        / inst.dim() as f64;
    if cfg.epsilon == 0.0 {
        return noiseless;
    }
    let scale = cfg.epsilon / f64::powi(2.0, cfg.b as i32);
    let noise = register_noise(real.r(), n, cfg.b, uk, v) + register_noise(real.rho(), n, cfg.b, k, w);
    frac(noiseless + scale * noise)
}

/// `p(v, w, g^{u*})` under one noise realization, by direct summation of [`noisy_phase`].
pub fn noisy_probability(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    v: u64,
    w: u64,
    u_star: u64,
) -> f64 {
    let mut acc = ComplexSum::new();
    for k in 0..inst.order() {
        acc += cis_turns(noisy_phase(inst, cfg, real, v, w, k, u_star));
    }
    acc.value().norm_sqr() * normalization(inst)
}

/// Per-realization precomputation for bulk evaluation.
///
/// The amplitude sum factors as `Σ_k A_v[u_k] · B_w[k]` with
/// `A_v[u] = exp(2πi Φ_r(u, v))` and `B_w[k] = exp(2πi Φ_ρ(k, w))`, so each
/// `v` and `w` needs its phase vector built once.
pub struct PhaseEvaluator<'a> {
    inst: &'a DlogInstance,
    scale: f64,
    // row_tables[j][x] = row noise of row j for register value x < P-1
    r_tables: Vec<Vec<f64>>,
    rho_tables: Vec<Vec<f64>>,
}

impl<'a> PhaseEvaluator<'a> {
    pub fn new(inst: &'a DlogInstance, cfg: &NoiseConfig, real: &NoiseRealization) -> Self {
        assert_eq!(real.n(), inst.n, "realization sized for a different register");
        assert_eq!(real.b(), cfg.b, "realization drawn with a different cutoff");
        let scale = cfg.epsilon / f64::powi(2.0, cfg.b as i32);
        if scale == 0.0 {
            return Self::noise_free(inst);
        }
        let build = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .enumerate()
                .map(|(j, row)| {
                    (0..inst.order())
                        .map(|x| row_noise(row, inst.n, cfg.b, j as u32, x))
                        .collect()
                })
                .collect()
        };
        Self {
            inst,
            scale,
            r_tables: build(real.r()),
            rho_tables: build(real.rho()),
        }
    }

    pub fn noise_free(inst: &'a DlogInstance) -> Self {
        Self {
            inst,
            scale: 0.0,
            r_tables: Vec::new(),
            rho_tables: Vec::new(),
        }
    }

    pub fn instance(&self) -> &DlogInstance {
        self.inst
    }

    fn amplitudes(&self, out: u64, tables: &[Vec<f64>]) -> Vec<Complex64> {
        let mask = self.inst.dim() - 1;
        let inv_dim = 1.0 / self.inst.dim() as f64;
        let active: Vec<&Vec<f64>> = tables
            .iter()
            .enumerate()
            .filter(|(j, _)| out >> j & 1 == 1)
            .map(|(_, t)| t)
            .collect();
        (0..self.inst.order())
            .map(|x| {
                let base = (x.wrapping_mul(out) & mask) as f64 * inv_dim;
                if active.is_empty() {
                    cis_turns(base)
                } else {
                    let noise: f64 = active.iter().map(|t| t[x as usize]).sum();
                    cis_turns(base + self.scale * noise)
                }
            })
            .collect()
    }

    /// `A_v[u]` for `u < P-1`.
    pub fn first_register(&self, v: u64) -> Vec<Complex64> {
        self.amplitudes(v, &self.r_tables)
    }

    /// `B_w[k]` for `k < P-1`.
    pub fn second_register(&self, w: u64) -> Vec<Complex64> {
        self.amplitudes(w, &self.rho_tables)
    }

    /// Probability of `(v, w, g^{u*})` from prebuilt register vectors.
    pub fn probability(&self, first: &[Complex64], second: &[Complex64], u_star: u64) -> f64 {
        let m = self.inst.order();
        let step = self.inst.d % m;
        let mut uk = u_star % m;
        let mut acc = ComplexSum::new();
        for b in second {
            acc += first[uk as usize] * b;
            uk += step;
            if uk >= m {
                uk -= m;
            }
        }
        acc.value().norm_sqr() * normalization(self.inst)
    }
}

/// Every outcome probability under one realization, via [`PhaseEvaluator`].
pub fn closed_form_distribution(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    realization_id: Option<u64>,
) -> Result<MeasurementDistribution> {
    let entries = inst.dim() * inst.dim() * inst.order();
    if entries > MAX_TABLE_ENTRIES {
        return Err(LabError::Size(format!(
            "{entries} outcomes exceed the dense table cap of {MAX_TABLE_ENTRIES}"
        )));
    }
    let eval = PhaseEvaluator::new(inst, cfg, real);
    let seconds: Vec<Vec<Complex64>> = (0..inst.dim()).map(|w| eval.second_register(w)).collect();
    let mut dist = MeasurementDistribution::zeroed(inst, Source::ClosedForm, realization_id);
    let block = (inst.dim() * inst.order()) as usize;
    let m = inst.order() as usize;
    dist.probs
        .par_chunks_mut(block)
        .enumerate()
        .for_each(|(v, chunk)| {
            let first = eval.first_register(v as u64);
            for (w, second) in seconds.iter().enumerate() {
                for u_star in 0..m {
                    chunk[w * m + u_star] = eval.probability(&first, second, u_star as u64);
                }
            }
        });
    Ok(dist)
}
