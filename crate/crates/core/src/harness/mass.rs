//! Success mass `Σ_{(v,w) ∈ G} E[p(v, w)]`.
//!
//! Two evaluation paths share one set of per-register phase vectors:
//!
//! - all `u*` at once: with `A_v[u]`, `B_w[k]` from [`PhaseEvaluator`] and
//!   `C_w[x] = Σ_{k : dk ≡ x} B_w[k]`, the amplitude at `u*` is the
//!   correlation `Σ_x A_v[x + u*] C_w[x]`, so by Parseval
//!   `Σ_{u*} |S(u*)|² = (1/N) Σ_f |Â_v[f]|² |Ĉ_w[-f]|²` with `N = P-1`;
//! - a uniform sample of `u*` without replacement, rescaled by `N / samples`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::noise::{sample_noise, NoiseConfig, NoiseRealization};
use crate::numtheory::DlogInstance;
use crate::peaks::PeakSet;
use crate::qft::PhaseEvaluator;
use crate::seed;
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub estimate: f64,
    pub std_err: f64,
}

fn spectrum_power(fft: &Arc<dyn Fft<f64>>, mut buf: Vec<Complex64>) -> Vec<f64> {
    fft.process(&mut buf);
    buf.iter().map(|z| z.norm_sqr()).collect()
}

/// `Σ_{(v,w) ∈ G} Σ_{u*} p(v, w, g^{u*})` for one realization, exact in `u*`.
fn mass_all_ustar(eval: &PhaseEvaluator, peaks: &PeakSet, fft: &Arc<dyn Fft<f64>>) -> f64 {
    let inst = eval.instance();
    let m = inst.order() as usize;
    let d = (inst.d % inst.order()) as usize;
    let ws: Vec<u64> = {
        let mut ws: Vec<u64> = peaks.entries().iter().flat_map(|e| e.ws.iter().copied()).collect();
        ws.sort_unstable();
        ws.dedup();
        ws
    };
    // |Ĉ_w[-f]|² for every w that occurs, indexed by f
    let c_power: BTreeMap<u64, Vec<f64>> = ws
        .par_iter()
        .map(|&w| {
            let b = eval.second_register(w);
            let mut c = vec![Complex64::new(0.0, 0.0); m];
            let mut x = 0usize;
            for bk in b {
                c[x] += bk;
                x += d;
                if x >= m {
                    x -= m;
                }
            }
            let power = spectrum_power(fft, c);
            let flipped: Vec<f64> = (0..m).map(|f| power[(m - f) % m]).collect();
            (w, flipped)
        })
        .collect();
    let per_v: Vec<f64> = peaks
        .entries()
        .par_iter()
        .map(|e| {
            let a_power = spectrum_power(fft, eval.first_register(e.v));
            let mut acc = NeumaierSum::new();
            for w in &e.ws {
                let c = &c_power[w];
                acc += crate::sum::sum_f64(a_power.iter().zip(c).map(|(x, y)| x * y));
            }
            acc.value()
        })
        .collect();
    let dim = inst.dim() as f64;
    let norm = 1.0 / (m as f64 * dim * dim * (m as f64).powi(2));
    crate::sum::sum_f64(per_v) * norm
}

/// Same quantity from a subset of `u*`, rescaled to all `P-1` values.
fn mass_sampled_ustar(eval: &PhaseEvaluator, peaks: &PeakSet, ustars: &[u64]) -> f64 {
    let inst = eval.instance();
    let seconds: BTreeMap<u64, Vec<Complex64>> = {
        let mut ws: Vec<u64> = peaks.entries().iter().flat_map(|e| e.ws.iter().copied()).collect();
        ws.sort_unstable();
        ws.dedup();
        ws.into_par_iter().map(|w| (w, eval.second_register(w))).collect()
    };
    let per_v: Vec<f64> = peaks
        .entries()
        .par_iter()
        .map(|e| {
            let first = eval.first_register(e.v);
            let mut acc = NeumaierSum::new();
            for w in &e.ws {
                for &u in ustars {
                    acc += eval.probability(&first, &seconds[w], u);
                }
            }
            acc.value()
        })
        .collect();
    crate::sum::sum_f64(per_v) * inst.order() as f64 / ustars.len() as f64
}

fn check_samples(inst: &DlogInstance, trials: u64, ustar_samples: u64) -> Result<()> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if ustar_samples == 0 || ustar_samples > inst.order() {
        return domain(format!(
            "ustar_samples = {ustar_samples} outside 1..={}",
            inst.order()
        ));
    }
    Ok(())
}

/// Mass on `peaks` for a single fixed realization.
pub fn realization_mass(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    peaks: &PeakSet,
    ustars: Option<&[u64]>,
) -> f64 {
    let eval = PhaseEvaluator::new(inst, cfg, real);
    match ustars {
        Some(us) if (us.len() as u64) < inst.order() => mass_sampled_ustar(&eval, peaks, us),
        _ => {
            let fft = FftPlanner::new().plan_fft_forward(inst.order() as usize);
            mass_all_ustar(&eval, peaks, &fft)
        }
    }
}

/// Noise-free mass on `peaks`, exact in `u*`.
pub fn noise_free_mass(inst: &DlogInstance, peaks: &PeakSet) -> f64 {
    let fft = FftPlanner::new().plan_fft_forward(inst.order() as usize);
    mass_all_ustar(&PhaseEvaluator::noise_free(inst), peaks, &fft)
}

/// Mean success mass over `trials` noise realizations.
///
/// Trial `t` draws its realization from `seed::stream(cfg.master_seed, t)` and
/// then, when `ustar_samples < P-1`, its `u*` subset from the same stream.
pub fn estimate_success_mass(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    peaks: &PeakSet,
    trials: u64,
    ustar_samples: u64,
) -> Result<MassEstimate> {
    check_samples(inst, trials, ustar_samples)?;
    if peaks.is_empty() {
        log::warn!("empty peak set for P = {}; mass is 0", inst.p);
        return Ok(MassEstimate {
            estimate: 0.0,
            std_err: 0.0,
        });
    }
    let m = inst.order();
    let full = ustar_samples == m;
    if cfg.epsilon == 0.0 && full {
        return Ok(MassEstimate {
            estimate: noise_free_mass(inst, peaks),
            std_err: 0.0,
        });
    }
    let fft = FftPlanner::new().plan_fft_forward(m as usize);
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = seed::stream(cfg.master_seed, t);
            let real = sample_noise(inst.n, cfg.b, &mut rng);
            let eval = PhaseEvaluator::new(inst, cfg, &real);
            if full {
                mass_all_ustar(&eval, peaks, &fft)
            } else {
                let mut us: Vec<u64> = rand::seq::index::sample(&mut rng, m as usize, ustar_samples as usize)
                    .iter()
                    .map(|u| u as u64)
                    .collect();
                us.sort_unstable();
                mass_sampled_ustar(&eval, peaks, &us)
            }
        })
        .collect();
    let n = trials as f64;
    let mean = crate::sum::sum_f64(samples.iter().copied()) / n;
    let std_err = if trials > 1 {
        let var = crate::sum::sum_f64(samples.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MassEstimate {
        estimate: mean,
        std_err,
    })
}
