//! Gate-level statevector simulation of the three-register circuit.
//!
//! Basis index layout: `u | k << n | c << 2n` where `u`, `k` are the two
//! transformed registers and `c` the modular-exponentiation register. Within
//! a register, qubit `q` holds the bit of weight `2^q`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{MeasurementDistribution, Source};
use crate::error::{LabError, Result};
use crate::noise::{noisy_rotation_angle, NoiseConfig, NoiseRealization};
use crate::numtheory::{mul_mod, pow_mod, DlogInstance};

/// Largest register width the simulator accepts (`3n` qubits in total).
pub const MAX_STATEVECTOR_BITS: u32 = 7;

const PAR_THRESHOLD: usize = 1 << 14;

fn apply_hadamard(state: &mut [Complex64], qubit: u32) {
    let bit = 1usize << qubit;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let pair = |chunk: &mut [Complex64]| {
        let (lo, hi) = chunk.split_at_mut(bit);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = (x + y) * h;
            *b = (x - y) * h;
        }
    };
    if state.len() >= PAR_THRESHOLD {
        state.par_chunks_mut(2 * bit).for_each(pair);
    } else {
        state.chunks_mut(2 * bit).for_each(pair);
    }
}

fn apply_controlled_phase(state: &mut [Complex64], control: u32, target: u32, angle: f64) {
    let mask = (1usize << control) | (1usize << target);
    let phase = Complex64::cis(angle);
    let kick = |(i, a): (usize, &mut Complex64)| {
        if i & mask == mask {
            *a *= phase;
        }
    };
    if state.len() >= PAR_THRESHOLD {
        state.par_iter_mut().enumerate().for_each(kick);
    } else {
        state.iter_mut().enumerate().for_each(kick);
    }
}

fn apply_swap(state: &mut [Complex64], q1: u32, q2: u32) {
    let (b1, b2) = (1usize << q1, 1usize << q2);
    for i in 0..state.len() {
        // visit each swapped pair once, from the side with q1 set
        if i & b1 != 0 && i & b2 == 0 {
            state.swap(i, i ^ b1 ^ b2);
        }
    }
}

/// Noisy QFT on the `n` qubits starting at `offset`, using `rows` as the
/// per-gate draws. Row `j` processes register qubit `n-1-j`; the final swaps
/// reverse the qubit order.
pub fn apply_noisy_qft(
    state: &mut [Complex64],
    offset: u32,
    n: u32,
    b: u32,
    epsilon: f64,
    rows: &[Vec<f64>],
) {
    for j in 0..n {
        let target = n - 1 - j;
        apply_hadamard(state, offset + target);
        for k in 2..=(n - j) {
            let control = target - (k - 1);
            let r = if k >= b && epsilon != 0.0 {
                rows[j as usize][(k - b) as usize]
            } else {
                0.0
            };
            let angle = noisy_rotation_angle(k, b, epsilon, r);
            apply_controlled_phase(state, offset + control, offset + target, angle);
        }
    }
    for q in 0..n / 2 {
        apply_swap(state, offset + q, offset + n - 1 - q);
    }
}

/// `Σ_t v^{[t]} · 0.u^{[n-t-1]}…u^{[0]}` in turns (unreduced), i.e. the phase
/// the exact circuit's product form assigns to `|u> -> |v>`.
pub fn product_form_phase(u: u64, v: u64, n: u32) -> f64 {
    (0..n)
        .filter(|t| v >> t & 1 == 1)
        .map(|t| {
            let width = n - t;
            (u & ((1u64 << width) - 1)) as f64 / (1u64 << width) as f64
        })
        .sum()
}

/// Runs the full circuit and returns the Born distribution over `(v, w, u*)`.
pub fn statevector_run(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    realization_id: Option<u64>,
) -> Result<MeasurementDistribution> {
    let n = inst.n;
    if n > MAX_STATEVECTOR_BITS {
        return Err(LabError::Size(format!(
            "statevector needs 3n = {} qubits; cap is n = {MAX_STATEVECTOR_BITS}",
            3 * n
        )));
    }
    assert_eq!(real.n(), n, "realization sized for a different register");
    let m = inst.order();
    let dim = inst.dim() as usize;
    let mut state = vec![Complex64::new(0.0, 0.0); dim * dim * dim];
    let amp = Complex64::new(1.0 / m as f64, 0.0);
    // y^-1 = g^-d, so g^u y^-k = g^(u - dk)
    let y_inv = pow_mod(inst.y, m - 1, inst.p);
    let mut y_inv_k = 1u64;
    for k in 0..m {
        let mut c = y_inv_k;
        for u in 0..m {
            state[u as usize | (k as usize) << n | (c as usize) << (2 * n)] = amp;
            c = mul_mod(c, inst.g, inst.p);
        }
        y_inv_k = mul_mod(y_inv_k, y_inv, inst.p);
    }

    apply_noisy_qft(&mut state, 0, n, cfg.b, cfg.epsilon, real.r());
    apply_noisy_qft(&mut state, n, n, cfg.b, cfg.epsilon, real.rho());

    // discrete log table for the third register
    let mut log_of = vec![u64::MAX; dim];
    let mut c = 1u64;
    for e in 0..m {
        log_of[c as usize] = e;
        c = mul_mod(c, inst.g, inst.p);
    }

    let mut dist = MeasurementDistribution::zeroed(inst, Source::Statevector, realization_id);
    let mut stray = 0.0;
    let reg_mask = dim - 1;
    for (i, a) in state.iter().enumerate() {
        let v = (i & reg_mask) as u64;
        let w = ((i >> n) & reg_mask) as u64;
        let c = i >> (2 * n);
        let pr = a.norm_sqr();
        match log_of[c] {
            u64::MAX => stray += pr,
            u_star => *dist.slot(v, w, u_star) += pr,
        }
    }
    assert!(stray < 1e-12, "probability {stray} outside the subgroup support");
    Ok(dist)
}
