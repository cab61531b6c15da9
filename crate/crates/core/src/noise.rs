//! Relative, semi-gate-correlated rotation noise.
//!
//! Every controlled-`R_k` gate with `k >= b` rotates by `2π(1 + εr)/2^k`
//! instead of `2π/2^k`, with one independent standard-normal `r` per gate.
//! Hadamards, swaps and the gates with `k < b` are exact.
//!
//! A QFT on `n` qubits has noisy gates in output rows `j = 0..=n-b`; row `j`
//! carries `n - b - j + 1` of them. The draw `r[j][i]` belongs to the gate
//! `R_{b+i}` of row `j`, whose control is input bit `n - b - j - i`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Gates `R_k` with `k >= b` are noisy.
    pub b: u32,
    pub epsilon: f64,
    pub master_seed: u64,
}

impl NoiseConfig {
    pub fn new(b: u32, epsilon: f64, master_seed: u64) -> Self {
        assert!(b >= 2, "cutoff b must be at least 2");
        assert!(epsilon >= 0.0, "noise level must be non-negative");
        Self {
            b,
            epsilon,
            master_seed,
        }
    }

    /// Noise switched off.
    pub fn exact(b: u32) -> Self {
        Self::new(b, 0.0, 0)
    }

    /// The realization used by trial `trial` of an `n`-qubit experiment.
    pub fn realization(&self, n: u32, trial: u64) -> NoiseRealization {
        let mut rng = seed::stream(self.master_seed, trial);
        sample_noise(n, self.b, &mut rng)
    }
}

/// Rotation angle in radians of the (possibly noisy) controlled-`R_k` gate.
pub fn noisy_rotation_angle(k: u32, b: u32, epsilon: f64, r: f64) -> f64 {
    assert!(k >= 1, "gate exponent must be positive");
    let scale = if k >= b { 1.0 + epsilon * r } else { 1.0 };
    2.0 * std::f64::consts::PI * scale / f64::powi(2.0, k as i32)
}

/// Triangular arrays of standard-normal draws for the two transformed
/// registers: `r` for the first, `rho` for the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    n: u32,
    b: u32,
    r: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
}

/// Number of noisy rows `n - b + 1`, or zero when `b > n`.
pub fn noisy_rows(n: u32, b: u32) -> usize {
    if b > n {
        0
    } else {
        (n - b + 1) as usize
    }
}

fn triangular<F: FnMut() -> f64>(n: u32, b: u32, mut draw: F) -> Vec<Vec<f64>> {
    let rows = noisy_rows(n, b);
    (0..rows)
        .map(|j| (0..rows - j).map(|_| draw()).collect())
        .collect()
}

/// Fresh realization; `r` is filled row by row before `rho`.
pub fn sample_noise<R: Rng + ?Sized>(n: u32, b: u32, rng: &mut R) -> NoiseRealization {
    let r = triangular(n, b, || rng.sample(StandardNormal));
    let rho = triangular(n, b, || rng.sample(StandardNormal));
    NoiseRealization { n, b, r, rho }
}

impl NoiseRealization {
    pub fn zeros(n: u32, b: u32) -> Self {
        Self {
            n,
            b,
            r: triangular(n, b, || 0.0),
            rho: triangular(n, b, || 0.0),
        }
    }

    /// Builds a realization from explicit arrays, checking the triangular shape.
    pub fn from_arrays(n: u32, b: u32, r: Vec<Vec<f64>>, rho: Vec<Vec<f64>>) -> Option<Self> {
        let rows = noisy_rows(n, b);
        let shaped = |a: &Vec<Vec<f64>>| {
            a.len() == rows && a.iter().enumerate().all(|(j, row)| row.len() == rows - j)
        };
        (shaped(&r) && shaped(&rho)).then_some(Self { n, b, r, rho })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    /// Draws for the first register, `r[j][i]`.
    pub fn r(&self) -> &[Vec<f64>] {
        &self.r
    }

    /// Draws for the second register, `rho[j][i]`.
    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }

    /// Entries per register, `(n-b+1)(n-b+2)/2`.
    pub fn entries_per_register(&self) -> usize {
        self.r.iter().map(Vec::len).sum()
    }
}

/// Noise contribution of one register, in units of `ε/2^b` turns:
/// `Σ_{j ≤ n-b, out bit j set} Σ_i rows[j][i] · x^{[n-b-j-i]} / 2^i`.
pub fn register_noise(rows: &[Vec<f64>], n: u32, b: u32, x: u64, out: u64) -> f64 {
    let mut total = 0.0;
    for (j, row) in rows.iter().enumerate() {
        if out >> j & 1 == 0 {
            continue;
        }
        total += row_noise(row, n, b, j as u32, x);
    }
    total
}

/// `Σ_i row[i] · x^{[n-b-j-i]} / 2^i` for a single output row `j`.
pub fn row_noise(row: &[f64], n: u32, b: u32, j: u32, x: u64) -> f64 {
    let top = n - b - j;
    let mut acc = 0.0;
    let mut weight = 1.0;
    for (i, &r) in row.iter().enumerate() {
        if x >> (top - i as u32) & 1 == 1 {
            acc += r * weight;
        }
        weight *= 0.5;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn rotation_angle_examples() {
        assert_eq!(noisy_rotation_angle(1, 2, 0.0, 123.0), PI);
        assert!((noisy_rotation_angle(2, 2, 0.5, 1.0) - 0.75 * PI).abs() < 1e-15);
        assert_eq!(noisy_rotation_angle(3, 2, 1.0, -1.0), 0.0);
        // below the cutoff the draw is ignored
        assert_eq!(noisy_rotation_angle(2, 3, 1.0, 5.0), PI / 2.0);
    }

    #[test]
    fn shapes_are_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = sample_noise(6, 4, &mut rng);
        assert_eq!(real.entries_per_register(), 6);
        assert_eq!(real.r().iter().map(Vec::len).collect::<Vec<_>>(), [3, 2, 1]);
        assert_eq!(real.rho().iter().map(Vec::len).collect::<Vec<_>>(), [3, 2, 1]);
        assert_ne!(real.r(), real.rho());

        let empty = sample_noise(3, 4, &mut rng);
        assert_eq!(empty.entries_per_register(), 0);
        assert!(empty.r().is_empty() && empty.rho().is_empty());

        for n in 2..=32 {
            for b in 2..=n {
                let real = NoiseRealization::zeros(n, b);
                let m = (n - b + 1) as usize;
                assert_eq!(real.entries_per_register(), m * (m + 1) / 2);
                for (j, row) in real.r().iter().enumerate() {
                    assert_eq!(row.len(), m - j);
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let cfg = NoiseConfig::new(2, 1.0, 99);
        assert_eq!(cfg.realization(8, 5), cfg.realization(8, 5));
        assert_ne!(cfg.realization(8, 5), cfg.realization(8, 6));
    }

    #[test]
    fn pooled_draws_look_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut xs = Vec::with_capacity(1_000_000);
        while xs.len() < 1_000_000 {
            let real = sample_noise(32, 2, &mut rng);
            xs.extend(real.r().iter().flatten());
            xs.extend(real.rho().iter().flatten());
        }
        xs.truncate(1_000_000);
        let n = xs.len() as f64;
        let mean = crate::sum::sum_f64(xs.iter().copied()) / n;
        let var = crate::sum::sum_f64(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
        // se(mean) = 1/sqrt(n); se(var) = sqrt(2/n) for a normal population
        assert!(mean.abs() < 5.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn from_arrays_checks_shape() {
        assert!(NoiseRealization::from_arrays(3, 2, vec![vec![0.0; 2], vec![0.0]], vec![vec![0.0; 2], vec![0.0]]).is_some());
        assert!(NoiseRealization::from_arrays(3, 2, vec![vec![0.0; 2]], vec![vec![0.0; 2], vec![0.0]]).is_none());
    }

    #[test]
    fn first_row_index_convention() {
        // n = 5, b = 2: row 0 is r0 x^[3] + r1 x^[2]/2 + r2 x^[1]/4 + r3 x^[0]/8
        let row = [1.0, 10.0, 100.0, 1000.0];
        assert_eq!(row_noise(&row, 5, 2, 0, 0b01000), 1.0);
        assert_eq!(row_noise(&row, 5, 2, 0, 0b00100), 5.0);
        assert_eq!(row_noise(&row, 5, 2, 0, 0b00010), 25.0);
        assert_eq!(row_noise(&row, 5, 2, 0, 0b00001), 125.0);
        // x^[4] never enters row 0
        assert_eq!(row_noise(&row, 5, 2, 0, 0b10000), 0.0);
        // last noisy row j = n-b has the single term r0 x^[0]
        assert_eq!(row_noise(&[7.0], 5, 2, 3, 1), 7.0);
        assert_eq!(row_noise(&[7.0], 5, 2, 3, 2), 0.0);
    }
}
