//! Monte Carlo check of the Gaussian dephasing bound
//!
//! ```text
//! E |Σ_k ω_a^{φ_k + Σ_k}|²  ≤  K + 2ζ C(K,2) + 2 C(K,2) e^{-2π² t}
//! ```
//!
//! with `ω_a = e^{2πi/a}`, `Σ_k = Σ_{i ∈ J_k} r_i` over i.i.d. standard normals,
//! and `ζ` the fraction of unordered pairs with `|J_k Δ J_k'| < a² t`.
//!
//! Index sets live in a universe of at most 64 positions and are stored as
//! bit masks. Phases are stored reduced mod `a`, so that `ω_a^{φ}` is periodic
//! in the stored value.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::noise::{NoiseConfig, NoiseRealization};
use crate::numtheory::DlogInstance;
use crate::peaks::j_mask;
use crate::qft::{noisy_phase, u_k};
use crate::seed;
use crate::sum::{ComplexSum, NeumaierSum};

/// Trials per deterministic seed chunk.
const CHUNK: u64 = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaInstance {
    pub a: f64,
    pub t: f64,
    /// Number of Gaussian positions, at most 64.
    pub universe: u32,
    /// `J_k` as masks over the universe.
    pub sets: Vec<u64>,
    /// `φ_k`, reduced to `[0, a)`.
    pub phases: Vec<f64>,
    pub zeta_emp: f64,
}

impl LemmaInstance {
    pub fn new(a: f64, t: f64, universe: u32, sets: Vec<u64>, phases: Vec<f64>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(t > 0.0 && t.is_finite()) {
            return domain(format!("need a, t > 0, got a = {a}, t = {t}"));
        }
        if universe > 64 {
            return domain(format!("universe of {universe} positions exceeds 64"));
        }
        if sets.is_empty() || sets.len() != phases.len() {
            return domain(format!(
                "{} sets against {} phases",
                sets.len(),
                phases.len()
            ));
        }
        let limit = if universe == 64 { u64::MAX } else { (1u64 << universe) - 1 };
        if sets.iter().any(|&s| s & !limit != 0) {
            return domain("index set reaches outside the universe");
        }
        let phases = phases.into_iter().map(|p| p.rem_euclid(a)).collect();
        let zeta_emp = close_pair_fraction(&sets, a * a * t);
        Ok(Self {
            a,
            t,
            universe,
            sets,
            phases,
            zeta_emp,
        })
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn bound(&self) -> f64 {
        lemma_bound(self.k() as u64, self.zeta_emp, self.t)
    }

    /// `Σ_k ω_a^{φ_k + Σ_k}` for one draw of `r` (indexed by universe position).
    pub fn amplitude_sum(&self, draws: &[f64]) -> Complex64 {
        let mut acc = ComplexSum::new();
        for (&set, &phi) in self.sets.iter().zip(&self.phases) {
            let sigma: f64 = (0..self.universe)
                .filter(|i| set >> i & 1 == 1)
                .map(|i| draws[i as usize])
                .sum();
            acc += omega(self.a, phi + sigma);
        }
        acc.value()
    }
}

#[inline]
fn omega(a: f64, x: f64) -> Complex64 {
    let turns = x / a;
    Complex64::cis(std::f64::consts::TAU * (turns - turns.floor()))
}

/// Fraction of unordered pairs `k < k'` with `|J_k Δ J_k'| < threshold`,
/// counted exactly through a histogram of distinct masks. Zero when `K = 1`.
pub fn close_pair_fraction(sets: &[u64], threshold: f64) -> f64 {
    let k = sets.len() as u128;
    if k < 2 {
        return 0.0;
    }
    let mut hist = HashMap::<u64, u64>::new();
    for &s in sets {
        *hist.entry(s).or_default() += 1;
    }
    let mut buckets: Vec<(u64, u64)> = hist.into_iter().collect();
    buckets.sort_unstable();
    let mut close = 0u128;
    for (i, &(ma, ha)) in buckets.iter().enumerate() {
        if 0.0 < threshold {
            close += ha as u128 * (ha as u128 - 1) / 2;
        }
        for &(mb, hb) in &buckets[i + 1..] {
            if ((ma ^ mb).count_ones() as f64) < threshold {
                close += ha as u128 * hb as u128;
            }
        }
    }
    close as f64 / (k * (k - 1) / 2) as f64
}

/// `K + 2ζ C(K,2) + 2 C(K,2) e^{-2π² t}`.
pub fn lemma_bound(k: u64, zeta: f64, t: f64) -> f64 {
    assert!(k >= 1, "K must be positive");
    assert!((0.0..=1.0).contains(&zeta), "zeta {zeta} outside [0, 1]");
    assert!(t > 0.0, "t must be positive");
    let pairs = (k as f64) * (k as f64 - 1.0) / 2.0;
    let decay = (-2.0 * std::f64::consts::PI.powi(2) * t).exp();
    k as f64 + 2.0 * zeta * pairs + 2.0 * pairs * decay
}

/// `2 + 2 e^{-(2π/a)² m}`: two disjoint sets of size `m` with equal phases.
pub fn disjoint_pair_analytic(a: f64, m: u32) -> f64 {
    2.0 + 2.0 * (-(std::f64::consts::TAU / a).powi(2) * m as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Largest single-trial `|Σ|²`.
    pub max_sample: f64,
    pub trials: u64,
}

struct ChunkStats {
    sum: NeumaierSum,
    sum_sq: NeumaierSum,
    max: f64,
}

/// Empirical mean of `|Σ_k ω_a^{φ_k + Σ_k}|²` over fresh normal draws.
///
/// Trials are split into fixed chunks, each with its own stream derived from
/// one seed taken from `rng`, so the result does not depend on thread count.
pub fn mc_mean<R: RngCore + ?Sized>(inst: &LemmaInstance, trials: u64, rng: &mut R) -> McEstimate {
    assert!(trials >= 2, "need at least two trials for a standard error");
    let base = rng.next_u64();
    // identical masks share their Gaussian sum, so fold them together
    let mut grouped = HashMap::<u64, ComplexSum>::new();
    for (&set, &phi) in inst.sets.iter().zip(&inst.phases) {
        *grouped.entry(set).or_default() += omega(inst.a, phi);
    }
    let mut groups: Vec<(u64, Complex64)> = grouped.into_iter().map(|(m, c)| (m, c.value())).collect();
    groups.sort_unstable_by_key(|g| g.0);
    let ceiling = (inst.k() as f64).powi(2) * (1.0 + 1e-9);
    let universe = inst.universe as usize;

    let chunks = trials.div_ceil(CHUNK);
    let stats: Vec<ChunkStats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng: ChaCha8Rng = seed::stream(base, c);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut draws = vec![0.0; universe];
            let mut st = ChunkStats {
                sum: NeumaierSum::new(),
                sum_sq: NeumaierSum::new(),
                max: 0.0,
            };
            for _ in 0..count {
                for r in draws.iter_mut() {
                    *r = rng.sample(StandardNormal);
                }
                let mut acc = ComplexSum::new();
                for &(set, coeff) in &groups {
                    let sigma: f64 = (0..universe)
                        .filter(|&i| set >> i & 1 == 1)
                        .map(|i| draws[i])
                        .sum();
                    acc += coeff * omega(inst.a, sigma);
                }
                let x = acc.value().norm_sqr();
                assert!(x <= ceiling, "|sum|^2 = {x} above K^2");
                st.sum += x;
                st.sum_sq += x * x;
                st.max = st.max.max(x);
            }
            st
        })
        .collect();

    let mut sum = NeumaierSum::new();
    let mut sum_sq = NeumaierSum::new();
    let mut max_sample: f64 = 0.0;
    for st in &stats {
        sum += st.sum.value();
        sum_sq += st.sum_sq.value();
        max_sample = max_sample.max(st.max);
    }
    let n = trials as f64;
    let mean = sum.value() / n;
    let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate {
        mean,
        std_err: (var / n).sqrt(),
        max_sample,
        trials,
    }
}

/// Builds the lemma inputs for a fixed outcome `(v, w, g^{u*})` of a real
/// instance, with `K = P-1` sets `J_k` over the `n-b+1` first-column draws
/// `r[j][0]`. Every other noise term of the realization is folded into `φ_k`,
/// so that `ω_a^{φ_k + Σ_k}` with `Σ_k = Σ_{j ∈ J_k} r[j][0]` reproduces the
/// circuit phase exactly. `a = 2^b/ε`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn extract_lemma_instance(
    inst: &DlogInstance,
    cfg: &NoiseConfig,
    real: &NoiseRealization,
    v: u64,
    w: u64,
    u_star: u64,
    t: f64,
) -> Result<LemmaInstance> {
    if !(cfg.epsilon > 0.0) {
        return domain("a = 2^b/epsilon is undefined at epsilon = 0");
    }
    if v >= inst.dim() || w >= inst.dim() || u_star >= inst.order() {
        return domain(format!("outcome ({v}, {w}, {u_star}) outside the registers"));
    }
    if cfg.b > inst.n {
        return domain(format!("b = {} exceeds n = {}", cfg.b, inst.n));
    }
    let n = inst.n;
    let b = cfg.b;
    let a = f64::powi(2.0, b as i32) / cfg.epsilon;
    let first_column: Vec<f64> = real.r().iter().map(|row| row[0]).collect();
    let mut sets = Vec::with_capacity(inst.order() as usize);
    let mut phases = Vec::with_capacity(inst.order() as usize);
    for k in 0..inst.order() {
        let uk = u_k(inst.d, u_star, k, inst.p);
        let mask = j_mask(v, uk, n, b);
        let sigma: f64 = (0..=(n - b))
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| first_column[j as usize])
            .sum();
        let theta = noisy_phase(inst, cfg, real, v, w, k, u_star);
        sets.push(mask);
        phases.push(a * theta - sigma);
    }
    LemmaInstance::new(a, t, n - b + 1, sets, phases)
}

/// Kinds of synthetic set families in the test matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Independent uniformly random subsets.
    Random,
    /// Small perturbations of one random base set.
    Clustered,
    /// All sets equal.
    Identical,
    /// Pairwise disjoint where the universe allows, otherwise random.
    Disjoint,
}

pub const FAMILIES: [Family; 4] = [Family::Random, Family::Clustered, Family::Identical, Family::Disjoint];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub k: usize,
    pub a: f64,
    pub t: f64,
    pub universe: u32,
    pub family: Family,
    pub instance: LemmaInstance,
}

fn random_subset<R: Rng + ?Sized>(universe: u32, rng: &mut R) -> u64 {
    // pick |J| uniformly in 0..=universe, then a uniform subset of that size
    let size = rng.random_range(0..=universe) as usize;
    rand::seq::index::sample(rng, universe as usize, size)
        .iter()
        .fold(0u64, |m, i| m | 1 << i)
}

fn family_sets<R: Rng + ?Sized>(family: Family, k: usize, universe: u32, rng: &mut R) -> Vec<u64> {
    match family {
        Family::Random => (0..k).map(|_| random_subset(universe, rng)).collect(),
        Family::Clustered => {
            let base = random_subset(universe, rng);
            (0..k)
                .map(|_| {
                    let flip = rng.random_range(0..universe);
                    if rng.random_bool(0.5) {
                        base ^ 1 << flip
                    } else {
                        base
                    }
                })
                .collect()
        }
        Family::Identical => vec![random_subset(universe, rng); k],
        Family::Disjoint => {
            let width = universe as usize / k;
            if width == 0 {
                return (0..k).map(|_| random_subset(universe, rng)).collect();
            }
            let mut order: Vec<u32> = (0..universe).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            order
                .chunks(width)
                .take(k)
                .map(|c| c.iter().fold(0u64, |m, &i| m | 1 << i))
                .collect()
        }
    }
}

/// The full synthetic matrix: `K ∈ {2, 8, 32}`, `a ∈ {2, 8, 32}`,
/// `t ∈ {1/4, 1}`, universe `∈ {8, 24, 64}` and every [`Family`]; 216 cells.
pub fn synthetic_matrix(master: u64) -> Vec<SyntheticConfig> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for k in [2usize, 8, 32] {
        for a in [2.0, 8.0, 32.0] {
            for t in [0.25, 1.0] {
                for universe in [8u32, 24, 64] {
                    for family in FAMILIES {
                        let mut rng = seed::stream(master, index);
                        index += 1;
                        let sets = family_sets(family, k, universe, &mut rng);
                        let phases = (0..k).map(|_| rng.random_range(0.0..a)).collect();
                        let instance = LemmaInstance::new(a, t, universe, sets, phases)
                            .expect("synthetic parameters are in range");
                        out.push(SyntheticConfig {
                            k,
                            a,
                            t,
                            universe,
                            family,
                            instance,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Fresh stream for lemma runs keyed by `(master, index)`.
pub fn lemma_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::mix_seed(master, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qft::noisy_probability;

    #[test]
    fn bound_examples() {
        assert_eq!(lemma_bound(1, 0.0, 1.0), 1.0);
        let b = lemma_bound(2, 0.0, 1.0);
        assert!((b - 2.0 - 2.0 * (-2.0 * std::f64::consts::PI.powi(2)).exp()).abs() < 1e-15);
        assert!((b - 2.0 - 5.3e-9).abs() < 1e-10);
        assert!((lemma_bound(2, 1.0, 1.0) - 4.0).abs() < 1e-8);
    }

    #[test]
    fn identical_sets_give_exactly_four() {
        let inst = LemmaInstance::new(2.0, 1.0, 8, vec![0b1011, 0b1011], vec![0.3, 0.3]).unwrap();
        assert_eq!(inst.zeta_emp, 1.0);
        let est = mc_mean(&inst, 1000, &mut lemma_rng(1, 0));
        assert!((est.mean - 4.0).abs() < 1e-12);
        assert!(est.std_err < 1e-12);
    }

    #[test]
    fn disjoint_pair_matches_characteristic_function() {
        assert!((disjoint_pair_analytic(2.0, 1) - 2.000_103).abs() < 1e-6);
        for (a, m) in [(2.0, 1u32), (8.0, 2), (8.0, 1), (32.0, 8)] {
            let left = (1u64 << m) - 1;
            let right = left << m;
            let inst = LemmaInstance::new(a, 0.25, 2 * m, vec![left, right], vec![0.0, 0.0]).unwrap();
            let est = mc_mean(&inst, 200_000, &mut lemma_rng(2, m as u64));
            let expect = disjoint_pair_analytic(a, m);
            assert!(
                (est.mean - expect).abs() <= 4.0 * est.std_err + 1e-12,
                "a={a} m={m}: {} vs {expect} (se {})",
                est.mean,
                est.std_err
            );
        }
    }

    #[test]
    fn mc_mean_is_reproducible() {
        let inst = LemmaInstance::new(4.0, 0.5, 10, vec![1, 6, 1023, 0], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let a = mc_mean(&inst, 5000, &mut lemma_rng(7, 0));
        let b = mc_mean(&inst, 5000, &mut lemma_rng(7, 0));
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| mc_mean(&inst, 5000, &mut lemma_rng(7, 0)));
        assert!((a.mean - c.mean).abs() <= 1e-12);
    }

    #[test]
    fn zeta_emp_counts_unordered_pairs() {
        assert_eq!(close_pair_fraction(&[5], 3.0), 0.0);
        // three sets: {0}, {0}, {1,2,3}; threshold 2 keeps only the equal pair
        let f = close_pair_fraction(&[1, 1, 0b1110], 2.0);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        let brute = |sets: &[u64], thr: f64| {
            let mut close = 0;
            let mut total = 0;
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    total += 1;
                    if (((sets[i] ^ sets[j]).count_ones()) as f64) < thr {
                        close += 1;
                    }
                }
            }
            close as f64 / total as f64
        };
        let mut rng = lemma_rng(3, 3);
        for _ in 0..200 {
            let sets: Vec<u64> = (0..rng.random_range(2..40)).map(|_| rng.random_range(0..64u64)).collect();
            let thr = rng.random_range(0.0..7.0);
            assert!((close_pair_fraction(&sets, thr) - brute(&sets, thr)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LemmaInstance::new(0.0, 1.0, 4, vec![1], vec![0.0]).is_err());
        assert!(LemmaInstance::new(1.0, 0.0, 4, vec![1], vec![0.0]).is_err());
        assert!(LemmaInstance::new(1.0, 1.0, 4, vec![1 << 5], vec![0.0]).is_err());
        assert!(LemmaInstance::new(1.0, 1.0, 65, vec![1], vec![0.0]).is_err());
        assert!(LemmaInstance::new(1.0, 1.0, 4, vec![1, 2], vec![0.0]).is_err());
    }

    #[test]
    fn extracted_instance_reproduces_circuit_amplitude() {
        let inst = DlogInstance::new(19, 2, 7).unwrap();
        assert_eq!(inst.n, 5);
        let cfg = NoiseConfig::new(3, 0.8, 41);
        let real = cfg.realization(inst.n, 0);
        let draws: Vec<f64> = real.r().iter().map(|row| row[0]).collect();
        for (v, w, us) in [(5u64, 3u64, 0u64), (31, 0, 7), (12, 19, 17)] {
            let lemma = extract_lemma_instance(&inst, &cfg, &real, v, w, us, 1.0).unwrap();
            assert_eq!(lemma.k(), 18);
            assert_eq!(lemma.universe, 3);
            assert!(lemma.sets.iter().all(|&s| s < 8));
            let amp = lemma.amplitude_sum(&draws);
            let norm = (inst.dim() as f64).powi(2) * (inst.order() as f64).powi(2);
            let p = amp.norm_sqr() / norm;
            assert!((p - noisy_probability(&inst, &cfg, &real, v, w, us)).abs() < 1e-12);
            for (k, &set) in lemma.sets.iter().enumerate() {
                let uk = u_k(inst.d, us, k as u64, inst.p);
                assert_eq!(set, j_mask(v, uk, 5, 3));
            }
        }
    }

    #[test]
    fn extracted_zero_frequency_has_empty_sets() {
        let inst = DlogInstance::new(19, 2, 7).unwrap();
        let cfg = NoiseConfig::new(3, 0.5, 1);
        let real = cfg.realization(inst.n, 0);
        let lemma = extract_lemma_instance(&inst, &cfg, &real, 0, 4, 2, 1.0).unwrap();
        assert!(lemma.sets.iter().all(|&s| s == 0));
        assert_eq!(lemma.zeta_emp, 1.0);
        let off = NoiseConfig::new(3, 0.0, 1);
        assert!(extract_lemma_instance(&inst, &off, &real, 1, 1, 1, 1.0).is_err());
    }

    #[test]
    fn synthetic_matrix_shape() {
        let m = synthetic_matrix(5);
        assert_eq!(m.len(), 216);
        for c in &m {
            assert_eq!(c.instance.k(), c.k);
            if c.family == Family::Identical {
                assert_eq!(c.instance.zeta_emp, 1.0);
            }
        }
    }
}
