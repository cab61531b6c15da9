//! Good Fourier peaks and the counting quantities around them.
//!
//! A pair `(v, w)` is good when
//!
//! ```text
//! |{ v d + w - d/(P-1) · {v(P-1)}_{2^n} }_{2^n}|  ≤ 1/2   (or < γ when relaxed)
//! |{ v(P-1) }_{2^n}|                              < 2^n / C
//! ```
//!
//! Both tests are evaluated in exact integer arithmetic: multiplying the first
//! through by `P-1` turns it into a centered residue modulo `2^n (P-1)`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, LabError, Result};
use crate::numtheory::{additive_order, centered_residue, DlogInstance};
use crate::qft::u_k;

/// Largest register width for which peak sets are enumerated.
pub const MAX_PEAK_BITS: u32 = 24;

/// Relaxation radius, an exact positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gamma(Ratio<i64>);

impl Gamma {
    pub fn new(numer: i64, denom: i64) -> Result<Self> {
        if denom <= 0 || numer <= 0 {
            return domain(format!("gamma {numer}/{denom} must be positive"));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn half() -> Self {
        Self(Ratio::new(1, 2))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Gamma {
    type Err = LabError;

    /// Accepts `a/b`, integers, and finite decimals such as `1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || LabError::Parse(format!("invalid gamma `{s}`"));
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Self::new(a, b);
        }
        if let Some((int, dec)) = s.split_once('.') {
            if dec.len() > 12 || !dec.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let denom = 10i64.pow(dec.len() as u32);
            let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let frac: i64 = if dec.is_empty() { 0 } else { dec.parse().map_err(|_| bad())? };
            return Self::new(int * denom + frac, denom);
        }
        Self::new(s.parse().map_err(|_| bad())?, 1)
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether the deviation test is `≤ γ` or `< γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Closed,
    Open,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::Closed => "closed",
            Comparison::Open => "open",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSetParams {
    pub gamma: Gamma,
    /// Divisor `C` of the `{v(P-1)}` window.
    pub cap_c: u64,
    pub comparison: Comparison,
    /// Noise cutoff, needed for `S_v` and `G'`.
    pub b: u32,
    /// `G'` keeps `v` with `|S_v| ≥ δ₁ (n - b)`.
    pub delta1: f64,
}

impl PeakSetParams {
    /// The unrelaxed set: `≤ 1/2` and `C = 12`.
    pub fn original() -> Self {
        Self {
            gamma: Gamma::half(),
            cap_c: 12,
            comparison: Comparison::Closed,
            b: 2,
            delta1: 0.4,
        }
    }

    /// Polynomially relaxed set with strict `< γ`.
    pub fn relaxed(gamma: Gamma, cap_c: u64) -> Result<Self> {
        Self {
            gamma,
            cap_c,
            comparison: Comparison::Open,
            ..Self::original()
        }
        .validated()
    }

    pub fn with_b(mut self, b: u32) -> Self {
        self.b = b;
        self
    }

    pub fn with_delta1(mut self, delta1: f64) -> Self {
        self.delta1 = delta1;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.gamma.0 < Ratio::new(1, 2) {
            return domain(format!("gamma {} is below 1/2", self.gamma));
        }
        if self.cap_c < 2 {
            return domain(format!("C = {} is below 2", self.cap_c));
        }
        if !(self.delta1 > 0.0 && self.delta1 < 0.5) {
            return domain(format!("delta1 = {} outside (0, 1/2)", self.delta1));
        }
        Ok(self)
    }
}

impl Default for PeakSetParams {
    fn default() -> Self {
        Self::original()
    }
}

/// `H₂(δ)` in bits, with `H₂(0) = H₂(1) = 0`.
pub fn binary_entropy(delta: f64) -> f64 {
    assert!((0.0..=1.0).contains(&delta), "delta {delta} outside [0, 1]");
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    term(delta) + term(1.0 - delta)
}

/// `{v(P-1)}_{2^n}`.
fn projection_residue(v: u64, p: u64, n: u32) -> i128 {
    centered_residue(v as i128 * (p - 1) as i128, 1u64 << n)
}

/// `(P-1) · {v d + w - d/(P-1) {v(P-1)}_{2^n}}_{2^n}`, an exact integer.
fn scaled_deviation(v: u64, w: u64, d: u64, p: u64, n: u32) -> i128 {
    let m = (p - 1) as i128;
    let s = projection_residue(v, p, n);
    let z = (v as i128 * d as i128 + w as i128) * m - d as i128 * s;
    centered_residue(z, (1u64 << n) * (p - 1))
}

/// `|{v d + w - d/(P-1) {v(P-1)}_{2^n}}_{2^n}|`.
pub fn deviation(v: u64, w: u64, d: u64, p: u64, n: u32) -> f64 {
    scaled_deviation(v, w, d, p, n).abs() as f64 / (p - 1) as f64
}

fn within_gamma(scaled: i128, p: u64, params: &PeakSetParams) -> bool {
    let lhs = params.gamma.denom() as i128 * scaled.abs();
    let rhs = params.gamma.numer() as i128 * (p - 1) as i128;
    match params.comparison {
        Comparison::Closed => lhs <= rhs,
        Comparison::Open => lhs < rhs,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakEntry {
    pub v: u64,
    pub ws: Vec<u64>,
}

/// The good set `G` (or `G^γ`) of one instance.
#[derive(Debug, Clone)]
pub struct PeakSet {
    pub n: u32,
    pub p: u64,
    pub d: u64,
    pub params: PeakSetParams,
    /// `γ(P-1)` is an integer, so the per-`v` count of `w` may differ from `2γ`.
    pub gamma_on_lattice: bool,
    entries: Vec<PeakEntry>,
    member: Vec<bool>,
}

/// Enumerates `G^γ` for `inst`.
pub fn build_peak_set(inst: &DlogInstance, params: &PeakSetParams) -> Result<PeakSet> {
    let params = params.validated()?;
    let n = inst.n;
    if n > MAX_PEAK_BITS {
        return Err(LabError::Size(format!(
            "peak enumeration over 2^{n} values exceeds the 2^{MAX_PEAK_BITS} cap"
        )));
    }
    let (p, d) = (inst.p, inst.d);
    let dim = inst.dim();
    let m = (p - 1) as i128;
    let gamma_on_lattice = (params.gamma.numer() as i128 * m) % params.gamma.denom() as i128 == 0;
    if gamma_on_lattice && params.comparison == Comparison::Open {
        log::warn!(
            "gamma = {} makes gamma(P-1) integral for P = {p}; w counts per v may differ from 2*gamma",
            params.gamma
        );
    }
    let radius = (params.gamma.numer() / params.gamma.denom()) as i128 + 2;
    let mut entries = Vec::new();
    let mut member = vec![false; dim as usize];
    for v in 0..dim {
        let s = projection_residue(v, p, n);
        if params.cap_c as i128 * s.abs() >= dim as i128 {
            continue;
        }
        // centre of the w window is T/(P-1) with T = d s - v d (P-1)
        let t = d as i128 * s - v as i128 * d as i128 * m;
        let centre = (2 * t + m).div_euclid(2 * m);
        let candidates: Vec<u64> = if 2 * radius + 1 >= dim as i128 {
            (0..dim).collect()
        } else {
            (-radius..=radius)
                .map(|off| (centre + off).rem_euclid(dim as i128) as u64)
                .collect()
        };
        let mut ws: Vec<u64> = candidates
            .into_iter()
            .filter(|&w| within_gamma(scaled_deviation(v, w, d, p, n), p, &params))
            .collect();
        ws.sort_unstable();
        ws.dedup();
        if !ws.is_empty() {
            member[v as usize] = true;
            entries.push(PeakEntry { v, ws });
        }
    }
    Ok(PeakSet {
        n,
        p,
        d,
        params,
        gamma_on_lattice,
        entries,
        member,
    })
}

impl PeakSet {
    pub fn entries(&self) -> &[PeakEntry] {
        &self.entries
    }

    /// `π₁(G)` in increasing order.
    pub fn projection(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.v)
    }

    pub fn projection_len(&self) -> usize {
        self.entries.len()
    }

    pub fn in_projection(&self, v: u64) -> bool {
        self.member.get(v as usize).copied().unwrap_or(false)
    }

    pub fn pair_count(&self) -> usize {
        self.entries.iter().map(|e| e.ws.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries
            .iter()
            .flat_map(|e| e.ws.iter().map(move |&w| (e.v, w)))
    }

    pub fn contains(&self, v: u64, w: u64) -> bool {
        self.in_projection(v)
            && self
                .entries
                .binary_search_by_key(&v, |e| e.v)
                .map(|i| self.entries[i].ws.binary_search(&w).is_ok())
                .unwrap_or(false)
    }

    /// `|S_v|` under the set's cutoff `b`.
    pub fn s_v_size(&self, v: u64) -> u32 {
        s_v_mask(v, self.n, self.params.b).count_ones()
    }

    /// `v ∈ π₁(G')`.
    pub fn in_g_prime(&self, v: u64) -> bool {
        let need = self.params.delta1 * self.n.saturating_sub(self.params.b) as f64;
        self.in_projection(v) && self.s_v_size(v) as f64 >= need
    }

    /// `|π₁(G) \ π₁(G')|`.
    pub fn g_prime_deficit(&self) -> usize {
        self.projection().filter(|&v| !self.in_g_prime(v)).count()
    }

    pub fn g_prime_len(&self) -> usize {
        self.projection_len() - self.g_prime_deficit()
    }

    /// Line-oriented text form: a magic line, a `key=value` header line,
    /// then one `v: w1 w2 ...` line per projected `v`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# qdlog peak set v1\n");
        out.push_str(&format!(
            "n={} p={} d={} gamma={} C={} comparison={} b={} delta1={}\n",
            self.n,
            self.p,
            self.d,
            self.params.gamma,
            self.params.cap_c,
            self.params.comparison,
            self.params.b,
            self.params.delta1
        ));
        for e in &self.entries {
            let ws: Vec<String> = e.ws.iter().map(u64::to_string).collect();
            out.push_str(&format!("{}: {}\n", e.v, ws.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |msg: String| LabError::Parse(msg);
        let mut lines = text.lines();
        if lines.next() != Some("# qdlog peak set v1") {
            return Err(perr("missing peak set magic line".into()));
        }
        let header = lines.next().ok_or_else(|| perr("missing header".into()))?;
        let mut fields = std::collections::HashMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| perr(format!("bad header field `{kv}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| -> Result<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| perr(format!("header lacks `{k}`")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|_| perr(format!("bad `{k}`")))
        };
        let n = num("n")? as u32;
        let params = PeakSetParams {
            gamma: get("gamma")?.parse()?,
            cap_c: num("C")?,
            comparison: match get("comparison")? {
                "closed" => Comparison::Closed,
                "open" => Comparison::Open,
                other => return Err(perr(format!("unknown comparison `{other}`"))),
            },
            b: num("b")? as u32,
            delta1: get("delta1")?
                .parse()
                .map_err(|_| perr("bad `delta1`".into()))?,
        };
        let p = num("p")?;
        let mut member = vec![false; 1usize << n];
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (v, ws) = line
                .split_once(':')
                .ok_or_else(|| perr(format!("bad entry `{line}`")))?;
            let v: u64 = v.trim().parse().map_err(|_| perr(format!("bad v in `{line}`")))?;
            let ws = ws
                .split_whitespace()
                .map(|w| w.parse().map_err(|_| perr(format!("bad w in `{line}`"))))
                .collect::<Result<Vec<u64>>>()?;
            if v >= 1 << n {
                return Err(perr(format!("v = {v} outside the register")));
            }
            member[v as usize] = true;
            entries.push(PeakEntry { v, ws });
        }
        let m = (p - 1) as i128;
        Ok(Self {
            n,
            p,
            d: num("d")?,
            gamma_on_lattice: (params.gamma.numer() as i128 * m) % params.gamma.denom() as i128 == 0,
            params,
            entries,
            member,
        })
    }
}

fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Bits of `v` at positions `0..=n-b`.
pub fn s_v_mask(v: u64, n: u32, b: u32) -> u64 {
    if b > n {
        return 0;
    }
    v & low_mask(n - b + 1)
}

/// `S_v = {s ≤ n-b : v^{[s]} = 1}`.
pub fn s_v(v: u64, n: u32, b: u32) -> Vec<u32> {
    mask_to_indices(s_v_mask(v, n, b))
}

/// Mask of `S'_v = {n-b-j : j ∈ S_v}`.
pub fn s_v_prime_mask(v: u64, n: u32, b: u32) -> u64 {
    let s = s_v_mask(v, n, b);
    if s == 0 {
        return 0;
    }
    let top = n - b;
    (0..=top)
        .filter(|j| s >> j & 1 == 1)
        .fold(0, |acc, j| acc | 1 << (top - j))
}

/// `S'_v`, listed in the order of the `j ∈ S_v` that produce it.
pub fn s_v_prime(v: u64, n: u32, b: u32) -> Vec<u32> {
    s_v(v, n, b).into_iter().map(|j| n - b - j).collect()
}

/// Mask of `J = {j ≤ n-b : v^{[j]} u^{[n-b-j]} = 1}`.
pub fn j_mask(v: u64, u: u64, n: u32, b: u32) -> u64 {
    if b > n {
        return 0;
    }
    let top = n - b;
    (0..=top)
        .filter(|&j| v >> j & 1 == 1 && u >> (top - j) & 1 == 1)
        .fold(0, |acc, j| acc | 1 << j)
}

pub fn j_set(v: u64, u: u64, n: u32, b: u32) -> Vec<u32> {
    mask_to_indices(j_mask(v, u, n, b))
}

/// `|J(u1) Δ J(u2)|` computed as a popcount of `u1 ⊕ u2` over `S'_v`.
pub fn sym_diff_card(v: u64, u1: u64, u2: u64, n: u32, b: u32) -> u32 {
    ((u1 ^ u2) & s_v_prime_mask(v, n, b)).count_ones()
}

pub fn mask_to_indices(mask: u64) -> Vec<u32> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Fraction of unordered pairs of distinct values `u_k` whose `J` sets
/// differ in fewer than `threshold` positions.
pub fn small_difference_fraction(inst: &DlogInstance, v: u64, u_star: u64, b: u32, threshold: f64) -> f64 {
    let m = inst.order();
    let distinct = additive_order(inst.d % m, m);
    if distinct < 2 {
        return 0.0;
    }
    let mask = s_v_prime_mask(v, inst.n, b);
    let mut hist = std::collections::HashMap::<u64, u64>::new();
    for k in 0..distinct {
        *hist.entry(u_k(inst.d, u_star, k, inst.p) & mask).or_default() += 1;
    }
    let buckets: Vec<(u64, u64)> = hist.into_iter().collect();
    let mut close = 0u128;
    for (i, &(pa, ha)) in buckets.iter().enumerate() {
        if 0.0 < threshold {
            close += ha as u128 * (ha as u128 - 1) / 2;
        }
        for &(pb, hb) in &buckets[i + 1..] {
            if (((pa ^ pb) & mask).count_ones() as f64) < threshold {
                close += ha as u128 * hb as u128;
            }
        }
    }
    let total = distinct as u128 * (distinct as u128 - 1) / 2;
    close as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaBound {
    /// Coefficient of `n` in the exponent, `1 - c₁ - (1 - H₂(δ₂)) δ₁`.
    pub exponent_per_bit: f64,
    /// `2^{(1-c₁) n - (1 - H₂(δ₂)) δ₁ (n - b)}`.
    pub zeta: f64,
}

pub fn zeta_bound(n: u32, b: u32, c1: f64, delta1: f64, delta2: f64) -> Result<ZetaBound> {
    if !(c1 > 0.5 && c1 < 1.0) {
        return domain(format!("c1 = {c1} outside (1/2, 1)"));
    }
    if !(delta2 > 0.0 && delta2 < delta1 && delta1 < 0.5) {
        return domain(format!("need 0 < delta2 < delta1 < 1/2, got {delta2}, {delta1}"));
    }
    if b > n {
        return domain(format!("b = {b} exceeds n = {n}"));
    }
    let gap = (1.0 - binary_entropy(delta2)) * delta1;
    Ok(ZetaBound {
        exponent_per_bit: 1.0 - c1 - gap,
        zeta: f64::powf(2.0, (1.0 - c1) * n as f64 - gap * (n - b) as f64),
    })
}

/// `b + log₂(1/ε) ≤ (1-c)/2 · log₂ n - ½ log₂(1/c*)`, with ties counted as false.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn condition_check(n: u64, b: u32, epsilon: f64, c: f64, c_star: f64) -> bool {
    if !(epsilon > 0.0) || n == 0 || !(c > 0.0 && c < 1.0) || !(c_star > 0.0 && c_star <= 1.0) {
        return false;
    }
    let lhs = b as f64 + (1.0 / epsilon).log2();
    let rhs = (1.0 - c) / 2.0 * (n as f64).log2() - 0.5 * (1.0 / c_star).log2();
    lhs < rhs
}

/// `Σ_{i ≤ ⌊δℓ⌋} C(ℓ, i)` against `2^{H₂(δ) ℓ}`.
pub fn entropy_count_check(ell: u32, delta: f64) -> (u64, f64) {
    assert!(ell <= 30, "ell = {ell} exceeds 30");
    assert!(delta > 0.0 && delta < 0.5, "delta {delta} outside (0, 1/2)");
    // nudge so that e.g. 0.15 * 20 lands on 3 rather than 2.999...
    let top = (delta * ell as f64 + 1e-9).floor() as u64;
    let mut binom = 1u64;
    let mut count = 0u64;
    for i in 0..=top.min(ell as u64) {
        count += binom;
        binom = binom * (ell as u64 - i) / (i + 1);
    }
    (count, f64::powf(2.0, binary_entropy(delta) * ell as f64))
}
