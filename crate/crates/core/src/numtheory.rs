//! Exact integer substrate: primality, factorization, generators, orders and
//! discrete logarithms over machine-word primes.

use std::collections::HashMap;

use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};

/// Largest bit-length accepted for instance generation.
pub const MAX_INSTANCE_BITS: u32 = 32;

const PRIME_RETRY_CAP: u32 = 1_000_000;
const FOUVRY_RETRY_CAP: u32 = 10_000;

/// Representative of `z mod m` in the half-open interval `(-m/2, m/2]`.
pub fn centered_residue(z: i128, m: u64) -> i128 {
    assert!(m >= 1, "modulus must be positive");
    let m = m as i128;
    let r = z.rem_euclid(m);
    // r > m/2  <=>  2r > m, which keeps +m/2 for even m
    if 2 * r > m {
        r - m
    } else {
        r
    }
}

/// Real-valued centered residue, same interval convention as [`centered_residue`].
pub fn centered_residue_f64(z: f64, m: f64) -> f64 {
    assert!(m > 0.0, "modulus must be positive");
    let mut r = z.rem_euclid(m);
    if r >= m {
        r -= m;
    }
    if 2.0 * r > m {
        r - m
    } else {
        r
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(m: u64) -> bool {
    if m < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &SMALL {
        if m.is_multiple_of(p) {
            return m == p;
        }
    }
    let mut d = m - 1;
    let s = d.trailing_zeros();
    d >>= s;
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, m);
        if x == 1 || x == m - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, m);
            if x == m - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Uniform prime with exactly `n` bits, i.e. in `[2^(n-1), 2^n)`.
///
/// Candidates are uniform odd integers in the range, so `n = 2` always yields 3.
pub fn random_prime<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<u64> {
    if !(2..=63).contains(&n) {
        return domain(format!("bit-length {n} outside [2, 63]"));
    }
    let lo = 1u64 << (n - 1);
    let hi = 1u64 << n;
    for _ in 0..PRIME_RETRY_CAP {
        let c = rng.random_range(lo..hi) | 1;
        if is_prime(c) {
            return Ok(c);
        }
    }
    Err(LabError::RetryCap {
        what: "sampling a random prime",
        attempts: PRIME_RETRY_CAP,
    })
}

fn pollard_brent(n: u64, c: u64) -> u64 {
    let f = |x: u64| (mul_mod(x, x, n) + c) % n;
    let (mut y, mut r, m) = (2u64, 1u64, 128u64);
    let (mut g, mut q) = (1u64, 1u64);
    let (mut x, mut ys) = (0u64, 0u64);
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..m.min(r - k) {
                y = f(y);
                q = mul_mod(q, x.abs_diff(y), n);
            }
            g = q.gcd(&n);
            k += m;
        }
        r *= 2;
    }
    if g == n {
        loop {
            ys = f(ys);
            g = x.abs_diff(ys).gcd(&n);
            if g > 1 {
                break;
            }
        }
    }
    g
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let mut c = 1;
    loop {
        let f = pollard_brent(n, c);
        if f != n && f != 1 {
            split_into(f, out);
            split_into(n / f, out);
            return;
        }
        c += 1;
    }
}

/// Prime factorization as sorted `(prime, exponent)` pairs. `factorize(1)` is empty.
pub fn factorize(mut m: u64) -> Vec<(u64, u32)> {
    assert!(m >= 1, "cannot factor zero");
    let mut primes = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        while m.is_multiple_of(p) {
            primes.push(p);
            m /= p;
        }
    }
    split_into(m, &mut primes);
    primes.sort_unstable();
    let mut out: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

pub fn largest_prime_factor(m: u64) -> Result<u64> {
    if m <= 1 {
        return domain(format!("{m} has no prime factor"));
    }
    Ok(factorize(m).last().map(|&(p, _)| p).unwrap())
}

/// Largest prime factor `Q` of `P - 1` and whether `Q > P^(2/3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimeClassification {
    pub p: u64,
    pub q: u64,
    /// `log_P Q`.
    pub fouvry_exponent: f64,
    pub is_fouvry: bool,
}

/// Exact `Q^3 > P^2`.
pub fn exceeds_two_thirds_power(q: u64, p: u64) -> bool {
    let p2 = p as u128 * p as u128;
    (q as u128)
        .checked_mul(q as u128)
        .and_then(|q2| q2.checked_mul(q as u128))
        .is_none_or(|q3| q3 > p2)
}

pub fn classify_prime(p: u64) -> Result<PrimeClassification> {
    if p < 3 || !is_prime(p) {
        return domain(format!("{p} is not an odd prime"));
    }
    let q = largest_prime_factor(p - 1)?;
    Ok(PrimeClassification {
        p,
        q,
        fouvry_exponent: (q as f64).ln() / (p as f64).ln(),
        is_fouvry: exceeds_two_thirds_power(q, p),
    })
}

/// Least `t >= 1` with `a^t = 1 (mod p)`.
pub fn multiplicative_order(a: u64, p: u64) -> Result<u64> {
    if p < 2 || !is_prime(p) {
        return domain(format!("{p} is not prime"));
    }
    let a = a % p;
    if a == 0 {
        return domain("0 has no multiplicative order");
    }
    let mut order = p - 1;
    for (q, _) in factorize(p - 1) {
        while order.is_multiple_of(q) && pow_mod(a, order / q, p) == 1 {
            order /= q;
        }
    }
    Ok(order)
}

fn is_generator(g: u64, p: u64, prime_factors: &[(u64, u32)]) -> bool {
    !g.is_multiple_of(p)
        && prime_factors
            .iter()
            .all(|&(q, _)| pow_mod(g, (p - 1) / q, p) != 1)
}

/// Random generator of the multiplicative group mod `p`.
pub fn find_generator<R: Rng + ?Sized>(p: u64, rng: &mut R) -> Result<u64> {
    if p < 3 || !is_prime(p) {
        return domain(format!("{p} is not an odd prime"));
    }
    let factors = factorize(p - 1);
    loop {
        let g = rng.random_range(2..p);
        if is_generator(g, p, &factors) {
            return Ok(g);
        }
    }
}

/// Linear-scan discrete log: the unique `d` in `[0, p-2]` with `g^d = y`.
pub fn dlog_bruteforce(p: u64, g: u64, y: u64) -> Result<u64> {
    let y = y % p;
    if y == 0 {
        return domain("0 has no discrete log");
    }
    let mut x = 1u64;
    for d in 0..p - 1 {
        if x == y {
            return Ok(d);
        }
        x = mul_mod(x, g, p);
    }
    domain(format!("{y} is not a power of {g} mod {p}"))
}

/// Baby-step giant-step discrete log in `O(sqrt p)` time and memory.
pub fn dlog_bsgs(p: u64, g: u64, y: u64) -> Result<u64> {
    let y = y % p;
    if y == 0 {
        return domain("0 has no discrete log");
    }
    let order = p - 1;
    let m = (order as f64).sqrt().ceil() as u64 + 1;
    let mut table = HashMap::with_capacity(m as usize);
    let mut x = 1u64;
    for j in 0..m {
        table.entry(x).or_insert(j);
        x = mul_mod(x, g, p);
    }
    // g^-m = g^(order - m mod order)
    let step = pow_mod(g, (order - m % order) % order, p);
    let mut gamma = y;
    for i in 0..m {
        if let Some(&j) = table.get(&gamma) {
            return Ok((i * m + j) % order);
        }
        gamma = mul_mod(gamma, step, p);
    }
    domain(format!("{y} is not a power of {g} mod {p}"))
}

/// Order of `d` in the additive group `Z_m`, i.e. `m / gcd(d, m)`.
pub fn additive_order(d: u64, m: u64) -> u64 {
    assert!(m >= 1, "modulus must be positive");
    m / (d % m).gcd(&m)
}

pub fn bit_length(x: u64) -> u32 {
    64 - x.leading_zeros()
}

/// How `make_instance` chooses its prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimeMode {
    Random,
    Fouvry,
    Explicit(u64),
}

/// One discrete-log problem: find `d` with `g^d = y (mod p)`.
///
/// The lab always knows the answer; `d` is only used to define the good
/// peak set and to score outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlogInstance {
    pub p: u64,
    pub n: u32,
    pub g: u64,
    pub y: u64,
    pub d: u64,
}

impl DlogInstance {
    /// Builds and validates an instance, solving for `d`.
    pub fn new(p: u64, g: u64, y: u64) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return domain(format!("{p} is not an odd prime"));
        }
        let n = bit_length(p);
        if n > MAX_INSTANCE_BITS {
            return Err(LabError::Size(format!(
                "{n}-bit prime exceeds the {MAX_INSTANCE_BITS}-bit instance cap"
            )));
        }
        if !is_generator(g, p, &factorize(p - 1)) {
            return domain(format!("{g} does not generate Z_{p}^*"));
        }
        if y == 0 || y >= p {
            return domain(format!("target {y} outside [1, {}]", p - 1));
        }
        let d = dlog_bsgs(p, g, y)?;
        Ok(Self { p, n, g, y, d })
    }

    /// Instance with a prescribed discrete log: `y = g^d mod p`.
    pub fn with_dlog(p: u64, g: u64, d: u64) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return domain(format!("{p} is not an odd prime"));
        }
        if d > p - 2 {
            return domain(format!("discrete log {d} outside [0, {}]", p - 2));
        }
        let inst = Self::new(p, g, pow_mod(g, d, p))?;
        debug_assert_eq!(inst.d, d);
        Ok(inst)
    }

    /// Group order `P - 1`.
    #[inline]
    pub fn order(&self) -> u64 {
        self.p - 1
    }

    /// Register dimension `2^n`.
    #[inline]
    pub fn dim(&self) -> u64 {
        1u64 << self.n
    }
}

/// Draws an `n`-bit instance. `y` is uniform on `[1, P-1]`.
pub fn make_instance<R: Rng + ?Sized>(n: u32, mode: PrimeMode, rng: &mut R) -> Result<DlogInstance> {
    if !(2..=MAX_INSTANCE_BITS).contains(&n) {
        return domain(format!("bit-length {n} outside [2, {MAX_INSTANCE_BITS}]"));
    }
    let p = match mode {
        PrimeMode::Random => random_prime(n, rng)?,
        PrimeMode::Explicit(p) => {
            if bit_length(p) != n {
                return domain(format!("explicit prime {p} does not have {n} bits"));
            }
            p
        }
        PrimeMode::Fouvry => {
            let mut found = None;
            for _ in 0..FOUVRY_RETRY_CAP {
                let p = random_prime(n, rng)?;
                if classify_prime(p)?.is_fouvry {
                    found = Some(p);
                    break;
                }
            }
            found.ok_or(LabError::RetryCap {
                what: "sampling a Fouvry prime",
                attempts: FOUVRY_RETRY_CAP,
            })?
        }
    };
    let g = find_generator(p, rng)?;
    let y = rng.random_range(1..p);
    DlogInstance::new(p, g, y)
}

/// Smallest-prime-factor sieve on `[0, limit)`.
pub fn spf_sieve(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit];
    for i in 2..limit {
        if spf[i] == 0 {
            let mut j = i;
            while j < limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}
