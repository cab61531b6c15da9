//! Number-theoretic statistics: Fouvry-prime density and additive-order tails.

use num_bigint::BigUint;
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;

use super::records::{DensityBand, OrderStatsRecord};
use crate::error::{domain, Result};
use crate::numtheory::{additive_order, exceeds_two_thirds_power, random_prime, spf_sieve};
use crate::seed;

pub const MAX_DENSITY_LIMIT: u64 = 10_000_000;

fn largest_factor_from_sieve(spf: &[u32], mut m: usize) -> u64 {
    let mut largest = 1;
    while m > 1 {
        let q = spf[m] as usize;
        largest = largest.max(q);
        while m.is_multiple_of(q) {
            m /= q;
        }
    }
    largest as u64
}

/// Whether the prime `p` satisfies `P⁺(p-1) > p^{2/3}`, using a sieve that
/// covers `p - 1`. `p = 2` has no prime factor in `p - 1` and is excluded.
pub fn is_fouvry_with_sieve(spf: &[u32], p: u64) -> bool {
    p > 2 && exceeds_two_thirds_power(largest_factor_from_sieve(spf, (p - 1) as usize), p)
}

/// Fouvry-prime counts over primes `< x_max`, per dyadic band `[2^i, 2^{i+1})`
/// clipped to `x_max`. Bands without primes are omitted.
pub fn density_scan(x_max: u64) -> Result<Vec<DensityBand>> {
    if x_max > MAX_DENSITY_LIMIT {
        return domain(format!("x_max = {x_max} exceeds {MAX_DENSITY_LIMIT}"));
    }
    if x_max < 3 {
        return Ok(Vec::new());
    }
    let spf = spf_sieve(x_max as usize);
    let mut bands = Vec::new();
    let mut lo = 2u64;
    while lo < x_max {
        let hi = (2 * lo).min(x_max);
        let (mut primes, mut fouvry) = (0u64, 0u64);
        for p in lo..hi {
            if spf[p as usize] as u64 == p {
                primes += 1;
                if is_fouvry_with_sieve(&spf, p) {
                    fouvry += 1;
                }
            }
        }
        if primes > 0 {
            bands.push(DensityBand {
                lo,
                hi,
                primes,
                fouvry,
                fraction: fouvry as f64 / primes as f64,
            });
        }
        lo *= 2;
    }
    Ok(bands)
}

/// Parses an exponent such as `2/3`, `0.5` or `1`.
pub fn parse_exponent(s: &str) -> Result<Ratio<u64>> {
    let g: crate::peaks::Gamma = s.parse()?;
    Ok(Ratio::new(g.numer() as u64, g.denom() as u64))
}

/// `ω < P^{c₁}` decided exactly as `ω^den < P^num`.
pub fn order_below_power(order: u64, p: u64, c1: Ratio<u64>) -> bool {
    BigUint::from(order).pow(*c1.denom() as u32) < BigUint::from(p).pow(*c1.numer() as u32)
}

/// Empirical `Pr[ω_P(d) < P^{c₁}]` over fresh `(P, d)` draws, `P` a random
/// `n`-bit prime and `d` uniform on `[0, P-2]`. Sample `i` uses
/// `seed::stream(seed, i)`.
pub fn order_stats(n: u32, c1: Ratio<u64>, samples: u64, seed: u64) -> Result<OrderStatsRecord> {
    if !(2..=32).contains(&n) {
        return domain(format!("bit-length {n} outside [2, 32]"));
    }
    if samples == 0 {
        return domain("need at least one sample");
    }
    if *c1.numer() == 0 || c1 >= Ratio::from_integer(1) || *c1.denom() > 64 {
        return domain(format!("c1 = {c1} outside (0, 1) or too fine"));
    }
    let hits: Vec<bool> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut rng = seed::stream(seed, i);
            let p = random_prime(n, &mut rng)?;
            let d = rng.random_range(0..p - 1);
            Ok(order_below_power(additive_order(d, p - 1), p, c1))
        })
        .collect::<Result<_>>()?;
    let below = hits.iter().filter(|&&h| h).count() as u64;
    let f = below as f64 / samples as f64;
    Ok(OrderStatsRecord {
        n,
        c1: c1.to_string(),
        samples,
        below,
        fraction: f,
        std_err: (f * (1.0 - f) / samples as f64).sqrt(),
        seed,
    })
}
