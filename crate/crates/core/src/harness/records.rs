//! Output records and their CSV/JSON codecs.
//!
//! Floats use the shortest representation that parses back to the same
//! `f64`, so a CSV round trip is lossless.

use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::peaks::Gamma;

pub const SCHEMA_VERSION: u32 = 1;

/// One cell of a simulate/sweep run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub mode: String,
    pub n: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub g: u64,
    pub y: u64,
    pub d: u64,
    /// Largest prime factor of `P-1`.
    #[serde(rename = "Q")]
    pub q: u64,
    pub b: u32,
    pub epsilon: f64,
    pub gamma: Gamma,
    #[serde(rename = "C")]
    pub cap_c: u64,
    pub trials: u64,
    pub ustar_samples: u64,
    pub estimate: f64,
    pub std_err: f64,
    pub baseline: f64,
    pub zeta: f64,
    pub condition_ok: bool,
    pub seed: u64,
    pub wall_ms: u64,
}

pub const RESULT_HEADER: [&str; 21] = [
    "schema_version",
    "mode",
    "n",
    "P",
    "g",
    "y",
    "d",
    "Q",
    "b",
    "epsilon",
    "gamma",
    "C",
    "trials",
    "ustar_samples",
    "estimate",
    "std_err",
    "baseline",
    "zeta",
    "condition_ok",
    "seed",
    "wall_ms",
];

/// One Monte Carlo check of the dephasing bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRecord {
    pub schema_version: u32,
    /// `synthetic:<family>` or `instance`.
    pub source: String,
    pub n: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub v: u64,
    pub b: u32,
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: u64,
    pub universe: u32,
    pub a: f64,
    pub t: f64,
    pub zeta_emp: f64,
    pub trials: u64,
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    pub holds: bool,
    pub seed: u64,
}

pub const LEMMA_HEADER: [&str; 18] = [
    "schema_version",
    "source",
    "n",
    "P",
    "v",
    "b",
    "epsilon",
    "K",
    "universe",
    "a",
    "t",
    "zeta_emp",
    "trials",
    "mean",
    "std_err",
    "bound",
    "holds",
    "seed",
];

/// Fouvry-prime counts in one dyadic band `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBand {
    pub lo: u64,
    pub hi: u64,
    pub primes: u64,
    pub fouvry: u64,
    pub fraction: f64,
}

pub const DENSITY_HEADER: [&str; 5] = ["lo", "hi", "primes", "fouvry", "fraction"];

/// Tail `Pr[ω_P(d) < P^{c₁}]` at one bit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStatsRecord {
    pub n: u32,
    pub c1: String,
    pub samples: u64,
    pub below: u64,
    pub fraction: f64,
    pub std_err: f64,
    pub seed: u64,
}

pub const ORDER_STATS_HEADER: [&str; 7] = ["n", "c1", "samples", "below", "fraction", "std_err", "seed"];

/// Size summary of one peak set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSetRecord {
    pub schema_version: u32,
    pub n: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub g: u64,
    pub y: u64,
    pub d: u64,
    pub gamma: Gamma,
    #[serde(rename = "C")]
    pub cap_c: u64,
    pub b: u32,
    /// `|π₁(G)|`.
    pub projection: u64,
    /// `|G|`.
    pub pairs: u64,
    /// `|π₁(G')|`.
    pub g_prime: u64,
    /// `|π₁(G) \ π₁(G')|`.
    pub deficit: u64,
    /// `2^{b-1} · 2^{H₂(δ₁)(n-b+1)}`.
    pub deficit_bound: f64,
    pub baseline: f64,
    pub seed: u64,
}

pub const GOODSET_HEADER: [&str; 16] = [
    "schema_version",
    "n",
    "P",
    "g",
    "y",
    "d",
    "gamma",
    "C",
    "b",
    "projection",
    "pairs",
    "g_prime",
    "deficit",
    "deficit_bound",
    "baseline",
    "seed",
];

/// Writes `records` as CSV with `header` first; an empty list yields a
/// header-only file.
pub fn write_csv<T: Serialize, W: Write>(out: W, header: &[&str], records: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: std::io::Read>(input: R) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize().map(|r| r.map_err(LabError::from)).collect()
}

pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), &RESULT_HEADER, records)
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>> {
    read_csv(text.as_bytes())
}

/// Human-readable per-cell summary with the regime diagnostics.
pub fn emit_summary(records: &[ResultRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<9} {:>3} {:>11} {:>3} {:>8} {:>6} {:>12} {:>10} {:>12} {:>6} {:>10} {:>4}\n",
        "mode", "n", "P", "b", "epsilon", "gamma", "mass", "std_err", "baseline", "ratio", "zeta", "cond"
    ));
    for r in records {
        let ratio = if r.baseline > 0.0 { r.estimate / r.baseline } else { f64::NAN };
        out.push_str(&format!(
            "{:<9} {:>3} {:>11} {:>3} {:>8.3} {:>6} {:>12.6e} {:>10.2e} {:>12.6e} {:>6.3} {:>10.3e} {:>4}\n",
            r.mode,
            r.n,
            r.p,
            r.b,
            r.epsilon,
            r.gamma.to_string(),
            r.estimate,
            r.std_err,
            r.baseline,
            ratio,
            r.zeta,
            if r.condition_ok { "yes" } else { "no" }
        ));
    }
    out
}
