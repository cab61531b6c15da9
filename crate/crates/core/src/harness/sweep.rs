//! Experiment configuration and the per-mode drivers.
//!
//! Seeding: bit length `n` owns the stream root `mix_seed(master, n)`. The
//! instance is drawn from `stream(root, 0)` and the noise master seed is
//! `mix_seed(root, 1)`, shared by every `ε` of that `n` so that the
//! `ε`-comparison uses common random numbers.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mass::{estimate_success_mass, noise_free_mass};
use super::records::*;
use super::stats::{density_scan, order_stats, parse_exponent};
use crate::error::{domain, LabError, Result};
use crate::lemma_mc::{extract_lemma_instance, lemma_rng, mc_mean, synthetic_matrix};
use crate::noise::NoiseConfig;
use crate::numtheory::{bit_length, largest_prime_factor, make_instance, DlogInstance, PrimeMode};
use crate::peaks::{binary_entropy, build_peak_set, condition_check, zeta_bound, Comparison, Gamma, PeakSet, PeakSetParams};
use crate::seed;

/// `c₁`, `δ₁`, `δ₂` used for the reported ζ.
pub const ZETA_C1: f64 = 2.0 / 3.0;
pub const ZETA_DELTA1: f64 = 0.4;
pub const ZETA_DELTA2: f64 = 1.0 / 64.0;
/// `c` used for the regime diagnostic.
pub const CONDITION_C: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Sweep,
    Lemma,
    Density,
    OrderStats,
    Goodset,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Lemma => "lemma",
            Mode::Density => "density",
            Mode::OrderStats => "order-stats",
            Mode::Goodset => "goodset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimeKind {
    Random,
    Fouvry,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Bit lengths; ignored for `density`.
    pub n: Vec<u32>,
    pub b: u32,
    pub epsilon: Vec<f64>,
    pub prime_mode: PrimeKind,
    /// Required when `prime_mode` is `explicit`.
    pub prime: Option<u64>,
    pub gamma: Gamma,
    pub cap_c: u64,
    /// Noise realizations per cell.
    pub trials: u64,
    /// `u*` values per trial; `None` means all `P-1`. Clamped to `P-1`.
    pub ustar_samples: Option<u64>,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// `density`: sieve limit.
    pub x_max: u64,
    /// `order-stats`: draws per `n`.
    pub samples: u64,
    /// `order-stats`: exponent `c₁` as `a/b`.
    pub c1: String,
    /// `lemma`: Monte Carlo trials per check.
    pub lemma_trials: u64,
    /// `lemma`: the `t` of extracted instances.
    pub lemma_t: f64,
    /// `lemma`: include the synthetic matrix.
    pub lemma_synthetic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            n: vec![8],
            b: 2,
            epsilon: vec![1.0],
            prime_mode: PrimeKind::Random,
            prime: None,
            gamma: Gamma::half(),
            cap_c: 12,
            trials: 20,
            ustar_samples: None,
            master_seed: 0,
            output: None,
            format: Format::Csv,
            x_max: 100_000,
            samples: 10_000,
            c1: "2/3".into(),
            lemma_trials: 10_000,
            lemma_t: 1.0,
            lemma_synthetic: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks ranges and fills `n` from an explicit prime when `n` is empty.
    pub fn validated(mut self) -> Result<Self> {
        if self.prime_mode == PrimeKind::Explicit {
            let Some(p) = self.prime else {
                return domain("prime_mode explicit needs a prime");
            };
            if self.n.is_empty() {
                self.n = vec![bit_length(p)];
            }
        }
        let needs_n = !matches!(self.mode, Mode::Density);
        if needs_n && self.n.is_empty() {
            return domain("n range is empty");
        }
        let needs_eps = matches!(self.mode, Mode::Simulate | Mode::Sweep | Mode::Lemma);
        if needs_eps && self.epsilon.is_empty() {
            return domain("epsilon list is empty");
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return domain("epsilon values must be finite and non-negative");
        }
        if self.b < 2 {
            return domain(format!("b = {} is below 2", self.b));
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.ustar_samples == Some(0) {
            return domain("ustar_samples must be at least 1");
        }
        if self.mode == Mode::Simulate && (self.n.len() != 1 || self.epsilon.len() != 1) {
            return domain("simulate runs a single (n, epsilon) cell");
        }
        self.peak_params()?;
        Ok(self)
    }

    /// `γ = 1/2` keeps the closed test; larger `γ` uses the strict one.
    pub fn peak_params(&self) -> Result<PeakSetParams> {
        let params = PeakSetParams {
            gamma: self.gamma,
            cap_c: self.cap_c,
            comparison: if self.gamma == Gamma::half() {
                Comparison::Closed
            } else {
                Comparison::Open
            },
            ..PeakSetParams::original()
        }
        .with_b(self.b);
        params.validated()
    }

    fn prime_mode(&self) -> PrimeMode {
        match (self.prime_mode, self.prime) {
            (PrimeKind::Explicit, Some(p)) => PrimeMode::Explicit(p),
            (PrimeKind::Fouvry, _) => PrimeMode::Fouvry,
            _ => PrimeMode::Random,
        }
    }

    /// Instance and noise master seed for bit length `n`.
    pub fn instance_for(&self, n: u32) -> Result<(DlogInstance, u64)> {
        let root = seed::mix_seed(self.master_seed, n as u64);
        let inst = make_instance(n, self.prime_mode(), &mut seed::stream(root, 0))
            .map_err(|e| e.in_cell(format!("instance n={n}")))?;
        Ok((inst, seed::mix_seed(root, 1)))
    }
}

/// Output of one run, one table per mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Results(Vec<ResultRecord>),
    Lemma(Vec<LemmaRecord>),
    Density(Vec<DensityBand>),
    OrderStats(Vec<OrderStatsRecord>),
    GoodSet(Vec<GoodSetRecord>),
}

impl Report {
    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        fn emit<T: Serialize, W: Write>(format: Format, out: W, header: &[&str], rows: &[T]) -> Result<()> {
            match format {
                Format::Csv => write_csv(out, header, rows),
                Format::Json => {
                    let mut out = out;
                    serde_json::to_writer_pretty(&mut out, rows)?;
                    writeln!(out)?;
                    Ok(())
                }
            }
        }
        match self {
            Report::Results(r) => emit(format, out, &RESULT_HEADER, r),
            Report::Lemma(r) => emit(format, out, &LEMMA_HEADER, r),
            Report::Density(r) => emit(format, out, &DENSITY_HEADER, r),
            Report::OrderStats(r) => emit(format, out, &ORDER_STATS_HEADER, r),
            Report::GoodSet(r) => emit(format, out, &GOODSET_HEADER, r),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Report::Results(r) => r.len(),
            Report::Lemma(r) => r.len(),
            Report::Density(r) => r.len(),
            Report::OrderStats(r) => r.len(),
            Report::GoodSet(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs `cfg.mode`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let cfg = cfg.clone().validated()?;
    Ok(match cfg.mode {
        Mode::Simulate | Mode::Sweep => Report::Results(run_sweep(&cfg)?),
        Mode::Lemma => Report::Lemma(run_lemma(&cfg)?),
        Mode::Density => Report::Density(density_scan(cfg.x_max)?),
        Mode::OrderStats => {
            let c1 = parse_exponent(&cfg.c1)?;
            let recs = cfg
                .n
                .iter()
                .map(|&n| order_stats(n, c1, cfg.samples, seed::mix_seed(cfg.master_seed, n as u64)))
                .collect::<Result<_>>()?;
            Report::OrderStats(recs)
        }
        Mode::Goodset => Report::GoodSet(run_goodset(&cfg)?),
    })
}

/// Regime diagnostics of one cell: `(ζ, condition holds)`.
pub fn diagnostics(n: u32, b: u32, epsilon: f64) -> (f64, bool) {
    let zeta = zeta_bound(n, b, ZETA_C1, ZETA_DELTA1, ZETA_DELTA2)
        .map(|z| z.zeta)
        .unwrap_or(f64::NAN);
    let c_star = ZETA_DELTA1 * ZETA_DELTA2 * n.saturating_sub(b) as f64 / n as f64;
    (zeta, condition_check(n as u64, b, epsilon, CONDITION_C, c_star))
}

struct Prepared {
    n: u32,
    inst: DlogInstance,
    noise_seed: u64,
    peaks: PeakSet,
    baseline: f64,
    q: u64,
}

fn prepare(cfg: &ExperimentConfig, params: &PeakSetParams, n: u32) -> Result<Prepared> {
    let (inst, noise_seed) = cfg.instance_for(n)?;
    let peaks = build_peak_set(&inst, params).map_err(|e| e.in_cell(format!("peak set n={n}")))?;
    Ok(Prepared {
        n,
        baseline: noise_free_mass(&inst, &peaks),
        q: largest_prime_factor(inst.p - 1)?,
        inst,
        noise_seed,
        peaks,
    })
}

/// Every `(n, ε)` cell of `cfg`, ordered by `n` then by position in the `ε` list.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let params = cfg.peak_params()?;
    let prepared = cfg
        .n
        .iter()
        .map(|&n| prepare(cfg, &params, n))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(&Prepared, f64)> = prepared
        .iter()
        .flat_map(|p| cfg.epsilon.iter().map(move |&e| (p, e)))
        .collect();
    cells
        .par_iter()
        .map(|&(prep, epsilon)| {
            let start = Instant::now();
            let inst = &prep.inst;
            let ustar = cfg.ustar_samples.unwrap_or(inst.order()).min(inst.order());
            let noise = NoiseConfig::new(cfg.b, epsilon, prep.noise_seed);
            let est = estimate_success_mass(inst, &noise, &prep.peaks, cfg.trials, ustar)
                .map_err(|e| e.in_cell(format!("cell n={} epsilon={epsilon}", prep.n)))?;
            let (zeta, condition_ok) = diagnostics(prep.n, cfg.b, epsilon);
            Ok(ResultRecord {
                schema_version: SCHEMA_VERSION,
                mode: cfg.mode.name().into(),
                n: prep.n,
                p: inst.p,
                g: inst.g,
                y: inst.y,
                d: inst.d,
                q: prep.q,
                b: cfg.b,
                epsilon,
                gamma: cfg.gamma,
                cap_c: cfg.cap_c,
                trials: cfg.trials,
                ustar_samples: ustar,
                estimate: est.estimate,
                std_err: est.std_err,
                baseline: prep.baseline,
                zeta,
                condition_ok,
                seed: cfg.master_seed,
                wall_ms: start.elapsed().as_millis() as u64,
            })
        })
        .collect()
}

fn deficit_bound(n: u32, b: u32, delta1: f64) -> f64 {
    f64::powi(2.0, b as i32 - 1) * f64::powf(2.0, binary_entropy(delta1) * n.saturating_sub(b - 1) as f64)
}

fn run_goodset(cfg: &ExperimentConfig) -> Result<Vec<GoodSetRecord>> {
    let params = cfg.peak_params()?;
    cfg.n
        .iter()
        .map(|&n| {
            let prep = prepare(cfg, &params, n)?;
            let inst = prep.inst;
            Ok(GoodSetRecord {
                schema_version: SCHEMA_VERSION,
                n,
                p: inst.p,
                g: inst.g,
                y: inst.y,
                d: inst.d,
                gamma: cfg.gamma,
                cap_c: cfg.cap_c,
                b: cfg.b,
                projection: prep.peaks.projection_len() as u64,
                pairs: prep.peaks.pair_count() as u64,
                g_prime: prep.peaks.g_prime_len() as u64,
                deficit: prep.peaks.g_prime_deficit() as u64,
                deficit_bound: deficit_bound(n, cfg.b, params.delta1),
                baseline: prep.baseline,
                seed: cfg.master_seed,
            })
        })
        .collect()
}

/// Peak set of the instance `cfg` draws for bit length `n`.
pub fn peak_set_for(cfg: &ExperimentConfig, n: u32) -> Result<PeakSet> {
    let (inst, _) = cfg.instance_for(n)?;
    build_peak_set(&inst, &cfg.peak_params()?)
}

fn run_lemma(cfg: &ExperimentConfig) -> Result<Vec<LemmaRecord>> {
    if cfg.lemma_trials < 2 {
        return domain("lemma_trials must be at least 2");
    }
    let mut out = Vec::new();
    if cfg.lemma_synthetic {
        for (i, c) in synthetic_matrix(cfg.master_seed).iter().enumerate() {
            let est = mc_mean(&c.instance, cfg.lemma_trials, &mut lemma_rng(cfg.master_seed, i as u64));
            let bound = c.instance.bound();
            out.push(LemmaRecord {
                schema_version: SCHEMA_VERSION,
                source: format!("synthetic:{}", serde_json::to_value(c.family)?.as_str().unwrap_or("?")),
                n: 0,
                p: 0,
                v: 0,
                b: 0,
                epsilon: 0.0,
                k: c.k as u64,
                universe: c.universe,
                a: c.a,
                t: c.t,
                zeta_emp: c.instance.zeta_emp,
                trials: est.trials,
                mean: est.mean,
                std_err: est.std_err,
                bound,
                holds: est.mean <= bound + 4.0 * est.std_err,
                seed: cfg.master_seed,
            });
        }
    }
    let params = cfg.peak_params()?;
    for &n in &cfg.n {
        let (inst, noise_seed) = cfg.instance_for(n)?;
        let peaks = build_peak_set(&inst, &params)?;
        // the v of G' with the most noisy positions, smallest v on ties
        let Some(entry) = peaks
            .entries()
            .iter()
            .filter(|e| peaks.in_g_prime(e.v))
            .max_by_key(|e| (peaks.s_v_size(e.v), std::cmp::Reverse(e.v)))
        else {
            log::warn!("G' is empty for n = {n}; no extracted lemma instance");
            continue;
        };
        for (j, &epsilon) in cfg.epsilon.iter().enumerate() {
            if epsilon == 0.0 {
                continue;
            }
            let noise = NoiseConfig::new(cfg.b, epsilon, noise_seed);
            let real = noise.realization(n, 0);
            let lemma = extract_lemma_instance(&inst, &noise, &real, entry.v, entry.ws[0], 0, cfg.lemma_t)
                .map_err(|e: LabError| e.in_cell(format!("lemma n={n} epsilon={epsilon}")))?;
            let est = mc_mean(&lemma, cfg.lemma_trials, &mut lemma_rng(noise_seed, j as u64));
            let bound = lemma.bound();
            out.push(LemmaRecord {
                schema_version: SCHEMA_VERSION,
                source: "instance".into(),
                n,
                p: inst.p,
                v: entry.v,
                b: cfg.b,
                epsilon,
                k: lemma.k() as u64,
                universe: lemma.universe,
                a: lemma.a,
                t: lemma.t,
                zeta_emp: lemma.zeta_emp,
                trials: est.trials,
                mean: est.mean,
                std_err: est.std_err,
                bound,
                holds: est.mean <= bound + 4.0 * est.std_err,
                seed: cfg.master_seed,
            });
        }
    }
    Ok(out)
}
