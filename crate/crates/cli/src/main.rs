use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qdlog::harness::sweep::peak_set_for;
use qdlog::harness::{emit_summary, run, ExperimentConfig, Format, Mode, PrimeKind, Report};
use qdlog::Gamma;

/// Noisy-QFT discrete-log experiments.
#[derive(Parser, Debug)]
#[command(name = "qdlog", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success mass for a single (n, epsilon) cell.
    Simulate(RunArgs),
    /// Success mass over an n range and an epsilon list.
    Sweep(RunArgs),
    /// Monte Carlo checks of the dephasing bound.
    Lemma(RunArgs),
    /// Fouvry-prime fractions per dyadic band.
    Density(RunArgs),
    /// Tail of the additive order of d below P^c1.
    OrderStats(RunArgs),
    /// Size summary of the good peak set.
    Goodset(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrimeArg {
    Random,
    Fouvry,
    Explicit,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON config; flags given here override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bit lengths: `8`, `4,6,8` or the inclusive range `4..12`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    b: Option<u32>,
    /// Comma-separated noise levels.
    #[arg(long)]
    epsilon: Option<String>,
    /// Peak tolerance as `a/b`, integer or decimal.
    #[arg(long)]
    gamma: Option<Gamma>,
    #[arg(long)]
    cap_c: Option<u64>,
    #[arg(long, value_enum)]
    prime_mode: Option<PrimeArg>,
    /// Prime for `--prime-mode explicit`.
    #[arg(long)]
    prime: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    ustar_samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Sieve limit for `density`.
    #[arg(long)]
    x_max: Option<u64>,
    /// Draws per n for `order-stats`.
    #[arg(long)]
    samples: Option<u64>,
    /// Exponent for `order-stats`, e.g. `2/3`.
    #[arg(long)]
    c1: Option<String>,
    /// Monte Carlo trials per `lemma` check.
    #[arg(long)]
    lemma_trials: Option<u64>,
    /// Skip the synthetic matrix in `lemma`.
    #[arg(long)]
    no_synthetic: bool,
    /// Also write the peak set of the first n in text form (`goodset`).
    #[arg(long)]
    peaks_out: Option<PathBuf>,
    /// Print a readable summary to stderr (`simulate`, `sweep`).
    #[arg(long)]
    summary: bool,
}

fn parse_n(s: &str) -> Result<Vec<u32>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().context("range start")?;
        let hi: u32 = hi.trim().trim_start_matches('=').parse().context("range end")?;
        if lo > hi {
            bail!("empty n range {s}");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().with_context(|| format!("bad n `{x}`")))
        .collect()
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse().with_context(|| format!("bad epsilon `{x}`")))
        .collect()
}

fn build_config(mode: Mode, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(n) = &args.n {
        cfg.n = parse_n(n)?;
    } else if args.prime.is_some() && args.config.is_none() {
        // explicit prime without --n: take n from the prime
        cfg.n.clear();
    }
    if let Some(eps) = &args.epsilon {
        cfg.epsilon = parse_list(eps)?;
    }
    if let Some(p) = args.prime_mode {
        cfg.prime_mode = match p {
            PrimeArg::Random => PrimeKind::Random,
            PrimeArg::Fouvry => PrimeKind::Fouvry,
            PrimeArg::Explicit => PrimeKind::Explicit,
        };
    }
    if args.prime.is_some() {
        cfg.prime = args.prime;
        if args.prime_mode.is_none() {
            cfg.prime_mode = PrimeKind::Explicit;
        }
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    macro_rules! set {
        ($($field:ident <- $arg:expr),* $(,)?) => {
            $(if let Some(v) = $arg.clone() { cfg.$field = v; })*
        };
    }
    set!(
        b <- args.b,
        gamma <- args.gamma,
        cap_c <- args.cap_c,
        trials <- args.trials,
        master_seed <- args.seed,
        x_max <- args.x_max,
        samples <- args.samples,
        c1 <- args.c1,
        lemma_trials <- args.lemma_trials,
    );
    if args.ustar_samples.is_some() {
        cfg.ustar_samples = args.ustar_samples;
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    if args.no_synthetic {
        cfg.lemma_synthetic = false;
    }
    Ok(cfg.validated()?)
}

fn execute(mode: Mode, args: &RunArgs) -> Result<()> {
    let cfg = build_config(mode, args)?;
    log::info!("running {} with seed {}", mode.name(), cfg.master_seed);
    let report = run(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            report.write(cfg.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            report.write(cfg.format, stdout.lock())?;
        }
    }
    if args.summary {
        if let Report::Results(rows) = &report {
            eprint!("{}", emit_summary(rows));
        }
    }
    if let (Mode::Goodset, Some(path)) = (mode, &args.peaks_out) {
        let peaks = peak_set_for(&cfg, cfg.n[0])?;
        std::fs::write(path, peaks.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Report::Lemma(rows) = &report {
        let failed = rows.iter().filter(|r| !r.holds).count();
        if failed > 0 {
            log::warn!("{failed} of {} lemma checks exceed bound + 4 se", rows.len());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Lemma(a) => (Mode::Lemma, a),
        Command::Density(a) => (Mode::Density, a),
        Command::OrderStats(a) => (Mode::OrderStats, a),
        Command::Goodset(a) => (Mode::Goodset, a),
    };
    execute(mode, args)
}
