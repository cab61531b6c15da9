//! Experiment orchestration: success-mass estimation, sweeps, number-theoretic
//! statistics and the output tables.

pub mod mass;
pub mod records;
pub mod stats;
pub mod sweep;

pub use mass::{estimate_success_mass, noise_free_mass, realization_mass, MassEstimate};
pub use records::{emit_csv, emit_summary, parse_csv, ResultRecord};
pub use stats::{density_scan, order_stats};
pub use sweep::{run, run_sweep, ExperimentConfig, Format, Mode, PrimeKind, Report};
