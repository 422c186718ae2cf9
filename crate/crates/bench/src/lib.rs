//! Configuration parsing, seeded trial sweeps and result export for tomolift.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ConfigError, SweepSpec, SweepVariable};
pub use output::{save_csv, save_plot, write_csv};
pub use sweep::{aggregate, run_sweep, run_trials, trial_seed, AggregateRow};
