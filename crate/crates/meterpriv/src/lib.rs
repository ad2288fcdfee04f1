//! Experiment harness for the smart-meter privacy models in
//! `meterpriv-core`: config parsing, trace and tariff files, parameter
//! sweeps and CSV / JSON reports.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod report;

pub use config::{ExperimentConfig, Format};
pub use error::{HarnessError, Result};
pub use harness::{attack_table, privacy_power_table, run, sweep_pe, RunOutput};
pub use report::{Table, Value};
