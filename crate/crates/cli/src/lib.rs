//! Experiment runner for `rosenau-core`: TOML configurations, presets,
//! report bundles and plot data.

pub mod config;
pub mod plotdata;
pub mod runner;

pub use config::{ExperimentConfig, Preset};
pub use plotdata::{export_plotdata, PlotFormat, PlotSource};
pub use runner::{run_experiment, Check, VerdictReport};
