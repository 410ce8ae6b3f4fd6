//! Configuration-driven experiments and their CSV / JSON outputs.

mod config;
mod run;

pub use config::{
    default_offsets, defaults, parse_config, parse_config_str, samples_params, validate, ExperimentConfig,
    ExperimentKind,
};
pub use run::{compute_experiment, format_float, metadata_path, run_experiment, write_outputs, ResultTable};
