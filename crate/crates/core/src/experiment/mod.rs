//! Configuration-driven runs: TOML configuration with line-precise errors,
//! the five run modes, and deterministic file output with JSON side-cars.

mod config;
mod output;
mod runner;

pub use config::{
    default_input_amplitude, load_config, parse_config, CompileSection, ConfigError, ExperimentConfig,
    ImperfectionSection, InputSection, LoadedConfig, Mode, OutputSection, ProtocolSection, ReproduceSection,
    SamplingSection, SweepParameter, SweepSection, TomographySection, TomographyTarget,
};
pub use output::{json_bytes, sidecar_name, Cell, RunOutput, Table};
pub use runner::{run, squeeze_target};
