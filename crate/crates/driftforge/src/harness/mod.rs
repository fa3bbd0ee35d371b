//! Operational shell: configuration files, dataset ingestion, sweep
//! execution, and reporting. Everything the CLI does lives here so it is
//! equally scriptable as a library.

pub mod config;
pub mod data;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, SweepAxes, CONFIG_VERSION};
pub use data::{
    gen_synthetic, gen_synthetic_pair, load_idx, resolve_data_path, split_halves, write_idx,
    DatasetSource, DATA_DIR_ENV,
};
pub use report::{report, ReportOutput};
pub use sweep::{
    apply_cell, cell_seed, expand_cells, prepare_data, run_experiment, run_sweep, CellOutcome,
    CellSpec, SweepSummary,
};
