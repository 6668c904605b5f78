//! The experiment engine: augmented datasets, the fraction x replicate grid
//! and the report tables.

mod augment;
mod config;
mod grid;
mod tables;

pub use augment::{build_augmented, AugmentedDataset, Origin, TeacherFailure};
pub use config::{
    check_disjoint, CorpusSource, ExperimentConfig, FractionEndpoint, Ramp, RemoteTeacherSpec, SimSchedule,
    TeacherSpec, DEFAULT_FRACTIONS,
};
pub use grid::{
    run_cell, run_grid, Baseline, CellOutcome, CellSeeds, Evaluation, FractionSummary, FractionTests, GridCellResult,
    GridReport, PreparedCorpus,
};
pub use tables::{emit_tables, format_p_value, TableFiles};
