//! Instance generation, episode runs and reports.

mod generate;
mod report;

pub use crate::model::schema::load_instance;
pub use generate::{GeneratorSpec, ReleaseModel, GROUP_SIZES, ORDER_WINDOW};
pub use report::{
    config_digest, lambda3_grid, read_series_csv, run, run_with, sweep, write_series_csv, DispatcherTotals, Report, RunOutput,
    SeriesPoint, WallClock,
};
