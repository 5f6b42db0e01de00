//! Metric aggregation, savings and run reports.

mod report;
mod series;
mod stats;

pub use report::{
    compare, export_history, integral_savings, read_run, response_time, savings, summarize, write_report, write_run,
    ReportError, Savings, SeriesStats, Summary,
};
pub use series::SecondIntegrator;
pub use stats::{max, mean, median, nearest_rank, percentiles, Percentiles};
