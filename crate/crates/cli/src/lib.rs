//! Batch front end for the `binoisy` rate library: parameter sweeps,
//! Monte Carlo validation and EVM planning, written as CSV or JSON.
//!
//! The parsers are public so that they can be exercised independently of
//! the binary.

mod error;
pub mod output;
pub mod parse;
mod run;
pub mod spec;

pub use error::SpecError;
pub use run::{run_sweep, Report};
pub use spec::{Format, RateMode, SweepSpec, Task};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "BINOISY_THREADS";

/// Parses a thread cap; `None` for an unset or empty value.
pub fn parse_threads(value: Option<&str>) -> Result<Option<usize>, SpecError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(t) => match t.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SpecError::Value {
                key: THREADS_ENV,
                reason: format!("`{t}` is not a positive integer"),
            }),
        },
    }
}

/// Renders a report in the requested format.
pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Csv => report.table.to_csv(),
        Format::Json => report.table.to_json(),
    }
}
