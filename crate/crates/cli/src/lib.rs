//! Command line front end for `regkit`: scenario files, reports, trace
//! export and the regression suite.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;
pub mod suite;
pub mod trace;

pub use commands::run;
pub use error::{CliError, EXIT_ASSERTION, EXIT_INPUT, EXIT_OK};
pub use report::{parse_report, ReportRecord};
pub use scenario::{parse as parse_scenario, ScenarioFile};
pub use trace::{parse_trace_csv, TraceTable};
