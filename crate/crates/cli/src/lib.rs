//! Benchmark harness around the core toolkit: configuration with file and
//! flag layers, reproducible structured reports, scheme comparison tables,
//! trajectory export, and the geometric verification studies — everything
//! the `pmoc` binary does, exposed as a library so tests can drive it
//! in-process.

pub mod config;
pub mod harness;
pub mod report;

pub use config::{
    BasisChoice, ConfigError, ConfigOverrides, GuessStrategy, RunConfig, SchemeChoice,
    SystemChoice,
};
pub use harness::{
    compare, exit_code_for, export_trajectory, render_comparison, run, verify, write_report,
    CliError, Comparison, CompareRow, ReportPaths, StudyChoice, VerifyReport,
};
pub use report::{BenchmarkReport, ReportError, RunRecord, TrajectorySample};
