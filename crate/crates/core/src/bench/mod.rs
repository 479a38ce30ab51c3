//! Random benchmark instances, suite runs and their reports.

pub mod generate;
pub mod report;
pub mod run;

pub use generate::{gen_random_instance, Bucket, Family, SuiteSpec};
pub use report::{emit_csv, emit_markdown, CSV_HEADER};
pub use run::{run_suite, RunRecord, SolverSpec, Status};
