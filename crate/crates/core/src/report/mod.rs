//! Scenario files, sweep tables, reference-table checks and the case study.

pub mod case_study;
pub mod golden;
pub mod scenario;
pub mod simulate;
pub mod sweep;
pub mod table;

pub use scenario::{OutputFormat, Scenario};
pub use sweep::run_sweep;
pub use table::{ResultRow, ResultTable};
