//! Scenario ingestion, runners and CSV emitters behind the `qot` binary.

pub mod config;
pub mod emit;
pub mod numfmt;
pub mod run;
pub mod table_io;
