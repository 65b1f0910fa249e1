//! File formats, job configuration and the command-line front end for the
//! `rebelfire-core` verifier.

pub mod cli;
pub mod config;
pub mod job;
pub mod report;
pub mod trace;

pub use config::{Format, JobConfig};
pub use report::ReportFile;
pub use trace::TraceFile;
