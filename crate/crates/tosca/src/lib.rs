//! File formats, reports, experiment runner and command-line interface for
//! [`tosca_core`].

pub mod cli;
pub mod error;
pub mod formats;
pub mod report;
pub mod runner;

pub use cli::run_cli;
pub use error::{FormatError, ReportError};
pub use tosca_core;
