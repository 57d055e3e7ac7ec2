//! Command-line driver for `ident-core`: configuration, field and system
//! files, run reports, plot series and the bundled benchmark replications.

pub mod cli;
pub mod config;
pub mod field_io;
pub mod replicate;
pub mod report;
