//! File formats, dataset IO and the `csod` command-line workflows built on
//! `csod-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod pnm;
pub mod train;

pub use error::CliError;
