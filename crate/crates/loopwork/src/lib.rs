//! File formats, batch evaluation and the `loopwork` command line on top of
//! [`loopwork_core`].

pub mod batch;
pub mod cli;
pub mod error;
pub mod formats;

pub use error::CliError;
