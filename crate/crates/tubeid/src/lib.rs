//! Artifacts, configuration and command line around `tubeid-core`.
//!
//! Stages write plain JSON/CSV into one directory; see [`pipeline`] for the
//! file names and [`cli`] for the command-line surface.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use config::Config;
pub use error::{Failure, Kind, Stage};
