//! File formats, experiment configuration, the comparison harness and
//! reporting on top of `travemb_core`.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod report;
pub mod spec_file;

pub use error::{Error, Result};
