//! Files, datasets and the command line around [`ddet_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod ppm;
pub mod report;
pub mod sdd;

pub use error::{Error, Result};
