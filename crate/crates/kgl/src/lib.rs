//! Std front end for `kgl-core`: file formats, parallel corpus ingestion,
//! run manifests and the `kgl` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod geojson;
pub mod io;
pub mod manifest;

pub use config::RunConfig;
pub use error::{KglError, Result};
