//! Command-line front end and HTTP service over `facetmag-core`.

pub mod error;
pub mod service;

pub use error::{AppError, Kind};

/// Environment variable naming the default workspace root.
pub const WORKSPACE_ENV: &str = "FACETMAG_WORKSPACE";
