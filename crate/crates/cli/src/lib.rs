//! Building blocks of the `rectprod` binary: run configuration, CSV
//! schemas with round-trip loaders, and the subcommand bodies. A library
//! target so integration tests can drive the pieces directly.

pub mod config;
pub mod csvio;
pub mod runs;
