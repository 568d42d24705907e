//! File formats, configuration and pipeline commands around `metasel-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
