//! Runner, configuration, file formats and CLI around `hcb_core`.

pub mod analysis;
pub mod config;
pub mod lapack_backend;
pub mod output;
pub mod runner;
pub mod svg;
pub mod table;
