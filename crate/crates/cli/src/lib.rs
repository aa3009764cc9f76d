//! Driver behind the `hodge-dn` binary: run configurations, JSON reports
//! and golden-file regression.

pub mod config;
pub mod golden;
pub mod pipeline;

pub use config::{Check, RunConfig, Source};
pub use pipeline::{execute, Report};
