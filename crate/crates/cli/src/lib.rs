//! Command-line front end and HTTP collection service.

pub mod commands;
pub mod service;

pub use commands::{run, Cli};
