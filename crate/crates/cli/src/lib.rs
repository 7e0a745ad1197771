//! Command-line experiments built on the `granusense` toolkit.

pub mod cli;
pub mod commands;
pub mod config;
pub mod plot;
pub mod run;
pub mod tables;
