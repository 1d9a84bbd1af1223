//! Command-line front-end for the `nearfield` library. Every command reads a
//! TOML experiment config and writes CSV or JSON for external plotting.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
