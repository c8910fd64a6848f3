//! Sweeps, plots and the acceptance battery behind the `lpproj` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod plot;
pub mod seeds;
pub mod table;
pub mod validate;
