//! Configuration, CSV I/O, plotting and the experiment runner behind the CLI.

pub mod config;
pub mod csv;
pub mod run;
pub mod svg;
