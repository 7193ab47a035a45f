//! Command-line front end for the msde detector: score a CSV, run the
//! synthetic benchmark grid, or export pipeline internals.

pub mod commands;
pub mod config;
