//! Std companion to `spacemind-core`: bus backends, skill files, logs,
//! configuration, reports and the command-line front end.

pub mod app;
pub mod bus;
pub mod cli;
pub mod config;
pub mod logs;
pub mod remote;
pub mod report;
pub mod store;
