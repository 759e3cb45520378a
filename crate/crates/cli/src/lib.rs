//! Experiment runner for the kpzlab numerical library.

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;
