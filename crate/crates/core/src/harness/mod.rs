//! Experiment harness: configuration, model problem set-up, the studies and
//! their output files.

pub mod config;
pub mod problem;
pub mod experiments;
pub mod output;
pub mod validate;
