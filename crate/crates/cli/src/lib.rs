//! Configuration, orchestration and artifact writing for the `pairsim` binary.

pub mod config;
pub mod experiment;
pub mod validation;
