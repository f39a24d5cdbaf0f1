//! Experiment harness for the level-set estimation library: configures
//! problems and methods, executes seeded repetitions, scores classifier
//! snapshots on fixed random test sets, and emits CSV plus run metadata.

pub mod config;
pub mod experiment;
pub mod summary;
