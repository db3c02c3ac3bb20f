//! Experiment harness around `peer_core`: benchmark files, run
//! configuration, checkpoints, manifests, sweeps, diagnostics and reports.
//! The `peerlab` binary is a thin wrapper over [`cli`].

pub mod analyze;
pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod report;
pub mod run;
pub mod tables;
