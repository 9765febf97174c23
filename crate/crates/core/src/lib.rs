//! DC microgrid secondary-control laboratory: small-signal grid model,
//! controller design, root-locus sweeps and transient scoring.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod exec;
pub mod grid;
pub mod report;
pub mod sim;
pub mod stability;
pub mod tf;
pub mod tuner;

pub use exec::Execution;
