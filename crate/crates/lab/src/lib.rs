//! Command-line lab around `dskg-core`: identity suites, certificate
//! queries, single PDE runs and parameter sweeps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod plotdata;
pub mod record;
pub mod scan;
