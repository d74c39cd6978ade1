//! Runner for tracksim scenarios, benchmarks, parameter search and solver
//! dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
