//! Arbitrage and deflator analysis for illiquid markets on finite event trees.

// Errors carry node labels and offending values; they are built once per
// failed run, so their size is not worth boxing.
#![allow(clippy::result_large_err)]

pub mod analysis;
pub mod costs;
pub mod kernel;
pub mod lp;
pub mod market;
pub mod num;
