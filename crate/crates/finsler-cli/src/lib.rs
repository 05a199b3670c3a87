//! Scene-driven command line runner for the `finsler` library.
//!
//! A scene file (TOML) declares a chart, a metric, an optional
//! domain, endpoints, and solver parameters; the binary dispatches
//! them to the library and prints `key=value` records, writing curve
//! samples as CSV on request. Everything is deterministic given the
//! scene and its seed.

// Scene validation guards use `!(x > 0.0)` so NaN values are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod output;
pub mod scene;
