//! Connected-driving subsystems modeled as communicating state charts.
//!
//! - [`chart`]: flat charts, run-to-completion dispatch, state-space enumeration.
//! - [`dsl`]: the `.scd` text format (parser, diagnostics, pretty-printer).
//! - [`refmodel`]: the built-in intersection model and combination codes.
//! - [`sim`]: seeded scenario generation and trace files.
//! - [`coverage`]: code histograms, coverage verdicts, coupon-collector estimates.
//! - [`testkit`]: state-chart unit tests and scenario assignment.

pub mod chart;
pub mod dsl;
pub mod refmodel;
pub mod sim;
pub mod coverage;
pub mod testkit;
