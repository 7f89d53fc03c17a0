//! IO, configuration, plotting and experiment harness for the transport
//! library. The `w1ray` binary is a thin clap front-end over these modules.

// `!(x > 0.0)` is used for parameter guards on purpose: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod harness;
pub mod io;
pub mod plot;
