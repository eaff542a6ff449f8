//! File formats, parallel runners and the command-line driver for
//! [`divport_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod parallel;

pub use divport_core as core;
