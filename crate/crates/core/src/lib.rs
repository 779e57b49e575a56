//! Gaussian-process surrogates for probabilistic AC optimal power flow.

// NaN-rejecting `!(x > 0.0)` checks and index loops over coupled arrays are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acopf;
pub mod case_io;
pub mod gpr;
pub mod popf;
pub mod sensitivity;
