#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod complex;
pub mod error;
pub mod geometry;
pub mod homology;
pub mod io;
pub mod lean;
pub mod oracle;
pub mod pipeline;
pub mod samplers;
pub mod selftest;
pub mod sparsify;
pub mod tangent;

pub use error::{Error, Result};
