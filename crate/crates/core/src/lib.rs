#![cfg_attr(not(feature = "std"), no_std)]
// NaN must fail these checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod entropy;
pub mod bounds;
pub mod error;
pub mod keyrate;
pub mod logspace;
pub mod montecarlo;
pub mod mub;
pub mod protocol;
pub mod stats;

pub use error::{Error, Result};
