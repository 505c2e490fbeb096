#![cfg_attr(not(feature = "std"), no_std)]
// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Core algorithms for learned FMCW radar interference mitigation.
//!
//! Everything in this crate is pure computation over caller-provided buffers
//! and seeded generators; it builds without `std` (only `alloc` is required).
//! File formats, the CLI and parallel orchestration live in the `arim` crate.

extern crate alloc;

mod codec;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fcn;
pub mod fft;
pub mod mitigation;
pub mod profile;
pub mod radar;
pub mod timefreq;

pub use error::{Error, Result};
pub use profile::Profile;
pub use num_complex::{Complex32, Complex64};
