//! Matrix-weighted alpha-modulation analysis at desk scale.
//!
//! Dimension `n` is 1 or 2; vector signals have `N` complex components.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod almostdiag;
pub mod bapu;
pub mod covering;
pub mod error;
pub mod frame;
pub mod grid;
pub mod linalg;
pub mod multiplier;
pub mod norms;
pub mod quad;
pub mod sum;
pub mod weights;

pub use error::{Error, Result};
