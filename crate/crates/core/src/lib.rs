//! Distributed regularized zero-forcing beamforming for cooperative
//! multi-cell downlinks.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod accounting;
pub mod admm;
pub mod amp;
pub mod bp;
pub mod ccoi;
pub mod channel;
pub mod codec;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod symbols;
pub mod topology;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, Rng, C64};
