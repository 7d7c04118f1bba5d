//! Numerical checks of curvature-dimension conditions `CD(K, N)` with negative
//! `N` on discretized one-dimensional metric measure spaces whose reference
//! measures may blow up at singular points.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cdcheck;
pub mod cli;
pub mod distortion;
pub mod error;
pub mod extended;
pub mod geodesics;
pub mod ikrw;
pub mod measure;
pub mod mmspace;
pub mod quad;
pub mod transport;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
