//! Spectral non-rigid shape correspondence.
//!
//! Meshes are matched through regularized functional maps computed from
//! per-vertex descriptors; point clouds (and mesh/cloud pairs) are matched by
//! descriptor similarity with Sinkhorn or column-softmax normalization. The
//! [`losses`] module evaluates the self-supervised objective that couples the
//! two routes, and [`eval`] scores correspondences by normalized geodesic
//! error.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod spectral;
pub mod descriptors;
pub mod fmap;
pub mod correspondence;
pub mod losses;
pub mod eval;
pub mod pipeline;

pub use error::{Error, Result};
