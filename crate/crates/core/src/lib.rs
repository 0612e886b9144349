//! Joint camera and piecewise-rigid deformation alignment for sets of images
//! that depict one scene without being geometrically consistent.
//!
//! The pipeline: load a scene directory ([`scene`]), normalize its depth
//! maps, align cameras and per-image deformable meshes ([`optimizer`]),
//! then warp and backproject every image into a merged point cloud
//! ([`output`]). [`eval`] holds the holdout protocol and the baselines;
//! [`synthetic`] generates scenes with known ground truth.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod camera;
pub mod config;
pub mod error;
pub mod eval;
pub mod mesh;
pub mod optimizer;
pub mod output;
pub mod pipeline;
pub mod scene;
pub mod synthetic;

pub use error::{Error, Result};
