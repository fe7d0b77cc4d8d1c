//! Localized statistical shape spaces for surfaces on regular quad grids.
//!
//! The crate decomposes a surface with subdivision connectivity into
//! hierarchical wavelet coefficients ([`wavelet`]), learns an independent
//! small multilinear (Tucker) model per coefficient ([`tensor`], [`model`],
//! [`training`]), and fits the learned space to noisy, occluded oriented
//! point clouds and motion sequences with a bounded quasi-Newton block
//! scheme ([`optim`], [`fitting`]). [`synth`] generates reproducible
//! synthetic populations and measures fitting error.
//!
//! The crate is `no_std` (with `alloc`); all file formats and the command
//! line front end live in the companion `mlwave` crate.

#![no_std]
#![deny(unsafe_code)]
// index loops mirror the math they implement, and the negated comparisons
// are deliberate NaN rejection in validators
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod fitting;
pub mod geom;
pub mod grid;
pub mod linalg;
pub mod model;
mod num;
pub mod optim;
pub mod scan;
pub mod spatial;
pub mod synth;
pub mod tensor;
pub mod training;
pub mod wavelet;

pub use fitting::{fit, track, FitConfig, FitResult};
pub use geom::{SimilarityTransform, Vec3};
pub use grid::QuadGridShape;
pub use model::{FitWeights, MultilinearCoefficientModel, WaveletShapeModel};
pub use scan::{LandmarkSet, TargetScan};
pub use training::{train, TrainingSet};
