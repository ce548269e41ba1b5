//! Multi-view echocardiographic wall-motion analysis.
//!
//! The pipeline extracts the left-ventricle endocardial boundary per frame
//! with a ridge-constrained region-based active contour, re-parameterizes it
//! as smooth quartic polynomials split at the apex, partitions the boundary
//! into myocardial segments, converts per-segment motion into normalized
//! displacement features, and detects myocardial infarction with a suite of
//! classical classifiers under stratified cross-validation with single-view
//! and multi-view fusion.

pub mod apoly;
pub mod contour;
pub mod dataio;
pub mod eval;
pub mod export;
pub mod geometry;
pub mod kinematics;
pub mod ml;
pub mod pipeline;
pub mod poly;
pub mod raster;
pub mod rng;
pub mod synth;
