//! Moment deconvolution for stacked random-matrix observations.
//!
//! Given observations `Y = D + σX` (or `Y = D X1 + X2`) with complex Gaussian
//! `X`, the crate computes exact unbiased estimators for the mixed moments of
//! `D`, their variances under every way of stacking `L` observations into one
//! compound matrix, and the Monte-Carlo harness that checks both.
//!
//! Exact quantities are [`MomentExpression`]s with rational coefficients over
//! a moment basis; they are evaluated once the moments are known.

pub mod calculus;
pub mod diagram;
mod dsu;
pub mod error;
pub mod expr;
pub mod matrix;
pub mod partition;
pub mod rational;
pub mod report;
pub mod sampling;
pub mod simulate;
pub mod stats;
pub mod variance;
pub mod wishart;

pub use calculus::{
    scale_moments, Calculus, Capacity, ModelDims, StackingKind, StackingScheme, DEFAULT_P_MAX,
};
pub use diagram::{
    enumerate_sp, enumerate_spr, sp_count, summarize, DiagramShape, DiagramSummary,
    PartialPermutation,
};
pub use error::{Error, Result};
pub use expr::{Basis, MomentExpression, MomentValues};
pub use matrix::{
    gram_moments, moment_values, stack, stack_with_order, trace_powers, ComplexMatrixBuffer,
    FillOrder,
};
pub use partition::PartitionIndex;
pub use report::fmt_sig;
pub use sampling::SeededSampler;
pub use simulate::DEFAULT_SEED;
pub use variance::{
    aspect_ratio, factorizations, optimal_stacking, write_curve_csv, AsymptoticLimits, Combination,
    CurvePoint, VarianceReport,
};
pub use wishart::{
    invert_map, two_stage_estimate, wishart_forward, MomentVector, TwoStageEstimator, TwoStageMode,
    WishartMap,
};
