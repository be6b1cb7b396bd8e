//! Discrete Sacks–Uhlenbeck and biharmonic approximations of harmonic maps
//! from flat tori into round spheres, with bubble analysis and a one
//! dimensional min-max toy.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the experiments use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod maps;
pub mod minmax;
pub mod optimizer;
pub mod precondition;
pub mod scalar;
pub mod table;
pub mod target;

pub use error::{Error, Result};
pub use field::MapField;
pub use functionals::{AlphaParam, EnergyBreakdown, EpsParam, Functional};
pub use grid::{DomainGrid, Point};
pub use optimizer::{ContinuationSchedule, OptimizerConfig, RunTrace, StepMetric, StopReason};
pub use scalar::Scalar;
pub use target::{EmbeddedTarget, TargetManifold};

pub type Grid = DomainGrid<f64>;
pub type Field = MapField<f64>;
