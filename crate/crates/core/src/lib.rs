//! Pseudospectral simulation and blow-up ansatz toolkit for the fourth-order
//! nonlinear Schrödinger equation
//!
//! ```text
//! i ∂ₜu + Δ²u + μΔu + λ|u|^α u = 0
//! ```
//!
//! on a periodic box. The crate covers exact exponent bookkeeping, parameter
//! selection for the blow-up construction, smooth weights vanishing on a
//! compact set, the iterated ansatz, split-step and Duhamel solvers, and
//! scaling diagnostics.

pub mod ansatz;
pub mod diagnostics;
pub mod error;
pub mod exponents;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod params;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{AdmissiblePair, DerivedExponents, ExtRational, Rational};
pub use field::{ComplexField, Grid, Spectral};
pub use num_complex::Complex64;
pub use params::{AnsatzParams, ParamMode, PhysParams};
pub use geometry::{CompactSetSpec, WeightField};
pub use diagnostics::SlopeFit;
pub use solver::{NormSeries, Scheme, SimSession, SolverConfig, Status, TrackedRegion};
