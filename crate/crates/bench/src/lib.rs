//! Benchmark fixtures shared by the criterion benches.

use std::f64::consts::PI;

use nls4_core::{Complex64, ComplexField, Grid, PhysParams, Rational};

/// `α = 2`, `λ = 0.3 − i`, `μ = 1` in one dimension.
pub fn physics() -> PhysParams {
    PhysParams::new(Rational::from_integer(2), Complex64::new(0.3, -1.0), 1, 1).expect("valid parameters")
}

/// A smooth, non-constant field on `[−π, π)` with `points` nodes.
pub fn smooth_field(points: usize) -> ComplexField {
    let grid = Grid::new(1, points, PI).expect("valid grid");
    ComplexField::from_fn(grid, 0.0, |x| {
        Complex64::new(0.8 * (1.0 + 0.5 * x[0].cos()), 0.24 * (2.0 * x[0]).sin())
    })
}
