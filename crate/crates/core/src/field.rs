//! Periodic grids, complex fields and the spectral machinery underneath every
//! other module.
//!
//! A [`Grid`] is the box `[-L, L)^dim` sampled with `points` nodes per axis.
//! Values are stored row-major with the last axis varying fastest. Wavenumbers
//! follow the usual FFT ordering, `xi_m = pi m / L` with
//! `m in {-P/2, ..., P/2 - 1}`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExtRational;

/// Fraction of spectral energy above which a derivative is flagged as
/// aliasing-prone.
pub const ALIAS_TAIL_FRACTION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

/// Serialized form of a [`Grid`]; validated on conversion.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    pub box_half_width: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.dim, s.points_per_axis, s.box_half_width)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            dim: g.dim,
            points_per_axis: g.points,
            box_half_width: g.half_width,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1..=3, got {dim}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points_per_axis must be a power of two >= 16, got {points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        Ok(Grid {
            dim,
            points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Per-axis indices of a flat index; unused axes are zero.
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    /// Position of a node; unused axes are zero.
    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    pub fn radius(&self, flat: usize) -> f64 {
        let x = self.node(flat);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Signed mode number of FFT slot `i`.
    pub fn mode(&self, i: usize) -> i64 {
        let p = self.points as i64;
        let i = i as i64;
        if i < p / 2 {
            i
        } else {
            i - p
        }
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        std::f64::consts::PI * self.mode(i) as f64 / self.half_width
    }

    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut k = [0.0; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(idx[axis]);
        }
        k
    }

    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * (self.points / 2) as f64 / self.half_width
    }
}

/// Fourier symbol of `Δ² + μΔ`.
pub fn dispersion_symbol(k: [f64; 3], mu: f64) -> f64 {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    k2 * k2 - mu * k2
}

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Multi-dimensional FFT bound to one grid. Plans come from a per-thread cache.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let (forward, inverse) = PLANS.with(|cell| {
            let mut cell = cell.borrow_mut();
            let (planner, cache) = &mut *cell;
            cache
                .entry(grid.points)
                .or_insert_with(|| {
                    (
                        planner.plan_fft_forward(grid.points),
                        planner.plan_fft_inverse(grid.points),
                    )
                })
                .clone()
        });
        Spectral {
            grid,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let p = self.grid.points;
        let dim = self.grid.dim;
        debug_assert_eq!(data.len(), self.grid.len());
        // last axis is contiguous
        fft.process(data);
        if dim == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); p];
        for axis in 0..dim - 1 {
            let stride = p.pow((dim - 1 - axis) as u32);
            let block = stride * p;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT in place, including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Multiply by a Fourier symbol in place: `data <- F^{-1}[symbol(xi) F data]`.
    pub fn apply_symbol<S>(&self, data: &mut [Complex64], symbol: S)
    where
        S: Fn([f64; 3]) -> Complex64,
    {
        self.forward(data);
        for (flat, v) in data.iter_mut().enumerate() {
            *v *= symbol(self.grid.wavevector(flat));
        }
        self.inverse(data);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    time: f64,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ComplexField { grid, values, time })
    }

    pub fn zeros(grid: Grid, time: f64) -> Self {
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            time,
        }
    }

    pub fn from_fn<F>(grid: Grid, time: f64, f: F) -> Self
    where
        F: Fn([f64; 3]) -> Complex64,
    {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        ComplexField { grid, values, time }
    }

    pub fn from_real(grid: Grid, time: f64, values: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            time,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteField)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    pub fn zip_map<F>(&self, other: &ComplexField, f: F) -> Self
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        debug_assert_eq!(self.values.len(), other.values.len());
        ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            time: self.time,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &ComplexField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Real parts as a plain vector.
    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Apply a Fourier multiplier.
    pub fn apply_symbol<S>(&self, symbol: S) -> Self
    where
        S: Fn([f64; 3]) -> Complex64,
    {
        let mut out = self.clone();
        Spectral::new(self.grid).apply_symbol(&mut out.values, symbol);
        out
    }

    /// `(Δ² + μΔ) f`, spectrally.
    pub fn biharmonic(&self, mu: f64) -> Self {
        self.apply_symbol(|k| Complex64::new(dispersion_symbol(k, mu), 0.0))
    }
}

/// Result of [`spectral_derivative`].
#[derive(Clone, Debug)]
pub struct Derivative {
    pub field: ComplexField,
    /// Fraction of the input's spectral energy in the outer third of the band.
    pub tail_fraction: f64,
    pub alias_risk: bool,
}

/// Apply `∂^β` by multiplying Fourier coefficients with `(iξ)^β`.
pub fn spectral_derivative(f: &ComplexField, beta: &[usize]) -> Result<Derivative> {
    let grid = *f.grid();
    if beta.len() > grid.dim() {
        return Err(Error::Domain(format!(
            "multi-index has {} entries for a {}-dimensional grid",
            beta.len(),
            grid.dim()
        )));
    }
    let order: usize = beta.iter().sum();
    if order > grid.points() / 4 {
        return Err(Error::Domain(format!(
            "derivative order {order} exceeds points_per_axis/4"
        )));
    }
    f.ensure_finite()?;
    let spectral = Spectral::new(grid);
    let mut data = f.values().to_vec();
    spectral.forward(&mut data);

    let cutoff = (grid.points() / 3) as i64;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (flat, v) in data.iter_mut().enumerate() {
        let e = v.norm_sqr();
        total += e;
        let idx = grid.axis_indices(flat);
        if (0..grid.dim()).any(|a| grid.mode(idx[a]).abs() > cutoff) {
            tail += e;
        }
        let k = grid.wavevector(flat);
        let mut factor = Complex64::new(1.0, 0.0);
        for (axis, &b) in beta.iter().enumerate() {
            factor *= Complex64::new(0.0, k[axis]).powi(b as i32);
        }
        // the Nyquist mode has no well-defined odd derivative
        if beta.iter().enumerate().any(|(a, &b)| {
            b % 2 == 1 && grid.mode(idx[a]) == -(grid.points() as i64) / 2
        }) {
            factor = Complex64::new(0.0, 0.0);
        }
        *v *= factor;
    }
    spectral.inverse(&mut data);
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    Ok(Derivative {
        field: ComplexField::new(grid, data, f.time())?,
        tail_fraction,
        alias_risk: tail_fraction > ALIAS_TAIL_FRACTION,
    })
}

/// Fraction of the spectral energy of `f` in the outer third of the band
/// along any axis. Large values mean `f` is not resolved by the grid.
pub fn tail_fraction(f: &ComplexField) -> f64 {
    let grid = *f.grid();
    let mut data = f.values().to_vec();
    Spectral::new(grid).forward(&mut data);
    let cutoff = (grid.points() / 3) as i64;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (flat, v) in data.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        let idx = grid.axis_indices(flat);
        if (0..grid.dim()).any(|a| grid.mode(idx[a]).abs() > cutoff) {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// `(∫|f|^p)^{1/p}` by a uniform Riemann sum; `p = ∞` is the max modulus.
pub fn lp_norm(f: &ComplexField, p: &ExtRational) -> Result<f64> {
    f.ensure_finite()?;
    match p.finite_f64() {
        None => Ok(f.max_abs()),
        Some(p) if p >= 1.0 => Ok(lp_norm_f64(f, p)),
        Some(p) => Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}"))),
    }
}

/// Floating-point exponent variant of [`lp_norm`] for internal use.
pub fn lp_norm_f64(f: &ComplexField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let dv = f.grid().cell_volume();
    if p == 2.0 {
        let s: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
        return (s * dv).sqrt();
    }
    let s: f64 = f.values().iter().map(|v| v.norm().powf(p)).sum();
    (s * dv).powf(1.0 / p)
}

pub fn l2_norm(f: &ComplexField) -> f64 {
    lp_norm_f64(f, 2.0)
}

/// Multi-indices of total order at most `s` in `dim` variables.
pub fn multi_indices(dim: usize, s: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=s {
        for b in 0..=if dim > 1 { s - a } else { 0 } {
            for c in 0..=if dim > 2 { s - a - b } else { 0 } {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// `(Σ_{|β|≤s} ‖∂^β f‖₂²)^{1/2}`, evaluated through Plancherel.
pub fn sobolev_norm(f: &ComplexField, s: usize) -> Result<f64> {
    f.ensure_finite()?;
    if s == 0 {
        return Ok(l2_norm(f));
    }
    let grid = *f.grid();
    let betas = multi_indices(grid.dim(), s);
    let mut data = f.values().to_vec();
    Spectral::new(grid).forward(&mut data);
    let mut sum = 0.0;
    for (flat, v) in data.iter().enumerate() {
        let k = grid.wavevector(flat);
        let weight: f64 = betas
            .iter()
            .map(|b| {
                (0..3)
                    .map(|a| k[a].powi(2 * b[a] as i32))
                    .product::<f64>()
            })
            .sum();
        sum += weight * v.norm_sqr();
    }
    Ok((sum * grid.cell_volume() / grid.len() as f64).sqrt())
}

/// L² norm restricted to the grid nodes inside an open ball.
pub fn local_l2(f: &ComplexField, center: &[f64], radius: f64) -> Result<f64> {
    local_l2_annulus(f, center, 0.0, radius, true)
}

/// L² norm over `{inner < |x - c| < outer}` (`inner <= |x - c|` when
/// `include_inner`).
pub fn local_l2_annulus(
    f: &ComplexField,
    center: &[f64],
    inner: f64,
    outer: f64,
    include_inner: bool,
) -> Result<f64> {
    f.ensure_finite()?;
    let grid = f.grid();
    let mut c = [0.0; 3];
    for (slot, &v) in c.iter_mut().zip(center.iter()) {
        *slot = v;
    }
    let mut count = 0usize;
    let mut sum = 0.0;
    for (flat, v) in f.values().iter().enumerate() {
        let x = grid.node(flat);
        let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
        let past_inner = if include_inner { d >= inner } else { d > inner };
        if d < outer && past_inner {
            count += 1;
            sum += v.norm_sqr();
        }
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((sum * grid.cell_volume()).sqrt())
}

/// Flat binary layout: little-endian `u32` dim, `u32` points per axis,
/// `f64` half-width `L`, `f64` time tag, then `points^dim` values as
/// interleaved `f64` real/imaginary parts.
pub fn write_field<W: Write>(f: &ComplexField, mut w: W) -> Result<()> {
    let g = f.grid();
    w.write_u32::<LittleEndian>(g.dim() as u32)?;
    w.write_u32::<LittleEndian>(g.points() as u32)?;
    w.write_f64::<LittleEndian>(g.half_width())?;
    w.write_f64::<LittleEndian>(f.time())?;
    for v in f.values() {
        w.write_f64::<LittleEndian>(v.re)?;
        w.write_f64::<LittleEndian>(v.im)?;
    }
    Ok(())
}

pub fn field_to_bytes(f: &ComplexField) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * f.values().len());
    write_field(f, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_field<R: Read>(mut r: R) -> Result<ComplexField> {
    let short = |e: std::io::Error| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated field file".into()),
        _ => Error::Io(e),
    };
    let dim = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    let points = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    let half_width = r.read_f64::<LittleEndian>().map_err(short)?;
    let time = r.read_f64::<LittleEndian>().map_err(short)?;
    let grid = Grid::new(dim, points, half_width)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = r.read_f64::<LittleEndian>().map_err(short)?;
        let im = r.read_f64::<LittleEndian>().map_err(short)?;
        values.push(Complex64::new(re, im));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    ComplexField::new(grid, values, time)
}

/// Columns `x,re,im`; 1D fields only.
pub fn field_to_csv(f: &ComplexField) -> Result<String> {
    let g = f.grid();
    if g.dim() != 1 {
        return Err(Error::Format(format!("CSV export needs a 1D field, got dim {}", g.dim())));
    }
    let rows: Vec<Vec<f64>> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![g.coord(i), v.re, v.im])
        .collect();
    let header: Vec<String> = ["x", "re", "im"].iter().map(|s| s.to_string()).collect();
    Ok(crate::diagnostics::csv_string(&header, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(p: usize, l: f64) -> Grid {
        Grid::new(1, p, l).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
        let g = Grid::new(2, 16, 2.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.mode(8), -8);
        assert_eq!(g.mode(7), 7);
    }

    #[test]
    fn fourth_derivative_of_plane_wave() {
        let g = grid1(64, 3.0);
        let m = 5.0;
        let xi = PI * m / 3.0;
        let f = ComplexField::from_fn(g, 0.0, |x| Complex64::new(0.0, xi * x[0]).exp());
        let d = spectral_derivative(&f, &[4]).unwrap();
        let expect = xi.powi(4);
        for (v, w) in d.field.values().iter().zip(f.values()) {
            assert!((v - w * expect).norm() < 1e-12 * expect);
        }
        assert!(!d.alias_risk);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = ComplexField::from_fn(g, 0.0, |_| Complex64::new(2.5, -1.0));
        for beta in [[1, 0], [0, 2], [2, 2]] {
            let d = spectral_derivative(&f, &beta).unwrap();
            assert!(d.field.max_abs() < 1e-13);
        }
    }

    #[test]
    fn second_derivative_of_sine() {
        let l = 2.0;
        let g = grid1(128, l);
        let f = ComplexField::from_fn(g, 0.0, |x| Complex64::new((PI * x[0] / l).sin(), 0.0));
        let d = spectral_derivative(&f, &[2]).unwrap();
        for (i, v) in d.field.values().iter().enumerate() {
            let x = g.coord(i);
            let exact = -(PI / l).powi(2) * (PI * x / l).sin();
            assert!((v.re - exact).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_rejects_nonfinite_and_high_order() {
        let g = grid1(16, 1.0);
        let mut f = ComplexField::zeros(g, 0.0);
        assert!(matches!(
            spectral_derivative(&f, &[5]),
            Err(Error::Domain(_))
        ));
        f.values_mut()[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            spectral_derivative(&f, &[1]),
            Err(Error::NonFiniteField)
        ));
    }

    #[test]
    fn alias_flag_for_rough_input() {
        let g = grid1(64, 1.0);
        let mut f = ComplexField::zeros(g, 0.0);
        f.values_mut()[10] = Complex64::new(1.0, 0.0);
        assert!(spectral_derivative(&f, &[1]).unwrap().alias_risk);
    }

    #[test]
    fn lp_norms_of_constant() {
        let g = grid1(32, 1.0);
        let f = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
        let two = ExtRational::integer(2);
        assert!((lp_norm(&f, &two).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(lp_norm(&f, &ExtRational::Infinity).unwrap(), 1.0);
        assert!(lp_norm(&f, &ExtRational::new(1, 2)).is_err());
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = grid1(256, 10.0);
        let f = ComplexField::from_fn(g, 0.0, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let n = lp_norm(&f, &ExtRational::integer(2)).unwrap();
        assert!((n - (PI / 2.0).powf(0.25)).abs() < 1e-8);
    }

    #[test]
    fn sobolev_norms() {
        let g = grid1(64, 2.0);
        let xi = PI * 3.0 / 2.0;
        let f = ComplexField::from_fn(g, 0.0, |x| Complex64::new(0.0, xi * x[0]).exp());
        let l2 = l2_norm(&f);
        assert!((sobolev_norm(&f, 0).unwrap() - l2).abs() < 1e-15);
        let h1 = sobolev_norm(&f, 1).unwrap();
        assert!((h1 * h1 - (1.0 + xi * xi) * l2 * l2).abs() < 1e-10 * h1 * h1);
        let z = ComplexField::zeros(g, 0.0);
        for s in 0..=4 {
            assert_eq!(sobolev_norm(&z, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn local_norms() {
        let g = grid1(1024, 1.0);
        let f = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
        let l = local_l2(&f, &[0.0], 0.5).unwrap();
        assert!((l - 1.0).abs() < 2.0 * g.spacing());
        let whole = local_l2(&f, &[0.0], 4.0).unwrap();
        assert!((whole - l2_norm(&f)).abs() < 1e-14);
        let bump = ComplexField::from_fn(g, 0.0, |x| {
            let s = 0.04 - (x[0] - 0.7).powi(2);
            Complex64::new(if s > 0.0 { (-1.0 / s).exp() } else { 0.0 }, 0.0)
        });
        assert!(local_l2(&bump, &[0.0], 0.4).unwrap() < 1e-8);
        let coarse = grid1(16, 1.0);
        let f = ComplexField::zeros(coarse, 0.0);
        assert!(matches!(
            local_l2(&f, &[0.06], 0.01),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn multi_dimensional_fft_roundtrip() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        let f = ComplexField::from_fn(g, 0.0, |x| {
            Complex64::new((PI * x[0]).sin() * (2.0 * PI * x[2]).cos(), x[1])
        });
        let s = Spectral::new(g);
        let mut data = f.values().to_vec();
        s.forward(&mut data);
        s.inverse(&mut data);
        for (a, b) in data.iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let g = Grid::new(2, 16, 1.5).unwrap();
        let f = ComplexField::from_fn(g, -0.125, |x| Complex64::new(x[0].sin(), x[1] * 1e-300));
        let bytes = field_to_bytes(&f);
        assert_eq!(bytes.len(), 24 + 16 * 256);
        let back = read_field(bytes.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(matches!(read_field(&bytes[..100]), Err(Error::Format(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_field(extra.as_slice()).is_err());
    }

    #[test]
    fn csv_export_is_one_dimensional() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = ComplexField::from_fn(g, 0.0, |x| Complex64::new(x[0], -x[0]));
        let csv = field_to_csv(&f).unwrap();
        let (h, rows) = crate::diagnostics::parse_csv(&csv).unwrap();
        assert_eq!(h, vec!["x", "re", "im"]);
        assert_eq!(rows.len(), 16);
        assert_eq!(rows[0], vec![-1.0, -1.0, 1.0]);
        let g2 = Grid::new(2, 16, 1.0).unwrap();
        assert!(field_to_csv(&ComplexField::zeros(g2, 0.0)).is_err());
    }
}
