//! Time integration of `i∂ₜu + Δ²u + μΔu + λ|u|^αu = 0` on the periodic box.
//!
//! Both sub-flows of the splitting are exact: the linear part is a unimodular
//! Fourier multiplier and the nonlinear part is the closed-form solution of the
//! pointwise ODE `i∂ₜu + λ|u|^αu = 0`. Step sizes are chosen by step doubling.
//! An ETDRK4 integrator and a Picard iteration of the Duhamel formula are
//! provided as independent cross-checks.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzProfile;
use crate::diagnostics::{csv_string, slope_fit, SlopeFit};
use crate::error::{Error, Result};
use crate::exponents::AdmissiblePair;
use crate::field::{
    dispersion_symbol, l2_norm, local_l2_annulus, lp_norm, lp_norm_f64, sobolev_norm, ComplexField,
    Grid, Spectral,
};
use crate::params::{ratio_f64, PhysParams};

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    StrangSplit,
    Etdrk4,
    Picard,
}

impl Scheme {
    /// Global order of the step-based schemes.
    fn order(self) -> u32 {
        match self {
            Scheme::StrangSplit => 2,
            Scheme::Etdrk4 => 4,
            Scheme::Picard => 2,
        }
    }
}

/// Step-size control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtPolicy {
    /// Step sizes never exceed `dt_initial`'s scale but are otherwise chosen
    /// from the step-doubling estimate. With `adaptive = false` every step has
    /// size `dt_initial` (except a shortened last one) and no estimate is made.
    pub adaptive: bool,
    /// Per-step tolerance on `max|u_fine − u_coarse| / max|u_fine|`.
    pub tolerance: f64,
    /// Safety factor applied to step-size proposals.
    pub safety: f64,
    /// Bound on `|λ|·max|u|^α·dt`, i.e. the nonlinear phase per step. It also
    /// keeps the nonlinear substep clear of its own blow-up when `Im λ < 0`.
    pub max_nonlinear: f64,
    /// Optional cap `dt ≤ dx4_factor·dx⁴`; off by default because the
    /// linear flow is exact and the error estimate already controls the
    /// coupling error.
    pub dx4_factor: Option<f64>,
    pub dt_max: Option<f64>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy {
            adaptive: true,
            tolerance: 1e-7,
            safety: 0.9,
            max_nonlinear: 0.1,
            dx4_factor: None,
            dt_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt_initial: f64,
    #[serde(default)]
    pub dt_policy: DtPolicy,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    /// Picard stops once the sup-over-mesh L² update falls below
    /// `picard_tol` times the sup-over-mesh L² norm of the iterate.
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    /// Number of uniform time intervals for the Duhamel quadrature.
    #[serde(default = "default_picard_mesh")]
    pub picard_mesh: usize,
    /// Hard limit on accepted plus rejected steps.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}
fn default_picard_max_iter() -> usize {
    30
}
fn default_picard_tol() -> f64 {
    1e-13
}
fn default_picard_mesh() -> usize {
    256
}
fn default_max_steps() -> usize {
    5_000_000
}

impl SolverConfig {
    pub fn new(scheme: Scheme, dt_initial: f64, t_start: f64, t_end: f64) -> Self {
        SolverConfig {
            scheme,
            dt_initial,
            dt_policy: DtPolicy::default(),
            t_start,
            t_end,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            picard_max_iter: default_picard_max_iter(),
            picard_tol: default_picard_tol(),
            picard_mesh: default_picard_mesh(),
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.dt_policy;
        let checks = [
            (self.dt_initial > 0.0 && self.dt_initial.is_finite(), "dt_initial must be positive"),
            (self.t_start.is_finite() && self.t_end.is_finite(), "times must be finite"),
            (self.t_start != self.t_end, "t_start and t_end must differ"),
            (self.blowup_threshold > 0.0, "blowup_threshold must be positive"),
            (self.picard_max_iter >= 3, "picard_max_iter must be at least 3"),
            (self.picard_mesh >= 1, "picard_mesh must be at least 1"),
            (p.tolerance > 0.0, "dt_policy.tolerance must be positive"),
            (p.safety > 0.0 && p.safety <= 1.0, "dt_policy.safety must lie in (0, 1]"),
            (p.max_nonlinear > 0.0, "dt_policy.max_nonlinear must be positive"),
            (p.dx4_factor.map_or(true, |f| f > 0.0), "dt_policy.dx4_factor must be positive"),
            (p.dt_max.map_or(true, |f| f > 0.0), "dt_policy.dt_max must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Constraint(msg.into()));
            }
        }
        Ok(())
    }

    fn direction(&self) -> f64 {
        (self.t_end - self.t_start).signum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Completed,
    BlowupDetected,
    Diverged,
}

/// A ball (`inner = 0`) or annulus `inner < |x − center| < outer` whose L²
/// norm is tracked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedRegion {
    pub id: String,
    pub center: Vec<f64>,
    #[serde(default)]
    pub inner: f64,
    pub outer: f64,
}

impl TrackedRegion {
    pub fn ball(id: &str, center: &[f64], radius: f64) -> Self {
        TrackedRegion {
            id: id.into(),
            center: center.to_vec(),
            inner: 0.0,
            outer: radius,
        }
    }

    pub fn annulus(id: &str, center: &[f64], inner: f64, outer: f64) -> Self {
        TrackedRegion {
            id: id.into(),
            center: center.to_vec(),
            inner,
            outer,
        }
    }

    pub fn l2(&self, f: &ComplexField) -> Result<f64> {
        local_l2_annulus(f, &self.center, self.inner, self.outer, self.inner == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub l2: f64,
    pub h4: f64,
    pub linf: f64,
    pub local: Vec<f64>,
    /// `‖u − U_J‖₂`, when a reference is attached and defined at `t`.
    pub eps_l2: Option<f64>,
    pub eps_h4: Option<f64>,
    /// `‖Δ²(u − U_J)‖₂`, compared against `(−t)^{(1−δ)σ}` in reports.
    pub eps_bilaplacian: Option<f64>,
    /// `d/dt ‖u‖₂²` predicted by the mass-production identity,
    /// `−2 Im λ ‖u‖_{α+2}^{α+2}`.
    pub mass_prod: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub region_ids: Vec<String>,
    pub rows: Vec<NormRow>,
}

impl NormSeries {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "l2", "h4", "linf"].iter().map(|s| s.to_string()).collect();
        h.extend(self.region_ids.iter().map(|id| format!("local:{id}")));
        h.extend(["eps_l2", "eps_h4", "mass_prod"].iter().map(|s| s.to_string()));
        h
    }

    /// CSV with the fixed column order; absent `eps` values are `NaN`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.t, r.l2, r.h4, r.linf];
                v.extend(&r.local);
                v.push(r.eps_l2.unwrap_or(f64::NAN));
                v.push(r.eps_h4.unwrap_or(f64::NAN));
                v.push(r.mass_prod);
                v
            })
            .collect();
        csv_string(&self.header(), &rows)
    }

    /// `(t, local L²)` for one tracked region.
    pub fn local_series(&self, id: &str) -> Option<Vec<(f64, f64)>> {
        let idx = self.region_ids.iter().position(|r| r == id)?;
        Some(self.rows.iter().map(|r| (r.t, r.local[idx])).collect())
    }
}

/// Reference solution for `ε = u − U_J`; `None` where it is not defined.
pub type Reference = Arc<dyn Fn(f64) -> Option<ComplexField> + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_last: f64,
    /// Largest per-step residual of the mass-production identity relative to
    /// the size of the predicted rate.
    pub max_mass_residual: f64,
}

/// Closed-form flow of `i∂ₜu + λ|u|^αu = 0` over `dt` at every node.
///
/// `|u|^{−α}` evolves linearly, `|u(dt)|^{−α} = |u|^{−α} + α Im λ dt`, and the
/// phase advances by `∫ Re λ |u|^α`.
pub fn nonlinear_substep(u: &ComplexField, dt: f64, phys: &PhysParams) -> Result<ComplexField> {
    u.ensure_finite()?;
    let alpha = ratio_f64(phys.alpha);
    let mut out = u.clone();
    for v in out.values_mut() {
        *v = ode_flow(*v, dt, alpha, phys.lambda).ok_or(Error::SubstepBlowup { dt })?;
    }
    out.set_time(u.time() + dt);
    Ok(out)
}

fn ode_flow(u: Complex64, dt: f64, alpha: f64, lambda: Complex64) -> Option<Complex64> {
    let m = u.norm();
    if m == 0.0 {
        return Some(u);
    }
    let ma = m.powf(alpha);
    // D(dt)/D(0) = 1 + x
    let x = alpha * lambda.im * dt * ma;
    if 1.0 + x <= 0.0 {
        return None;
    }
    let ratio = if x.abs() < 1e-8 {
        1.0 - x / 2.0 + x * x / 3.0
    } else {
        x.ln_1p() / x
    };
    let phase = lambda.re * ma * dt * ratio;
    let modulus_factor = (1.0 + x).powf(-1.0 / alpha);
    Some(u * Complex64::from_polar(modulus_factor, phase))
}

fn linear_symbol(grid: &Grid, mu: i8) -> Vec<f64> {
    (0..grid.len())
        .map(|f| dispersion_symbol(grid.wavevector(f), mu as f64))
        .collect()
}

/// `e^{i dt (Δ²+μΔ)} u`: multiply mode `ξ` by `exp(i dt (|ξ|⁴ − μ|ξ|²))`.
pub fn linear_propagate(u: &ComplexField, dt: f64, phys: &PhysParams) -> Result<ComplexField> {
    u.ensure_finite()?;
    let mut out = u.clone();
    if dt == 0.0 {
        return Ok(out);
    }
    let grid = *u.grid();
    let mu = phys.mu as f64;
    Spectral::new(grid).apply_symbol(out.values_mut(), |k| {
        Complex64::from_polar(1.0, dt * dispersion_symbol(k, mu))
    });
    out.set_time(u.time() + dt);
    Ok(out)
}

/// Mode-wise ETDRK4 coefficients for one step size.
struct EtdCoeffs {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdCoeffs {
    /// Contour-integral evaluation (64 points on the unit circle around
    /// each `z = c·h`) avoids the cancellation in the φ-functions.
    fn new(symbol: &[f64], h: f64) -> Self {
        const M: usize = 64;
        let roots: Vec<Complex64> = (0..M)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::TAU * (j as f64 + 0.5) / M as f64))
            .collect();
        let n = symbol.len();
        let mut c = EtdCoeffs {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &s in symbol {
            let z0 = I * s * h;
            c.e.push(z0.exp());
            c.e2.push((z0 / 2.0).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for r in &roots {
                let z = z0 + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z / 2.0).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let w = h / M as f64;
            c.q.push(q * w);
            c.f1.push(f1 * w);
            c.f2.push(f2 * w);
            c.f3.push(f3 * w);
        }
        c
    }
}

/// Stateless integrator pieces shared by sessions and the free functions.
struct Stepper {
    grid: Grid,
    spectral: Spectral,
    symbol: Vec<f64>,
    alpha: f64,
    lambda: Complex64,
    etd: HashMap<u64, Arc<EtdCoeffs>>,
}

impl Stepper {
    fn new(grid: Grid, phys: &PhysParams) -> Self {
        Stepper {
            grid,
            spectral: Spectral::new(grid),
            symbol: linear_symbol(&grid, phys.mu),
            alpha: ratio_f64(phys.alpha),
            lambda: phys.lambda,
            etd: HashMap::new(),
        }
    }

    fn propagate(&self, v: &mut [Complex64], h: f64) {
        self.spectral.forward(v);
        for (x, &s) in v.iter_mut().zip(&self.symbol) {
            *x *= Complex64::from_polar(1.0, h * s);
        }
        self.spectral.inverse(v);
    }

    fn strang(&self, u: &[Complex64], h: f64) -> Option<Vec<Complex64>> {
        let mut v = u.to_vec();
        self.propagate(&mut v, h / 2.0);
        for x in v.iter_mut() {
            *x = ode_flow(*x, h, self.alpha, self.lambda)?;
        }
        self.propagate(&mut v, h / 2.0);
        Some(v)
    }

    fn nonlinear_hat(&self, v_hat: &[Complex64]) -> Vec<Complex64> {
        let mut u = v_hat.to_vec();
        self.spectral.inverse(&mut u);
        for x in u.iter_mut() {
            *x = I * self.lambda * *x * x.norm().powf(self.alpha);
        }
        self.spectral.forward(&mut u);
        u
    }

    fn etdrk4(&mut self, u: &[Complex64], h: f64) -> Option<Vec<Complex64>> {
        let key = h.to_bits();
        if !self.etd.contains_key(&key) {
            if self.etd.len() > 8 {
                self.etd.clear();
            }
            self.etd.insert(key, Arc::new(EtdCoeffs::new(&self.symbol, h)));
        }
        let c = self.etd[&key].clone();
        let mut v = u.to_vec();
        self.spectral.forward(&mut v);
        let nv = self.nonlinear_hat(&v);
        let a: Vec<Complex64> = (0..v.len()).map(|i| c.e2[i] * v[i] + c.q[i] * nv[i]).collect();
        let na = self.nonlinear_hat(&a);
        let b: Vec<Complex64> = (0..v.len()).map(|i| c.e2[i] * v[i] + c.q[i] * na[i]).collect();
        let nb = self.nonlinear_hat(&b);
        let cc: Vec<Complex64> = (0..v.len())
            .map(|i| c.e2[i] * a[i] + c.q[i] * (2.0 * nb[i] - nv[i]))
            .collect();
        let nc = self.nonlinear_hat(&cc);
        let mut out: Vec<Complex64> = (0..v.len())
            .map(|i| {
                c.e[i] * v[i] + c.f1[i] * nv[i] + 2.0 * c.f2[i] * (na[i] + nb[i]) + c.f3[i] * nc[i]
            })
            .collect();
        self.spectral.inverse(&mut out);
        out.iter().all(|x| x.re.is_finite() && x.im.is_finite()).then_some(out)
    }

    fn step(&mut self, scheme: Scheme, u: &[Complex64], h: f64) -> Option<Vec<Complex64>> {
        match scheme {
            Scheme::Etdrk4 => self.etdrk4(u, h),
            _ => self.strang(u, h),
        }
    }
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// `−2 Im λ ‖u‖_{α+2}^{α+2}`.
fn mass_rate(u: &ComplexField, phys: &PhysParams) -> f64 {
    let p = ratio_f64(phys.alpha) + 2.0;
    -2.0 * phys.lambda.im * lp_norm_f64(u, p).powf(p)
}

/// One integration run: current state, recorded series and status.
pub struct SimSession {
    pub phys: PhysParams,
    pub config: SolverConfig,
    pub u: ComplexField,
    pub t: f64,
    pub series: NormSeries,
    pub status: Status,
    pub regions: Vec<TrackedRegion>,
    pub stats: StepStats,
    /// Why the run diverged, if it did.
    pub failure: Option<String>,
    reference: Option<Reference>,
    stepper: Stepper,
    dt: f64,
}

impl fmt::Debug for SimSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimSession")
            .field("t", &self.t)
            .field("status", &self.status)
            .field("rows", &self.series.rows.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl SimSession {
    pub fn new(
        phys: PhysParams,
        config: SolverConfig,
        u0: ComplexField,
        regions: Vec<TrackedRegion>,
        reference: Option<Reference>,
    ) -> Result<Self> {
        phys.validate()?;
        config.validate()?;
        if config.scheme == Scheme::Picard {
            return Err(Error::Constraint(
                "the picard scheme is not step-based; use duhamel_picard".into(),
            ));
        }
        let grid = *u0.grid();
        if grid.dim() != phys.dim as usize {
            return Err(Error::InvalidGrid(format!(
                "grid has dimension {}, parameters have {}",
                grid.dim(),
                phys.dim
            )));
        }
        u0.ensure_finite()?;
        let mut u = u0;
        u.set_time(config.t_start);
        let series = NormSeries {
            region_ids: regions.iter().map(|r| r.id.clone()).collect(),
            rows: Vec::new(),
        };
        let mut s = SimSession {
            stepper: Stepper::new(grid, &phys),
            phys,
            t: config.t_start,
            dt: config.dt_initial,
            config,
            u,
            series,
            status: Status::Running,
            regions,
            stats: StepStats {
                dt_min: f64::INFINITY,
                ..StepStats::default()
            },
            failure: None,
            reference,
        };
        let row = s.measure()?;
        s.series.rows.push(row);
        if s.u.max_abs() > s.config.blowup_threshold {
            s.status = Status::BlowupDetected;
        }
        Ok(s)
    }

    fn measure(&self) -> Result<NormRow> {
        let u = &self.u;
        let local = self
            .regions
            .iter()
            .map(|r| r.l2(u))
            .collect::<Result<Vec<f64>>>()?;
        let eps = self.reference.as_ref().and_then(|f| f(self.t)).map(|r| u.sub(&r));
        let (eps_l2, eps_h4, eps_bilaplacian) = match eps {
            Some(e) => (
                Some(l2_norm(&e)),
                Some(sobolev_norm(&e, 4)?),
                Some(l2_norm(&e.biharmonic(0.0))),
            ),
            None => (None, None, None),
        };
        Ok(NormRow {
            t: self.t,
            l2: l2_norm(u),
            h4: sobolev_norm(u, 4)?,
            linf: u.max_abs(),
            local,
            eps_l2,
            eps_h4,
            eps_bilaplacian,
            mass_prod: mass_rate(u, &self.phys),
        })
    }

    fn step_cap(&self, umax: f64) -> f64 {
        let p = &self.config.dt_policy;
        let alpha = self.stepper.alpha;
        let mut cap = p.max_nonlinear / (1.0 + self.phys.lambda.norm() * umax.powf(alpha));
        if let Some(f) = p.dx4_factor {
            cap = cap.min(f * self.u.grid().spacing().powi(4));
        }
        if let Some(m) = p.dt_max {
            cap = cap.min(m);
        }
        if !p.adaptive {
            cap = cap.min(self.config.dt_initial);
        }
        cap
    }

    /// Advance by one accepted step and record a row.
    ///
    /// A step-size underflow sets the status to `diverged` and is returned as
    /// [`Error::StepSizeUnderflow`].
    pub fn step(&mut self) -> Result<()> {
        if self.status != Status::Running {
            return Err(Error::Domain(format!("session is not running ({:?})", self.status)));
        }
        let dir = self.config.direction();
        let policy = self.config.dt_policy;
        let scheme = self.config.scheme;
        let exponent = 1.0 / (scheme.order() as f64 + 1.0);
        loop {
            if self.stats.accepted + self.stats.rejected >= self.config.max_steps {
                self.status = Status::Diverged;
                self.failure = Some(format!("step limit {} reached", self.config.max_steps));
                return Err(Error::StepSizeUnderflow { dt: self.dt, t: self.t });
            }
            let remaining = (self.config.t_end - self.t).abs();
            let umax = self.u.max_abs();
            let h = if policy.adaptive {
                self.dt.min(self.step_cap(umax))
            } else {
                self.config.dt_initial
            };
            let last = h >= remaining;
            let h = h.min(remaining);
            if !last && h < 1e-14 * self.t.abs().max(f64::MIN_POSITIVE) {
                self.status = Status::Diverged;
                self.failure = Some(format!("step size underflow: dt = {h:e} at t = {:e}", self.t));
                return Err(Error::StepSizeUnderflow { dt: h, t: self.t });
            }
            let signed = dir * h;
            let u = self.u.values().to_vec();
            let (next, err) = if policy.adaptive {
                let coarse = self.stepper.step(scheme, &u, signed);
                let fine = self
                    .stepper
                    .step(scheme, &u, signed / 2.0)
                    .and_then(|v| self.stepper.step(scheme, &v, signed / 2.0));
                match (coarse, fine) {
                    (Some(c), Some(f)) => {
                        let scale = max_abs(&f).max(f64::MIN_POSITIVE);
                        let diff = c.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
                        (Some(f), diff / scale)
                    }
                    _ => (None, f64::INFINITY),
                }
            } else {
                (self.stepper.step(scheme, &u, signed), 0.0)
            };
            let next = match next {
                Some(v) if err <= policy.tolerance || !policy.adaptive => v,
                _ => {
                    if !policy.adaptive {
                        self.status = Status::Diverged;
                        self.failure = Some(format!("fixed step {h:e} failed at t = {:e}", self.t));
                        return Err(Error::SubstepBlowup { dt: h });
                    }
                    self.stats.rejected += 1;
                    self.dt = h * 0.5;
                    continue;
                }
            };
            let t_new = if last { self.config.t_end } else { self.t + signed };
            let before_l2 = l2_norm(&self.u).powi(2);
            let rate_before = mass_rate(&self.u, &self.phys);
            self.u = ComplexField::new(self.stepper.grid, next, t_new)?;
            if !self.u.is_finite() {
                self.status = Status::Diverged;
                self.failure = Some(format!("non-finite field at t = {t_new:e}"));
                return Err(Error::NonFiniteField);
            }
            self.t = t_new;
            let row = self.measure()?;
            // mass production over the step: Δ‖u‖² / Δt against the
            // trapezoidal average of the predicted rate
            let observed = (row.l2.powi(2) - before_l2) / signed;
            let predicted = 0.5 * (rate_before + row.mass_prod);
            let scale = rate_before.abs().max(row.mass_prod.abs())
                + 1e3 * f64::EPSILON * before_l2 / h;
            self.stats.max_mass_residual =
                self.stats.max_mass_residual.max((observed - predicted).abs() / scale);
            self.stats.accepted += 1;
            self.stats.dt_last = h;
            self.stats.dt_min = self.stats.dt_min.min(h);
            self.stats.dt_max = self.stats.dt_max.max(h);
            if policy.adaptive {
                let grow = if err > 0.0 {
                    (policy.safety * (policy.tolerance / err).powf(exponent)).clamp(0.2, 2.0)
                } else {
                    2.0
                };
                // the step cut short at t_end says nothing about the next one
                if !last {
                    self.dt = h * grow;
                }
            }
            let linf = row.linf;
            self.series.rows.push(row);
            if linf > self.config.blowup_threshold {
                self.status = Status::BlowupDetected;
            } else if last {
                self.status = Status::Completed;
            }
            return Ok(());
        }
    }

    /// Step until the session leaves the running state. Divergence is a
    /// terminal status, not an error.
    pub fn run(&mut self) -> Result<()> {
        while self.status == Status::Running {
            match self.step() {
                Ok(()) => {}
                Err(_) if self.status == Status::Diverged => break,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Iterates of the Duhamel map on a uniform time mesh.
#[derive(Clone, Debug)]
pub struct PicardResult {
    pub times: Vec<f64>,
    /// Final iterate at every mesh time.
    pub trajectory: Vec<ComplexField>,
    /// `d_m = sup_t ‖u^{(m+1)}(t) − u^{(m)}(t)‖₂`.
    pub distances: Vec<f64>,
    /// `d_{m+1}/d_m` (`0/0` counts as 0).
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PicardResult {
    pub fn final_state(&self) -> &ComplexField {
        self.trajectory.last().expect("mesh has at least two times")
    }
}

/// `u^{(0)} = e^{itL}φ`, `u^{(m+1)} = S(u^{(m)})` with
/// `S(u)(t) = e^{itL}φ + iλ∫₀ᵗ e^{i(t−s)L}|u|^αu ds`, `L = Δ²+μΔ`, the
/// integral by the trapezoid rule on `config.picard_mesh` intervals of
/// `[0, T]` (`T` may be negative).
pub fn duhamel_picard(
    phi: &ComplexField,
    t_final: f64,
    phys: &PhysParams,
    config: &SolverConfig,
) -> Result<PicardResult> {
    phi.ensure_finite()?;
    phys.validate()?;
    if config.picard_max_iter < 3 {
        return Err(Error::Constraint("picard_max_iter must be at least 3".into()));
    }
    if !(t_final.is_finite() && t_final != 0.0) {
        return Err(Error::Constraint("T must be finite and non-zero".into()));
    }
    let grid = *phi.grid();
    let n = config.picard_mesh.max(1);
    let h = t_final / n as f64;
    let stepper = Stepper::new(grid, phys);
    let alpha = stepper.alpha;
    let times: Vec<f64> = (0..=n).map(|m| phi.time() + m as f64 * h).collect();
    let one_step: Vec<Complex64> = stepper.symbol.iter().map(|&s| Complex64::from_polar(1.0, h * s)).collect();
    // free flow in Fourier space at every mesh time
    let mut phi_hat = phi.values().to_vec();
    stepper.spectral.forward(&mut phi_hat);
    let mut free_hat = Vec::with_capacity(n + 1);
    free_hat.push(phi_hat.clone());
    for m in 1..=n {
        let prev: &Vec<Complex64> = &free_hat[m - 1];
        free_hat.push(prev.iter().zip(&one_step).map(|(a, e)| a * e).collect());
    }
    let to_physical = |hat: &[Complex64]| {
        let mut v = hat.to_vec();
        stepper.spectral.inverse(&mut v);
        v
    };
    let mut current: Vec<Vec<Complex64>> = free_hat.iter().map(|f| to_physical(f)).collect();
    let norm = |v: &[Complex64]| (v.iter().map(|x| x.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt();
    let mut distances = Vec::new();
    let mut converged = false;
    let mut increases = 0;
    for _ in 0..config.picard_max_iter {
        let nl_hat: Vec<Vec<Complex64>> = current
            .iter()
            .map(|u| {
                let mut v: Vec<Complex64> = u.iter().map(|x| x * x.norm().powf(alpha)).collect();
                stepper.spectral.forward(&mut v);
                v
            })
            .collect();
        let mut integral = vec![Complex64::default(); grid.len()];
        let mut next = Vec::with_capacity(n + 1);
        let mut dist = 0.0f64;
        let mut size = 0.0f64;
        for m in 0..=n {
            if m > 0 {
                for i in 0..grid.len() {
                    integral[i] = one_step[i] * (integral[i] + 0.5 * h * nl_hat[m - 1][i])
                        + 0.5 * h * nl_hat[m][i];
                }
            }
            let hat: Vec<Complex64> = (0..grid.len())
                .map(|i| free_hat[m][i] + I * phys.lambda * integral[i])
                .collect();
            let u = to_physical(&hat);
            let d: Vec<Complex64> = u.iter().zip(&current[m]).map(|(a, b)| a - b).collect();
            dist = dist.max(norm(&d));
            size = size.max(norm(&u));
            next.push(u);
        }
        if next.iter().flatten().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::NoConvergence("iterate became non-finite".into()));
        }
        if let Some(&prev) = distances.last() {
            if dist > prev {
                increases += 1;
                if increases >= 3 {
                    return Err(Error::NoConvergence(format!(
                        "update grew for 3 consecutive iterations (last {dist:e})"
                    )));
                }
            } else {
                increases = 0;
            }
        }
        distances.push(dist);
        current = next;
        if dist <= config.picard_tol * size {
            converged = true;
            break;
        }
    }
    let ratios = distances
        .windows(2)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .collect();
    let trajectory = current
        .into_iter()
        .zip(&times)
        .map(|(v, &t)| ComplexField::new(grid, v, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(PicardResult {
        iterations: distances.len(),
        times,
        trajectory,
        distances,
        ratios,
        converged,
    })
}

/// The free-flow part of `F(φ, T)`: for `f ∈ {φ, (Δ²+μΔ)φ, |φ|^αφ}` the
/// norm `‖e^{itL} f‖_{L^γ([0,T]; L^ρ)}` with `(γ, ρ) = (pair.q, pair.r)`,
/// summed. The time integral is the trapezoid rule on `mesh` intervals;
/// `γ = ∞` is the maximum over mesh times.
pub fn strichartz_norm(
    phi: &ComplexField,
    pair: &AdmissiblePair,
    t_final: f64,
    mesh: usize,
    phys: &PhysParams,
) -> Result<f64> {
    if !pair.is_admissible() {
        return Err(Error::Constraint(format!(
            "({}, {}) is not admissible in dimension {}",
            pair.q, pair.r, pair.dim
        )));
    }
    if mesh < 16 {
        return Err(Error::Constraint(format!("mesh must be at least 16, got {mesh}")));
    }
    phi.ensure_finite()?;
    let alpha = ratio_f64(phys.alpha);
    let pieces = [
        phi.clone(),
        phi.biharmonic(phys.mu as f64),
        phi.map(|z| z * z.norm().powf(alpha)),
    ];
    let h = t_final / mesh as f64;
    let mut total = 0.0;
    for f in &pieces {
        let mut norms = Vec::with_capacity(mesh + 1);
        let mut g = f.clone();
        norms.push(lp_norm(&g, &pair.r)?);
        for _ in 0..mesh {
            g = linear_propagate(&g, h, phys)?;
            norms.push(lp_norm(&g, &pair.r)?);
        }
        total += match pair.q.finite_f64() {
            None => norms.iter().fold(0.0f64, |m, &v| m.max(v)),
            Some(gamma) => {
                let pw: Vec<f64> = norms.iter().map(|v| v.powf(gamma)).collect();
                let integral = h.abs()
                    * (pw.iter().sum::<f64>() - 0.5 * (pw[0] + pw[mesh]));
                integral.powf(1.0 / gamma)
            }
        };
    }
    Ok(total)
}

/// Measured `ε` against the bounds `(−t)^σ` and `(−t)^{(1−δ)σ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBoundReport {
    pub sigma: f64,
    pub delta: f64,
    pub rows_checked: usize,
    pub l2_within: usize,
    pub max_l2_ratio: f64,
    pub bilaplacian_within: usize,
    pub max_bilaplacian_ratio: f64,
}

/// Compare recorded `ε` norms with the bounds for the given `σ`, `δ`.
/// Only rows with `t < 0` and a defined reference are used.
pub fn eps_bound_report(series: &NormSeries, sigma: f64, delta: f64) -> EpsBoundReport {
    let mut rep = EpsBoundReport {
        sigma,
        delta,
        rows_checked: 0,
        l2_within: 0,
        max_l2_ratio: 0.0,
        bilaplacian_within: 0,
        max_bilaplacian_ratio: 0.0,
    };
    for r in series.rows.iter().filter(|r| r.t < 0.0) {
        if let (Some(e2), Some(eb)) = (r.eps_l2, r.eps_bilaplacian) {
            let s = -r.t;
            let b2 = s.powf(sigma);
            let bb = s.powf((1.0 - delta) * sigma);
            rep.rows_checked += 1;
            rep.l2_within += usize::from(e2 <= b2);
            rep.bilaplacian_within += usize::from(eb <= bb);
            rep.max_l2_ratio = rep.max_l2_ratio.max(e2 / b2);
            rep.max_bilaplacian_ratio = rep.max_bilaplacian_ratio.max(eb / bb);
        }
    }
    rep
}

/// Integrate from `U_J(−1/n)` towards `t_end`.
///
/// `−1/n` must lie in the profile's mesh range. `t_end` may lie closer to 0
/// than the mesh reaches (the run is then expected to end by blow-up
/// detection); `ε` is recorded only while `t` is inside the mesh range.
pub fn run_blowup_experiment(
    profile: Arc<AnsatzProfile>,
    n: u64,
    t_end: f64,
    mut config: SolverConfig,
    regions: Vec<TrackedRegion>,
) -> Result<SimSession> {
    if n == 0 {
        return Err(Error::Constraint("n must be positive".into()));
    }
    let t0 = -1.0 / n as f64;
    if !(t_end < 0.0) {
        return Err(Error::Domain(format!("t_end must be negative, got {t_end}")));
    }
    let j = profile.j_max();
    let data = profile.u(j, t0)?;
    if t_end < t0 {
        // backward runs stay where the reference is defined
        profile.u(j, t_end)?;
    }
    let phys = PhysParams::new(
        profile.params.alpha,
        profile.params.lambda,
        profile.mu,
        profile.params.dim,
    )?;
    config.t_start = t0;
    config.t_end = t_end;
    let p = profile.clone();
    let reference: Reference = Arc::new(move |t| p.u(j, t).ok());
    let mut session = SimSession::new(phys, config, data, regions, Some(reference))?;
    session.run()?;
    Ok(session)
}

/// Power-law fit of a tracked region's L² norm against `−t`, over rows with
/// `t < 0`.
pub fn local_slope(series: &NormSeries, id: &str) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = series
        .local_series(id)
        .ok_or_else(|| Error::Domain(format!("no tracked region {id:?}")))?
        .into_iter()
        .filter(|(t, y)| *t < 0.0 && *y > 0.0)
        .collect();
    slope_fit(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{ExtRational, Rational};
    use std::f64::consts::PI;

    fn phys(alpha: i128, lambda: Complex64, mu: i8) -> PhysParams {
        PhysParams::new(Rational::from_integer(alpha), lambda, mu, 1).unwrap()
    }

    fn smooth_data(g: Grid, amp: f64) -> ComplexField {
        let l = g.half_width();
        ComplexField::from_fn(g, 0.0, |x| {
            let y = PI * x[0] / l;
            Complex64::new(amp * (1.0 + 0.5 * y.cos()), amp * 0.3 * (2.0 * y).sin())
        })
    }

    #[test]
    fn linear_flow_is_unitary_reversible_and_exact_on_modes() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 1);
        let u = smooth_data(g, 1.0).map(|z| z * Complex64::new(1.0, 0.2));
        let v = linear_propagate(&u, 0.37, &p).unwrap();
        assert!((l2_norm(&v) - l2_norm(&u)).abs() < 1e-12 * l2_norm(&u));
        let back = linear_propagate(&v, -0.37, &p).unwrap();
        assert!(back.sub(&u).max_abs() < 1e-12);
        assert_eq!(linear_propagate(&u, 0.0, &p).unwrap().sub(&u).max_abs(), 0.0);
        // e^{iξx} with ξ = 3 on [−π, π): phase advances by dt(ξ⁴ − μξ²)
        let wave = ComplexField::from_fn(g, 0.0, |x| Complex64::new(0.0, 3.0 * x[0]).exp());
        let dt = 0.01;
        let out = linear_propagate(&wave, dt, &p).unwrap();
        let phase = Complex64::from_polar(1.0, dt * (81.0 - 9.0));
        for (a, b) in out.values().iter().zip(wave.values()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_substep_closed_forms() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        // λ = −i, α = 1, u = 1: |u(dt)| = 1/(1 − dt)
        let p = phys(1, Complex64::new(0.0, -1.0), 0);
        let one = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
        for &dt in &[0.1, 0.5, 0.9] {
            let v = nonlinear_substep(&one, dt, &p).unwrap();
            for z in v.values() {
                assert!((z.norm() - 1.0 / (1.0 - dt)).abs() < 1e-12 / (1.0 - dt));
            }
        }
        assert!(matches!(nonlinear_substep(&one, 1.0, &p), Err(Error::SubstepBlowup { .. })));
        // real λ: pure phase rotation
        let p = phys(2, Complex64::new(-3.0, 0.0), 0);
        let u = smooth_data(g, 1.3);
        let v = nonlinear_substep(&u, 2.7, &p).unwrap();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12 * b.norm());
            let expect = b * Complex64::from_polar(1.0, -3.0 * b.norm_sqr() * 2.7);
            assert!((a - expect).norm() < 1e-12 * b.norm());
        }
        // dt → 0 is the identity, with O(dt) deviation
        let p = phys(2, Complex64::new(0.5, -1.0), 0);
        let d1 = nonlinear_substep(&u, 1e-4, &p).unwrap().sub(&u).max_abs();
        let d2 = nonlinear_substep(&u, 5e-5, &p).unwrap().sub(&u).max_abs();
        assert!((d1 / d2 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn substep_matches_general_ode_solution() {
        // complex λ: compare with a fine RK4 integration of u' = iλ|u|^α u
        let lambda = Complex64::new(0.8, -0.6);
        let alpha = 1.5;
        let u0 = Complex64::new(0.7, -0.4);
        let dt = 0.8;
        let exact = ode_flow(u0, dt, alpha, lambda).unwrap();
        let f = |u: Complex64| I * lambda * u * u.norm().powf(alpha);
        let (mut u, n) = (u0, 20000);
        let h = dt / n as f64;
        for _ in 0..n {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((u - exact).norm() < 1e-12);
        // backwards in time undoes the flow
        let back = ode_flow(exact, -dt, alpha, lambda).unwrap();
        assert!((back - u0).norm() < 1e-13);
    }

    fn session(p: PhysParams, cfg: SolverConfig, u: ComplexField) -> SimSession {
        SimSession::new(p, cfg, u, vec![], None).unwrap()
    }

    #[test]
    fn linear_runs_conserve_mass() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, 0.0), 1);
        let mut cfg = SolverConfig::new(Scheme::StrangSplit, 1e-3, 0.0, 1.0);
        cfg.dt_policy.adaptive = false;
        let u = smooth_data(g, 1.0);
        let mut s = session(p, cfg, u.clone());
        s.run().unwrap();
        assert_eq!(s.status, Status::Completed);
        assert_eq!(s.stats.accepted, 1000);
        let drift = (s.series.rows.last().unwrap().l2 - l2_norm(&u)).abs() / l2_norm(&u);
        assert!(drift < 1e-10, "drift {drift:e}");
    }

    #[test]
    fn constant_field_follows_the_ode() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let lambda = Complex64::new(0.5, -0.4);
        let p = phys(2, lambda, 1);
        let c = Complex64::new(0.6, 0.2);
        let u = ComplexField::from_fn(g, 0.0, |_| c);
        for scheme in [Scheme::StrangSplit, Scheme::Etdrk4] {
            let mut cfg = SolverConfig::new(scheme, 1e-2, 0.0, 1.0);
            cfg.dt_policy.tolerance = 1e-10;
            let mut s = session(p, cfg, u.clone());
            s.run().unwrap();
            let exact = ode_flow(c, 1.0, 2.0, lambda).unwrap();
            let err = s.u.values().iter().fold(0.0f64, |m, z| m.max((z - exact).norm()));
            assert!(err < 1e-8, "{scheme:?}: {err:e}");
        }
    }

    /// Global error at t = 0.2 of fixed-step runs, against a fine reference.
    fn fixed_step_errors(scheme: Scheme, dts: &[f64]) -> Vec<f64> {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.3, -0.5), 1);
        let u = smooth_data(g, 0.8);
        let run = |dt: f64| {
            let mut cfg = SolverConfig::new(scheme, dt, 0.0, 0.2);
            cfg.dt_policy.adaptive = false;
            let mut s = session(p, cfg, u.clone());
            s.run().unwrap();
            s.u
        };
        let reference = run(dts.last().unwrap() / 16.0);
        dts.iter().map(|&dt| run(dt).sub(&reference).max_abs()).collect()
    }

    #[test]
    fn strang_is_second_order() {
        let dts = [4e-3, 2e-3, 1e-3, 5e-4];
        let errs = fixed_step_errors(Scheme::StrangSplit, &dts);
        let pts: Vec<(f64, f64)> = dts.iter().zip(&errs).map(|(d, e)| (-d, *e)).collect();
        let order = slope_fit(&pts).unwrap().slope;
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn etdrk4_is_fourth_order() {
        let dts = [4e-3, 2e-3, 1e-3, 5e-4];
        let errs = fixed_step_errors(Scheme::Etdrk4, &dts);
        let pts: Vec<(f64, f64)> = dts.iter().zip(&errs).map(|(d, e)| (-d, *e)).collect();
        let order = slope_fit(&pts).unwrap().slope;
        assert!(order > 3.6, "order {order} errs {errs:?}");
    }

    #[test]
    fn mass_production_identity_holds_per_step() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        let cfg = SolverConfig::new(Scheme::StrangSplit, 1e-3, 0.0, 0.3);
        let mut s = session(p, cfg, smooth_data(g, 0.8));
        s.run().unwrap();
        assert!(s.stats.max_mass_residual < 1e-4, "{:e}", s.stats.max_mass_residual);
        // mass grows for Im λ < 0
        assert!(s.series.rows.last().unwrap().l2 > s.series.rows[0].l2);
    }

    #[test]
    fn blowup_is_detected_and_series_is_monotone() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let p = phys(1, Complex64::new(0.0, -1.0), 0);
        // constant data 1: |u| = 1/(1 − t) blows up at t = 1
        let u = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
        let mut cfg = SolverConfig::new(Scheme::StrangSplit, 1e-2, 0.0, 2.0);
        cfg.blowup_threshold = 1e6;
        let mut s = session(p, cfg, u);
        s.run().unwrap();
        assert_eq!(s.status, Status::BlowupDetected);
        let last = s.series.rows.last().unwrap();
        assert!(last.linf > 1e6 && (last.t - 1.0).abs() < 1e-5);
        assert!(s.series.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert!(s.step().is_err());
    }

    #[test]
    fn backward_integration_reverses_forward() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.4, -0.3), 1);
        let u = smooth_data(g, 0.7);
        let mut cfg = SolverConfig::new(Scheme::StrangSplit, 1e-3, 0.0, 0.2);
        cfg.dt_policy.tolerance = 1e-11;
        let mut f = session(p, cfg.clone(), u.clone());
        f.run().unwrap();
        cfg.t_start = 0.2;
        cfg.t_end = 0.0;
        let mut b = session(p, cfg, f.u.clone());
        b.run().unwrap();
        assert!(b.series.rows.windows(2).all(|w| w[1].t < w[0].t));
        assert!(b.u.sub(&u).max_abs() < 1e-7);
    }

    #[test]
    fn series_csv_layout() {
        let g = Grid::new(1, 32, 2.0).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        let cfg = SolverConfig::new(Scheme::StrangSplit, 1e-2, -0.5, -0.45);
        let regions = vec![
            TrackedRegion::ball("core", &[0.0], 0.5),
            TrackedRegion::annulus("far", &[0.0], 1.0, 1.5),
        ];
        let mut s = SimSession::new(p, cfg, smooth_data(g, 0.5), regions, None).unwrap();
        s.run().unwrap();
        let csv = s.series.to_csv();
        assert!(csv.starts_with("t,l2,h4,linf,local:core,local:far,eps_l2,eps_h4,mass_prod\n"));
        let (_, rows) = crate::diagnostics::parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), s.series.rows.len());
        assert!(rows.iter().all(|r| r[6].is_nan()));
        let empty = NormSeries { region_ids: vec![], rows: vec![] };
        assert_eq!(empty.to_csv(), "t,l2,h4,linf,eps_l2,eps_h4,mass_prod\n");
    }

    #[test]
    fn reference_equal_to_solution_gives_tiny_eps() {
        // λ = 0 and the exact linear solution as reference
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, 0.0), 0);
        let u = smooth_data(g, 1.0);
        let base = u.clone();
        let reference: Reference = Arc::new(move |t| linear_propagate(&base, t + 0.5, &p).ok());
        let cfg = SolverConfig::new(Scheme::StrangSplit, 1e-2, -0.5, -0.1);
        let mut s = SimSession::new(p, cfg, u, vec![], Some(reference)).unwrap();
        s.run().unwrap();
        let worst = s.series.rows.iter().map(|r| r.eps_l2.unwrap()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst:e}");
        let rep = eps_bound_report(&s.series, 1.0, 0.1);
        assert_eq!(rep.rows_checked, s.series.rows.len());
    }

    #[test]
    fn config_validation() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        let u = smooth_data(g, 1.0);
        let bad = [
            SolverConfig::new(Scheme::StrangSplit, 0.0, 0.0, 1.0),
            SolverConfig::new(Scheme::StrangSplit, 1e-3, 1.0, 1.0),
            SolverConfig::new(Scheme::Picard, 1e-3, 0.0, 1.0),
        ];
        for cfg in bad {
            assert!(SimSession::new(p, cfg, u.clone(), vec![], None).is_err());
        }
        let p2 = PhysParams::new(Rational::from_integer(2), Complex64::new(0.0, -1.0), 0, 2).unwrap();
        assert!(SimSession::new(p2, SolverConfig::new(Scheme::StrangSplit, 1e-3, 0.0, 1.0), u, vec![], None).is_err());
    }

    #[test]
    fn picard_trivial_cases() {
        let g = Grid::new(1, 32, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        let cfg = SolverConfig::new(Scheme::Picard, 1e-3, 0.0, 0.1);
        let zero = ComplexField::zeros(g, 0.0);
        let r = duhamel_picard(&zero, 0.1, &p, &cfg).unwrap();
        assert!(r.trajectory.iter().all(|f| f.max_abs() == 0.0));
        assert!(r.ratios.iter().all(|&q| q == 0.0));
        let p0 = phys(2, Complex64::new(0.0, 0.0), 0);
        let u = smooth_data(g, 1.0);
        let r = duhamel_picard(&u, 0.1, &p0, &cfg).unwrap();
        assert_eq!(r.distances[0], 0.0);
        assert!(r.converged);
        let free = linear_propagate(&u, 0.1, &p0).unwrap();
        assert!(r.final_state().sub(&free).max_abs() < 1e-12);
    }

    #[test]
    fn picard_contracts_and_agrees_with_splitting() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.3, -1.0), 0);
        let u = smooth_data(g, 0.6);
        let t = 0.05;
        let mut cfg = SolverConfig::new(Scheme::Picard, 1e-4, 0.0, t);
        cfg.picard_mesh = 512;
        cfg.picard_tol = 0.0;
        cfg.picard_max_iter = 8;
        let r = duhamel_picard(&u, t, &p, &cfg).unwrap();
        assert!(r.ratios.iter().take(5).all(|&q| q < 0.9), "{:?}", r.ratios);
        cfg.scheme = Scheme::StrangSplit;
        cfg.dt_policy.tolerance = 1e-11;
        let mut s = session(p, cfg, u);
        s.run().unwrap();
        let diff = l2_norm(&r.final_state().sub(&s.u));
        assert!(diff < 1e-6, "{diff:e}");
    }

    #[test]
    fn picard_detects_divergence() {
        let g = Grid::new(1, 32, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        let u = smooth_data(g, 5.0);
        let mut cfg = SolverConfig::new(Scheme::Picard, 1e-3, 0.0, 1.0);
        cfg.picard_mesh = 64;
        assert!(matches!(duhamel_picard(&u, 1.0, &p, &cfg), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn strichartz_norm_properties() {
        let g = Grid::new(1, 64, PI).unwrap();
        let p = phys(2, Complex64::new(0.0, -1.0), 0);
        // (8, ∞) is admissible in 1D: 4/8 + 1/∞ = 1/2
        let pair = AdmissiblePair { q: ExtRational::integer(8), r: ExtRational::Infinity, dim: 1 };
        assert!(pair.is_admissible());
        let zero = ComplexField::zeros(g, 0.0);
        assert_eq!(strichartz_norm(&zero, &pair, 0.5, 32, &p).unwrap(), 0.0);
        let u = smooth_data(g, 1.0);
        let full = strichartz_norm(&u, &pair, 0.5, 64, &p).unwrap();
        let half = strichartz_norm(&u, &pair, 0.25, 64, &p).unwrap();
        let tiny = strichartz_norm(&u, &pair, 1e-6, 64, &p).unwrap();
        assert!(half <= full && tiny < half);
        // short intervals: the time integral scales like T^{1/γ}
        assert!((tiny / half - (1e-6f64 / 0.25).powf(1.0 / 8.0)).abs() < 0.05);
        // γ = ∞: sup over mesh of the L^2 norm, constant for the free flow
        let pair_inf = AdmissiblePair { q: ExtRational::Infinity, r: ExtRational::integer(2), dim: 1 };
        let v = strichartz_norm(&u, &pair_inf, 0.3, 16, &p).unwrap();
        let expect = l2_norm(&u) + l2_norm(&u.biharmonic(0.0)) + l2_norm(&u.map(|z| z * z.norm_sqr()));
        assert!((v - expect).abs() < 1e-10 * expect);
        let bad = AdmissiblePair { q: ExtRational::integer(2), r: ExtRational::integer(2), dim: 1 };
        assert!(strichartz_norm(&u, &bad, 0.3, 16, &p).is_err());
        assert!(strichartz_norm(&u, &pair, 0.3, 8, &p).is_err());
    }
}
