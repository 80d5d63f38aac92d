//! JSON run configurations.
//!
//! These are the documents users write and that manifests record. They are
//! deliberately plain (rationals as strings, complex numbers as `{re, im}`)
//! and are converted into core types after parsing. Unknown keys are
//! rejected everywhere.

use std::path::{Path, PathBuf};

use nls4_core::exponents::parse_rational;
use nls4_core::geometry::{Ball, CompactSetSpec, Edge};
use nls4_core::params::experiment_params;
use nls4_core::solver::{DtPolicy, Scheme, SolverConfig, TrackedRegion, DEFAULT_BLOWUP_THRESHOLD};
use nls4_core::{AnsatzParams, Complex64, Grid, PhysParams, Rational};
use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Fields shared by every run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Common {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub verbosity: u8,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for Common {
    fn default() -> Self {
        Common {
            seed: 0,
            output_dir: default_output_dir(),
            verbosity: 0,
        }
    }
}

impl Common {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.output_dir.join(path)
    }
}

/// A run configuration: the common fields inlined at the top level (serde's
/// `flatten` cannot be combined with `deny_unknown_fields`).
macro_rules! run_config {
    ($(#[$meta:meta])* pub struct $name:ident { $($body:tt)* }) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            /// Seed for every random choice the run makes.
            #[serde(default)]
            pub seed: u64,
            /// Directory receiving artifacts; other paths in the config are
            /// relative to it.
            #[serde(default = "default_output_dir")]
            pub output_dir: PathBuf,
            /// 0 = quiet, 1 = progress on stderr.
            #[serde(default)]
            pub verbosity: u8,
            $($body)*
        }

        impl $name {
            pub fn common(&self) -> Common {
                Common {
                    seed: self.seed,
                    output_dir: self.output_dir.clone(),
                    verbosity: self.verbosity,
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ComplexConfig {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexConfig> for Complex64 {
    fn from(c: ComplexConfig) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// `i∂ₜu + Δ²u + μΔu + λ|u|^α u = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PhysConfig {
    /// Rational exponent, e.g. `"2"` or `"4/3"`.
    pub alpha: String,
    pub lambda: ComplexConfig,
    /// One of −1, 0, 1.
    #[serde(default)]
    pub mu: i8,
    pub dim: u32,
}

impl PhysConfig {
    pub fn to_core(&self) -> Result<PhysParams, CliError> {
        let alpha = rational("phys.alpha", &self.alpha)?;
        PhysParams::new(alpha, self.lambda.into(), self.mu, self.dim)
            .map_err(|e| CliError::invalid("phys", e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Power of two, at least 16.
    pub points_per_axis: usize,
    /// The box is `[-L, L)^dim`.
    pub box_half_width: f64,
}

impl GridConfig {
    pub fn to_core(&self) -> Result<Grid, CliError> {
        Grid::new(self.dim, self.points_per_axis, self.box_half_width)
            .map_err(|e| CliError::invalid("grid", e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub c: Vec<f64>,
    /// Radius; 0 for a point.
    pub r: f64,
}

/// The compact set `K` as a union of closed balls, with `R` bounding the
/// transition region of the weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    pub balls: Vec<BallConfig>,
    #[serde(rename = "R")]
    pub outer_radius: f64,
}

impl SetConfig {
    pub fn to_core(&self) -> CompactSetSpec {
        CompactSetSpec {
            balls: self
                .balls
                .iter()
                .map(|b| Ball {
                    c: b.c.clone(),
                    r: b.r,
                })
                .collect(),
            outer_radius: self.outer_radius,
        }
    }
}

/// Treatment of `|x|^k` at the box edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum EdgeConfig {
    /// `|x|^k` up to the box edge (not smooth on the torus).
    #[default]
    Exact,
    /// Smoothly periodized beyond `|x_i| > L/2`.
    Periodic,
}

impl From<EdgeConfig> for Edge {
    fn from(e: EdgeConfig) -> Self {
        match e {
            EdgeConfig::Exact => Edge::Exact,
            EdgeConfig::Periodic => Edge::Periodic,
        }
    }
}

/// Experiment-mode overrides `(J, k, σ, δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "J", default = "default_j")]
    pub j: u32,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Rational, e.g. `"1/10"`.
    #[serde(default = "default_delta")]
    pub delta: String,
}

fn default_j() -> u32 {
    2
}
fn default_k() -> u32 {
    40
}
fn default_sigma() -> f64 {
    2.0
}
fn default_delta() -> String {
    "1/10".into()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            j: default_j(),
            k: default_k(),
            sigma: default_sigma(),
            delta: default_delta(),
        }
    }
}

impl ExperimentConfig {
    pub fn to_core(&self, base: &PhysParams) -> Result<AnsatzParams, CliError> {
        let delta = rational("experiment.delta", &self.delta)?;
        experiment_params(self.j, self.k, self.sigma, delta, base)
            .map_err(|e| CliError::invalid("experiment", e))
    }
}

/// Geometric time mesh `s = −t ∈ [s_min, s_max]` of the ansatz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_npd")]
    pub nodes_per_decade: usize,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_refinements")]
    pub max_refinements: usize,
    #[serde(default = "default_buffer")]
    pub buffer_decades: usize,
    /// Window `[t_lo, t_hi]` of the scaling fits; defaults to the whole mesh
    /// above the quadrature buffer.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
}

fn default_s_min() -> f64 {
    1e-16
}
fn default_s_max() -> f64 {
    0.5
}
fn default_npd() -> usize {
    48
}
fn default_quad_tol() -> f64 {
    1e-6
}
fn default_refinements() -> usize {
    1
}
fn default_buffer() -> usize {
    nls4_core::ansatz::BUFFER_DECADES
}

impl Default for TimeGridConfig {
    fn default() -> Self {
        TimeGridConfig {
            s_min: default_s_min(),
            s_max: default_s_max(),
            nodes_per_decade: default_npd(),
            quad_tol: default_quad_tol(),
            max_refinements: default_refinements(),
            buffer_decades: default_buffer(),
            fit_window: None,
        }
    }
}

run_config! {
/// `exponents`: exact exponent report for `(α, N)`.
pub struct ExponentsConfig {
    pub alpha: String,
    pub dim: u32,
}
}

run_config! {
/// `params`: the rigorous constants of the construction, or experiment-mode overrides.
pub struct ParamsConfig {
    pub phys: PhysConfig,
    /// The nonlinearity constant; estimated by sampling when absent.
    #[serde(rename = "M", default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
}
}

run_config! {
/// `weight`: build `A` and report the derivative-bound constants.
pub struct WeightConfig {
    pub grid: GridConfig,
    pub set: SetConfig,
    pub k: u32,
    #[serde(default)]
    pub edge: EdgeConfig,
    /// Highest derivative order in the bound report (≤ 4).
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    /// Also report constants on the grid with twice the points.
    #[serde(default)]
    pub refine: bool,
}
}

fn default_max_order() -> usize {
    3
}

run_config! {
/// `ansatz`: build `U_0 … U_J` and fit the scaling laws.
pub struct AnsatzConfig {
    pub phys: PhysConfig,
    pub grid: GridConfig,
    pub set: SetConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub time_grid: TimeGridConfig,
    #[serde(default = "periodic")]
    pub edge: EdgeConfig,
}
}

fn periodic() -> EdgeConfig {
    EdgeConfig::Periodic
}

/// Initial data of a simulation or Picard run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `U_J(t_start)` from the profile named by `profile_path`.
    Profile,
    /// `amplitude·exp(−|x−center|²/width²)·e^{i wavenumber·x}`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        wavenumber: Vec<f64>,
    },
    Constant { value: ComplexConfig },
    /// Random Fourier coefficients on `|m| ≤ modes`, scaled to
    /// `max|u| = amplitude`; drawn from the run's seed.
    Random { amplitude: f64, modes: usize },
    /// A field file in the binary layout, relative to `output_dir`.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt_initial: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DtPolicyConfig {
    #[serde(default = "yes")]
    pub adaptive: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_max_nonlinear")]
    pub max_nonlinear: f64,
    #[serde(default)]
    pub dx4_factor: Option<f64>,
    #[serde(default)]
    pub dt_max: Option<f64>,
}

fn yes() -> bool {
    true
}
fn default_tolerance() -> f64 {
    DtPolicy::default().tolerance
}
fn default_safety() -> f64 {
    DtPolicy::default().safety
}
fn default_max_nonlinear() -> f64 {
    DtPolicy::default().max_nonlinear
}

impl Default for DtPolicyConfig {
    fn default() -> Self {
        let d = DtPolicy::default();
        DtPolicyConfig {
            adaptive: d.adaptive,
            tolerance: d.tolerance,
            safety: d.safety,
            max_nonlinear: d.max_nonlinear,
            dx4_factor: d.dx4_factor,
            dt_max: d.dt_max,
        }
    }
}

impl From<DtPolicyConfig> for DtPolicy {
    fn from(c: DtPolicyConfig) -> Self {
        DtPolicy {
            adaptive: c.adaptive,
            tolerance: c.tolerance,
            safety: c.safety,
            max_nonlinear: c.max_nonlinear,
            dx4_factor: c.dx4_factor,
            dt_max: c.dt_max,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    #[default]
    StrangSplit,
    Etdrk4,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Self {
        match s {
            SchemeConfig::StrangSplit => Scheme::StrangSplit,
            SchemeConfig::Etdrk4 => Scheme::Etdrk4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub id: String,
    pub center: Vec<f64>,
    /// 0 for a ball.
    #[serde(default)]
    pub inner: f64,
    pub outer: f64,
}

impl From<&RegionConfig> for TrackedRegion {
    fn from(r: &RegionConfig) -> Self {
        TrackedRegion::annulus(&r.id, &r.center, r.inner, r.outer)
    }
}

run_config! {
/// `simulate`: integrate the equation and record norms.
pub struct SimulateConfig {
    pub phys: PhysConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub times: TimesConfig,
    #[serde(default)]
    pub dt_policy: DtPolicyConfig,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub balls_to_track: Vec<RegionConfig>,
    pub initial: InitialConfig,
    /// `profile.json` written by `ansatz`, relative to `output_dir`. When
    /// set, `ε = u − U_J` is tracked while `t` lies in the profile's mesh.
    #[serde(default)]
    pub profile_path: Option<PathBuf>,
    /// The profile's configuration inlined; manifests record the profile
    /// this way so that a run is reproducible from its manifest alone.
    #[serde(default)]
    pub profile: Option<AnsatzConfig>,
}
}

fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}
fn default_max_steps() -> usize {
    5_000_000
}

impl SimulateConfig {
    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(
            self.scheme.into(),
            self.times.dt_initial,
            self.times.t_start,
            self.times.t_end,
        );
        c.dt_policy = self.dt_policy.into();
        c.blowup_threshold = self.blowup_threshold;
        c.max_steps = self.max_steps;
        c
    }
}

run_config! {
/// `picard`: iterate the Duhamel map and compare with the split-step solver.
pub struct PicardConfig {
    pub phys: PhysConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    /// Final time `T` (may be negative).
    pub t_final: f64,
    #[serde(default = "default_picard_mesh")]
    pub mesh: usize,
    #[serde(default = "default_picard_iter")]
    pub max_iter: usize,
    #[serde(default = "default_picard_tol")]
    pub tol: f64,
    /// Also integrate with the split-step solver and report the difference.
    #[serde(default = "yes")]
    pub compare_split: bool,
    #[serde(default)]
    pub dt_policy: DtPolicyConfig,
}
}

fn default_picard_mesh() -> usize {
    256
}
fn default_picard_iter() -> usize {
    30
}
fn default_picard_tol() -> f64 {
    1e-13
}

/// A resolved run: what a manifest records and `rerun` replays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum RunConfig {
    Exponents(ExponentsConfig),
    Params(ParamsConfig),
    Weight(WeightConfig),
    Ansatz(AnsatzConfig),
    Simulate(SimulateConfig),
    Picard(PicardConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Exponents(_) => "exponents",
            RunConfig::Params(_) => "params",
            RunConfig::Weight(_) => "weight",
            RunConfig::Ansatz(_) => "ansatz",
            RunConfig::Simulate(_) => "simulate",
            RunConfig::Picard(_) => "picard",
        }
    }

    pub fn common(&self) -> Common {
        match self {
            RunConfig::Exponents(c) => c.common(),
            RunConfig::Params(c) => c.common(),
            RunConfig::Weight(c) => c.common(),
            RunConfig::Ansatz(c) => c.common(),
            RunConfig::Simulate(c) => c.common(),
            RunConfig::Picard(c) => c.common(),
        }
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        match self {
            RunConfig::Exponents(c) => c.output_dir = dir,
            RunConfig::Params(c) => c.output_dir = dir,
            RunConfig::Weight(c) => c.output_dir = dir,
            RunConfig::Ansatz(c) => c.output_dir = dir,
            RunConfig::Simulate(c) => c.output_dir = dir,
            RunConfig::Picard(c) => c.output_dir = dir,
        }
    }
}

pub fn rational(key: &str, s: &str) -> Result<Rational, CliError> {
    parse_rational(s).map_err(|_| CliError::Config {
        key: key.into(),
        message: format!("expected a rational number such as \"2\" or \"4/3\", got {s:?}"),
    })
}

/// Parse a JSON document, naming the offending key and position on error.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config {
            key: if path == "." { "<root>".into() } else { path },
            message: format!("{inner}"),
        }
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        key: "<file>".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_json(&text)
}

/// JSON schema of every run configuration.
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(RunConfig);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}
