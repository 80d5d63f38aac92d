//! One executor per subcommand. Executors compute artifacts in memory; the
//! caller writes them together with the manifest.

use std::path::PathBuf;
use std::sync::Arc;

use nls4_core::ansatz::{build_profile, scaling_report, AnsatzProfile, ProfileConfig, ScalingReport};
use nls4_core::diagnostics::{csv_string, json_string, SlopeFit};
use nls4_core::exponents::{
    aux_pair_as_printed, critical_pair, derive_exponents, subcritical_aux_pair, AdmissiblePair,
    IdentityCheck,
};
use nls4_core::field::{field_to_bytes, l2_norm, read_field, Spectral};
use nls4_core::geometry::{build_weight_with_edge, verify_weight_bounds, weight_bounds_refinement};
use nls4_core::params::{estimate_m, paper_params, AnsatzParams, Regime};
use nls4_core::solver::{
    duhamel_picard, eps_bound_report, local_slope, strichartz_norm, EpsBoundReport, Reference,
    SimSession, Status, StepStats, TrackedRegion,
};
use nls4_core::{Complex64, ComplexField, ExtRational, Grid, PhysParams, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::*;
use crate::error::CliError;
use crate::manifest::Artifact;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Result of executing a run configuration.
#[derive(Debug)]
pub struct Outcome {
    /// The configuration with defaults and referenced files resolved.
    pub resolved: RunConfig,
    pub inputs: Vec<(PathBuf, Vec<u8>)>,
    pub artifacts: Vec<Artifact>,
    /// Short JSON summary for stdout.
    pub summary: String,
    pub exit_code: i32,
}

fn progress(verbosity: u8, msg: impl FnOnce() -> String) {
    if verbosity > 0 {
        eprintln!("{}", msg());
    }
}

pub fn execute(run: &RunConfig) -> Result<Outcome, CliError> {
    match run {
        RunConfig::Exponents(c) => exponents(c),
        RunConfig::Params(c) => params(c),
        RunConfig::Weight(c) => weight(c),
        RunConfig::Ansatz(c) => ansatz(c),
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Picard(c) => picard(c),
    }
}

fn json(value: &impl Serialize) -> Result<String, CliError> {
    Ok(json_string(value)?)
}

fn simple(resolved: RunConfig, name: &str, text: String) -> Outcome {
    Outcome {
        resolved,
        inputs: vec![],
        artifacts: vec![Artifact::text(name, text.clone())],
        summary: text,
        exit_code: EXIT_OK,
    }
}

#[derive(Serialize)]
struct PairReport {
    q: ExtRational,
    r: ExtRational,
    dim: u32,
    admissible: bool,
    /// `4/q + N/r`, which equals `N/2` for admissible pairs.
    scaling: String,
}

impl From<AdmissiblePair> for PairReport {
    fn from(p: AdmissiblePair) -> Self {
        PairReport {
            q: p.q,
            r: p.r,
            dim: p.dim,
            admissible: p.is_admissible(),
            scaling: p.scaling().to_string(),
        }
    }
}

#[derive(Serialize)]
struct ExponentsReport {
    alpha: String,
    dim: u32,
    regime: Regime,
    gamma: ExtRational,
    rho: ExtRational,
    q0: ExtRational,
    p0: ExtRational,
    rho_tilde_1: Option<ExtRational>,
    rho_tilde_2: Option<ExtRational>,
    /// `pass`/`fail` per displayed identity, in its printed form.
    identities: std::collections::BTreeMap<String, &'static str>,
    identity_details: Vec<IdentityCheck>,
    defining_equations_hold: bool,
    embedding_chain_holds: bool,
    main_pair: PairReport,
    critical_pair: PairReport,
    aux_pair: PairReport,
    aux_pair_as_printed: PairReport,
}

fn exponents(c: &ExponentsConfig) -> Result<Outcome, CliError> {
    let alpha = rational("alpha", &c.alpha)?;
    let d = derive_exponents(alpha, c.dim).map_err(|e| CliError::invalid("alpha", e))?;
    let checks = d.identity_checks();
    let report = ExponentsReport {
        alpha: alpha.to_string(),
        dim: c.dim,
        regime: nls4_core::params::regime(alpha, c.dim),
        gamma: d.gamma,
        rho: d.rho,
        q0: d.q0,
        p0: d.p0,
        rho_tilde_1: d.rho_tilde_1,
        rho_tilde_2: d.rho_tilde_2,
        identities: checks
            .iter()
            .map(|ch| (ch.name.to_string(), if ch.printed_holds { "pass" } else { "fail" }))
            .collect(),
        identity_details: checks.clone(),
        defining_equations_hold: d.defining_equations_hold(),
        embedding_chain_holds: d.embedding_chain_holds(),
        main_pair: d.main_pair().into(),
        critical_pair: critical_pair(c.dim)?.into(),
        aux_pair: subcritical_aux_pair(alpha, c.dim)?.into(),
        aux_pair_as_printed: aux_pair_as_printed(alpha, c.dim).into(),
    };
    Ok(simple(RunConfig::Exponents(c.clone()), "exponents.json", json(&report)?))
}

#[derive(Serialize)]
struct ParamsReport {
    #[serde(flatten)]
    params: AnsatzParams,
    regime: Regime,
    /// `J(1−4/k) − 4/k`.
    error_exponent: f64,
    closing_margin: f64,
    /// Whether `M` was estimated by sampling.
    m_estimated: bool,
}

fn params(c: &ParamsConfig) -> Result<Outcome, CliError> {
    let phys = c.phys.to_core()?;
    let mut resolved = c.clone();
    let (params, m_estimated) = match &c.experiment {
        Some(e) => (e.to_core(&phys)?, false),
        None => {
            let (m, est) = match c.m {
                Some(m) => (m, false),
                None => (estimate_m(phys.alpha, 200_000, c.seed)?, true),
            };
            resolved.m = Some(m);
            let p = paper_params(phys.alpha, phys.lambda, phys.dim, m)
                .map_err(|e| CliError::invalid("phys", e))?;
            (p, est)
        }
    };
    let report = ParamsReport {
        regime: phys.regime(),
        error_exponent: params.error_exponent(params.j),
        closing_margin: params.closing_margin(),
        params,
        m_estimated,
    };
    Ok(simple(RunConfig::Params(resolved), "params.json", json(&report)?))
}

fn weight(c: &WeightConfig) -> Result<Outcome, CliError> {
    let grid = c.grid.to_core()?;
    let spec = c.set.to_core();
    if c.max_order > 4 {
        return Err(CliError::config("max_order", "at most 4 is supported"));
    }
    let w = build_weight_with_edge(&spec, c.k, &grid, c.edge.into())
        .map_err(|e| CliError::invalid("set", e))?;
    progress(c.verbosity, || format!("weight built on {} nodes", grid.len()));
    let report = if c.refine {
        json(&weight_bounds_refinement(&spec, c.k, &grid, c.edge.into(), c.max_order)?)?
    } else {
        json(&verify_weight_bounds(&w, c.max_order)?)?
    };
    Ok(Outcome {
        resolved: RunConfig::Weight(c.clone()),
        inputs: vec![],
        artifacts: vec![
            Artifact::binary("weight.bin", field_to_bytes(&w.a_field())),
            Artifact::text("bounds.json", report.clone()),
        ],
        summary: report,
        exit_code: EXIT_OK,
    })
}

/// Build the profile an ansatz configuration describes.
pub fn build_ansatz(c: &AnsatzConfig) -> Result<(PhysParams, AnsatzProfile), CliError> {
    let phys = c.phys.to_core()?;
    phys.require_focusing_dissipation()
        .map_err(|e| CliError::invalid("phys.lambda", e))?;
    let grid = c.grid.to_core()?;
    if grid.dim() != phys.dim as usize {
        return Err(CliError::config("grid.dim", "must equal phys.dim"));
    }
    let params = c.experiment.to_core(&phys)?;
    let w = build_weight_with_edge(&c.set.to_core(), params.k, &grid, c.edge.into())
        .map_err(|e| CliError::invalid("set", e))?;
    let tg = &c.time_grid;
    let pc = ProfileConfig {
        s_min: tg.s_min,
        s_max: tg.s_max,
        nodes_per_decade: tg.nodes_per_decade,
        mu: phys.mu,
        quad_tol: tg.quad_tol,
        max_refinements: tg.max_refinements,
        buffer_decades: tg.buffer_decades,
        validate_until: None,
    };
    let profile = build_profile(&params, &w, &pc).map_err(|e| match e {
        nls4_core::Error::Constraint(_) | nls4_core::Error::Domain(_) => {
            CliError::invalid("time_grid", e)
        }
        other => CliError::Core(other),
    })?;
    Ok((phys, profile))
}

/// Default fit window: the whole mesh above the quadrature buffer.
pub fn fit_window(c: &AnsatzConfig, profile: &AnsatzProfile) -> (f64, f64) {
    match c.time_grid.fit_window {
        Some([lo, hi]) => (lo, hi),
        None => (-c.time_grid.s_max, -profile.mesh.checked_from()),
    }
}

#[derive(Serialize)]
struct AnsatzReport<'a> {
    rigorous: bool,
    params: &'a AnsatzParams,
    /// Fitted exponents of `‖ℰ_j‖_∞/‖U₀‖_∞`, `j = 0..=J` (null if no fit).
    slopes: Vec<Option<f64>>,
    targets: Vec<f64>,
    sandwich_onset: Option<f64>,
    nodes_per_decade: usize,
    report: &'a ScalingReport,
}

fn ansatz(c: &AnsatzConfig) -> Result<Outcome, CliError> {
    let (_, profile) = build_ansatz(c)?;
    progress(c.verbosity, || {
        format!("profile built: {} nodes, quadrature error {:e}", profile.mesh.len(), profile.quad_error)
    });
    let (lo, hi) = fit_window(c, &profile);
    let rep = scaling_report(&profile, lo, hi).map_err(|e| CliError::invalid("time_grid.fit_window", e))?;
    let report = AnsatzReport {
        rigorous: profile.params.rigorous,
        params: &profile.params,
        slopes: rep.error_slopes.iter().map(|f| f.fit.map(|x| x.slope)).collect(),
        targets: rep.error_slopes.iter().map(|f| f.target).collect(),
        sandwich_onset: rep.sandwich_onset,
        nodes_per_decade: profile.mesh.nodes_per_decade(),
        report: &rep,
    };
    let scaling = json(&report)?;

    let mut header = vec!["t".to_string(), "u0_sup".to_string()];
    for j in 0..=profile.j_max() {
        for name in ["error_sup", "error_rel_sup", "diff_sup", "dt_sup", "ratio_min", "ratio_max", "error_tail"] {
            header.push(format!("{name}:{j}"));
        }
    }
    let rows: Vec<Vec<f64>> = (0..profile.mesh.len())
        .map(|m| {
            let mut row = vec![profile.stats[0][m].t, profile.stats[0][m].u0_sup];
            for st in &profile.stats {
                let n = &st[m];
                row.extend([n.error_sup, n.error_rel_sup, n.diff_sup, n.dt_sup, n.ratio_min, n.ratio_max, n.error_tail]);
            }
            row
        })
        .collect();

    // U_J at one node per decade
    let mut bin = Vec::new();
    let npd = profile.mesh.nodes_per_decade();
    for m in (0..profile.mesh.len()).step_by(npd) {
        let u = profile.u(profile.j_max(), profile.mesh.t(m))?;
        bin.extend(field_to_bytes(&u));
    }

    Ok(Outcome {
        resolved: RunConfig::Ansatz(c.clone()),
        inputs: vec![],
        artifacts: vec![
            Artifact::text("scaling.json", scaling.clone()),
            Artifact::text("stats.csv", csv_string(&header, &rows)),
            Artifact::text("profile.json", json(&portable(c))?),
            Artifact::binary("profile.bin", bin),
        ],
        summary: scaling,
        exit_code: EXIT_OK,
    })
}

/// The configuration without run-local fields, as stored in `profile.json`
/// and inlined into simulation manifests.
fn portable(c: &AnsatzConfig) -> AnsatzConfig {
    AnsatzConfig {
        output_dir: ".".into(),
        verbosity: 0,
        ..c.clone()
    }
}

/// Construct initial data on `grid` at time `t`.
pub fn initial_field(
    init: &InitialConfig,
    grid: Grid,
    t: f64,
    common: &Common,
    profile: Option<&AnsatzProfile>,
    inputs: &mut Vec<(PathBuf, Vec<u8>)>,
) -> Result<ComplexField, CliError> {
    let dim = grid.dim();
    let vector = |key: &str, v: &[f64]| -> Result<[f64; 3], CliError> {
        if v.is_empty() {
            return Ok([0.0; 3]);
        }
        if v.len() != dim {
            return Err(CliError::config(key, format!("expected {dim} components, got {}", v.len())));
        }
        let mut out = [0.0; 3];
        out[..dim].copy_from_slice(v);
        Ok(out)
    };
    let mut field = match init {
        InitialConfig::Profile => {
            let p = profile.ok_or_else(|| {
                CliError::config("initial", "kind \"profile\" needs profile_path or profile")
            })?;
            p.u(p.j_max(), t).map_err(|e| CliError::invalid("times.t_start", e))?
        }
        InitialConfig::Gaussian {
            amplitude,
            width,
            center,
            wavenumber,
        } => {
            if !(*width > 0.0) {
                return Err(CliError::config("initial.width", "must be positive"));
            }
            let c = vector("initial.center", center)?;
            let k = vector("initial.wavenumber", wavenumber)?;
            ComplexField::from_fn(grid, t, |x| {
                let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                let phase: f64 = (0..3).map(|i| k[i] * x[i]).sum();
                Complex64::from_polar(amplitude * (-r2 / (width * width)).exp(), phase)
            })
        }
        InitialConfig::Constant { value } => ComplexField::from_fn(grid, t, |_| (*value).into()),
        InitialConfig::Random { amplitude, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let m = *modes as i64;
            if 2 * m >= grid.points() as i64 {
                return Err(CliError::config("initial.modes", "must be below points_per_axis/2"));
            }
            let mut hat = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (flat, slot) in hat.iter_mut().enumerate() {
                let idx = grid.axis_indices(flat);
                if (0..dim).all(|a| grid.mode(idx[a]).abs() <= m) {
                    *slot = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            Spectral::new(grid).inverse(&mut hat);
            let f = ComplexField::new(grid, hat, t)?;
            let peak = f.max_abs();
            if peak == 0.0 {
                return Err(CliError::config("initial", "random field vanished"));
            }
            f.scale(Complex64::new(amplitude / peak, 0.0))
        }
        InitialConfig::File { path } => {
            let full = common.resolve(path);
            let bytes = std::fs::read(&full).map_err(|source| CliError::Io {
                action: "read",
                path: full.clone(),
                source,
            })?;
            let f = read_field(bytes.as_slice()).map_err(|e| CliError::invalid("initial.path", e))?;
            inputs.push((path.clone(), bytes));
            if *f.grid() != grid {
                return Err(CliError::config("initial.path", "field grid differs from the configured grid"));
            }
            f
        }
    };
    field.set_time(t);
    field.ensure_finite().map_err(|e| CliError::invalid("initial", e))?;
    Ok(field)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionSummary {
    pub id: String,
    pub start: f64,
    pub end: f64,
    /// `end / start`.
    pub ratio: f64,
    pub max: f64,
    /// Power-law fit against `−t` over rows with `t < 0`.
    pub slope: Option<SlopeFit>,
}

#[derive(Serialize)]
struct SimulationReport {
    status: Status,
    t_start: f64,
    t_final: f64,
    /// Last recorded time when blow-up was detected.
    blowup_time_estimate: Option<f64>,
    rows: usize,
    stats: StepStats,
    failure: Option<String>,
    regions: Vec<RegionSummary>,
    /// Experiment-mode comparison of `ε` with `(−t)^σ` and `(−t)^{(1−δ)σ}`;
    /// a report, not a proof.
    eps_bounds: Option<EpsBoundReport>,
    rigorous: bool,
}

pub fn summarize_regions(session: &SimSession) -> Vec<RegionSummary> {
    session
        .regions
        .iter()
        .map(|r| {
            let series = session.series.local_series(&r.id).unwrap_or_default();
            let start = series.first().map_or(f64::NAN, |p| p.1);
            let end = series.last().map_or(f64::NAN, |p| p.1);
            RegionSummary {
                id: r.id.clone(),
                start,
                end,
                ratio: end / start,
                max: series.iter().fold(0.0, |m, p| m.max(p.1)),
                slope: local_slope(&session.series, &r.id).ok(),
            }
        })
        .collect()
}

fn simulate(c: &SimulateConfig) -> Result<Outcome, CliError> {
    let common = c.common();
    let mut resolved = c.clone();
    let mut inputs = Vec::new();
    if let Some(path) = &c.profile_path {
        if c.profile.is_some() {
            return Err(CliError::config("profile_path", "give either profile_path or profile"));
        }
        let full = common.resolve(path);
        let bytes = std::fs::read(&full).map_err(|source| CliError::Io {
            action: "read",
            path: full.clone(),
            source,
        })?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let profile_cfg: AnsatzConfig = parse_json(&text).map_err(|e| match e {
            CliError::Config { key, message } => CliError::config(&format!("profile_path: {key}"), message),
            other => other,
        })?;
        inputs.push((path.clone(), bytes));
        resolved.profile_path = None;
        resolved.profile = Some(portable(&profile_cfg));
    }
    let phys = c.phys.to_core()?;
    let grid = c.grid.to_core()?;
    let profile = match &resolved.profile {
        Some(pc) => {
            let (pphys, profile) = build_ansatz(pc)?;
            if pphys != phys || profile.weight.grid != grid {
                return Err(CliError::config("profile", "profile phys/grid differ from the simulation's"));
            }
            progress(c.verbosity, || format!("profile rebuilt ({} nodes)", profile.mesh.len()));
            Some(Arc::new(profile))
        }
        None => None,
    };
    let u0 = initial_field(&c.initial, grid, c.times.t_start, &common, profile.as_deref(), &mut inputs)?;
    let reference: Option<Reference> = profile.clone().map(|p| {
        let j = p.j_max();
        Arc::new(move |t: f64| p.u(j, t).ok()) as Reference
    });
    let regions: Vec<TrackedRegion> = c.balls_to_track.iter().map(TrackedRegion::from).collect();
    let mut session = SimSession::new(phys, c.solver_config(), u0, regions, reference)
        .map_err(|e| match e {
            nls4_core::Error::Constraint(_) | nls4_core::Error::InvalidGrid(_) | nls4_core::Error::Regime(_) => {
                CliError::invalid("times", e)
            }
            other => CliError::Core(other),
        })?;
    session.run()?;
    progress(c.verbosity, || format!("{:?} at t = {:e} after {} steps", session.status, session.t, session.stats.accepted));
    let exit_code = match session.status {
        Status::Completed | Status::Running => EXIT_OK,
        Status::BlowupDetected => EXIT_BLOWUP,
        Status::Diverged => EXIT_DIVERGED,
    };
    let eps_bounds = profile
        .as_ref()
        .map(|p| eps_bound_report(&session.series, p.params.sigma, *p.params.delta.numer() as f64 / *p.params.delta.denom() as f64));
    let report = SimulationReport {
        status: session.status,
        t_start: c.times.t_start,
        t_final: session.t,
        blowup_time_estimate: (session.status == Status::BlowupDetected).then_some(session.t),
        rows: session.series.rows.len(),
        stats: session.stats,
        failure: session.failure.clone(),
        regions: summarize_regions(&session),
        eps_bounds,
        rigorous: false,
    };
    let status = json(&report)?;
    Ok(Outcome {
        resolved: RunConfig::Simulate(resolved),
        inputs,
        artifacts: vec![
            Artifact::text("series.csv", session.series.to_csv()),
            Artifact::text("status.json", status.clone()),
            Artifact::binary("final.bin", field_to_bytes(&session.u)),
        ],
        summary: status,
        exit_code,
    })
}

#[derive(Serialize)]
struct StrichartzReport {
    pair: PairReport,
    value: f64,
}

#[derive(Serialize)]
struct PicardReport {
    converged: bool,
    iterations: usize,
    distances: Vec<f64>,
    ratios: Vec<f64>,
    /// `‖u_mesh(T) − u_{mesh/2}(T)‖₂` of the final iterates.
    mesh_convergence_l2: Option<f64>,
    /// `‖u_picard(T) − u_split(T)‖₂`.
    split_difference_l2: Option<f64>,
    /// Free-flow part of `F(φ, T)` for the auxiliary admissible pair.
    strichartz: StrichartzReport,
    failure: Option<String>,
}

fn picard(c: &PicardConfig) -> Result<Outcome, CliError> {
    let phys = c.phys.to_core()?;
    let grid = c.grid.to_core()?;
    let common = c.common();
    let mut inputs = Vec::new();
    let phi = initial_field(&c.initial, grid, 0.0, &common, None, &mut inputs)?;
    if !(c.t_final.is_finite() && c.t_final != 0.0) {
        return Err(CliError::config("t_final", "must be finite and non-zero"));
    }
    if c.mesh == 0 || c.max_iter < 3 {
        return Err(CliError::config("mesh", "mesh must be positive and max_iter at least 3"));
    }
    let mut sc = nls4_core::SolverConfig::new(Scheme::Picard, c.t_final.abs() / c.mesh as f64, 0.0, c.t_final);
    sc.picard_mesh = c.mesh;
    sc.picard_max_iter = c.max_iter;
    sc.picard_tol = c.tol;
    sc.dt_policy = c.dt_policy.into();
    let pair = subcritical_aux_pair(phys.alpha, phys.dim)?;
    let strichartz = StrichartzReport {
        value: strichartz_norm(&phi, &pair, c.t_final, c.mesh.max(16), &phys)?,
        pair: pair.into(),
    };
    let result = match duhamel_picard(&phi, c.t_final, &phys, &sc) {
        Ok(r) => r,
        Err(nls4_core::Error::NoConvergence(msg)) => {
            let report = PicardReport {
                converged: false,
                iterations: 0,
                distances: vec![],
                ratios: vec![],
                mesh_convergence_l2: None,
                split_difference_l2: None,
                strichartz,
                failure: Some(msg),
            };
            let text = json(&report)?;
            return Ok(Outcome {
                resolved: RunConfig::Picard(c.clone()),
                inputs,
                artifacts: vec![Artifact::text("picard.json", text.clone())],
                summary: text,
                exit_code: EXIT_DIVERGED,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let mesh_convergence_l2 = if c.mesh >= 2 {
        let mut coarse = sc.clone();
        coarse.picard_mesh = c.mesh / 2;
        duhamel_picard(&phi, c.t_final, &phys, &coarse)
            .ok()
            .map(|r| l2_norm(&r.final_state().sub(result.final_state())))
    } else {
        None
    };
    let split_difference_l2 = if c.compare_split {
        let mut split = sc.clone();
        split.scheme = Scheme::StrangSplit;
        let mut s = SimSession::new(phys, split, phi.clone(), vec![], None)?;
        s.run()?;
        (s.status == Status::Completed).then(|| l2_norm(&s.u.sub(result.final_state())))
    } else {
        None
    };
    let report = PicardReport {
        converged: result.converged,
        iterations: result.iterations,
        distances: result.distances.clone(),
        ratios: result.ratios.clone(),
        mesh_convergence_l2,
        split_difference_l2,
        strichartz,
        failure: None,
    };
    let text = json(&report)?;
    Ok(Outcome {
        resolved: RunConfig::Picard(c.clone()),
        inputs,
        artifacts: vec![
            Artifact::text("picard.json", text.clone()),
            Artifact::binary("final.bin", field_to_bytes(result.final_state())),
        ],
        summary: text,
        exit_code: EXIT_OK,
    })
}
