//! End-to-end checks through the public API.

use std::f64::consts::PI;

use nls4_core::diagnostics::{parse_csv, slope_fit};
use nls4_core::exponents::{critical_pair, derive_exponents, is_admissible, subcritical_aux_pair};
use nls4_core::field::{l2_norm, local_l2, read_field, sobolev_norm, write_field};
use nls4_core::params::{experiment_params, paper_params};
use nls4_core::solver::{TrackedRegion, DEFAULT_BLOWUP_THRESHOLD};
use nls4_core::{Complex64, ComplexField, ExtRational, Grid, PhysParams, Rational, Scheme, SimSession, SolverConfig, Status};
use proptest::prelude::*;

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

#[test]
fn exponent_examples() {
    let d = derive_exponents(r(1, 1), 10).unwrap();
    assert_eq!(d.gamma, ExtRational::integer(12));
    assert_eq!(d.rho, ExtRational::new(15, 7));
    assert_eq!(d.q0, ExtRational::new(120, 17));
    assert_eq!(d.p0, ExtRational::new(60, 13));
    assert!(d.main_pair().is_admissible());

    // critical power in N = 9: γ = α + 2
    let d = derive_exponents(r(8, 1), 9).unwrap();
    assert_eq!(d.gamma, ExtRational::integer(10));

    let c9 = critical_pair(9).unwrap();
    assert_eq!((c9.q, c9.r), (ExtRational::integer(10), ExtRational::integer(90)));
    let c10 = critical_pair(10).unwrap();
    assert_eq!((c10.q, c10.r), (ExtRational::integer(6), ExtRational::integer(30)));

    let aux = subcritical_aux_pair(r(2, 1), 1).unwrap();
    assert_eq!((aux.q, aux.r), (ExtRational::integer(24), ExtRational::integer(3)));

    assert!(is_admissible(&ExtRational::Infinity, &ExtRational::integer(2), 7));
    assert!(!is_admissible(&ExtRational::integer(2), &ExtRational::Infinity, 4));
}

#[test]
fn paper_and_experiment_parameters() {
    let p = paper_params(r(2, 1), Complex64::new(0.0, -1.0), 1, 1.0).unwrap();
    assert_eq!((p.delta, p.sigma, p.j, p.k), (r(1, 10), 40.0, 162, 654));
    let p = paper_params(r(1, 1), Complex64::new(0.0, -1.0), 1, 1.0).unwrap();
    assert_eq!((p.j, p.k), (163, 658));

    let base = PhysParams::new(r(2, 1), Complex64::new(0.0, -1.0), 0, 1).unwrap();
    assert!(experiment_params(2, 40, 2.0, r(1, 10), &base).is_ok());
    let err = experiment_params(2, 12, 2.0, r(1, 10), &base).unwrap_err();
    assert!(err.to_string().contains("4J+6"), "{err}");
}

#[test]
fn norms_of_simple_fields() {
    let g = Grid::new(1, 256, 1.0).unwrap();
    let one = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
    assert!((l2_norm(&one) - 2f64.sqrt()).abs() < 1e-12);
    assert!((sobolev_norm(&one, 0).unwrap() - l2_norm(&one)).abs() < 1e-14);
    let ball = local_l2(&one, &[0.0], 0.5).unwrap();
    assert!((ball - 1.0).abs() < 0.02, "{ball}");

    let wide = Grid::new(1, 1024, 20.0).unwrap();
    let gauss = ComplexField::from_fn(wide, 0.0, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
    assert!((l2_norm(&gauss) - (PI / 2.0).powf(0.25)).abs() < 1e-8);
}

#[test]
fn field_files_round_trip_bit_exactly() {
    let g = Grid::new(2, 16, 1.5).unwrap();
    let f = ComplexField::from_fn(g, -0.25, |x| Complex64::new(x[0].sin(), x[1] * 1e-300));
    let mut bytes = Vec::new();
    write_field(&f, &mut bytes).unwrap();
    let back = read_field(bytes.as_slice()).unwrap();
    assert_eq!(back, f);
    assert!(read_field(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn blowup_of_constant_data_is_detected_and_recorded() {
    let g = Grid::new(1, 32, 1.0).unwrap();
    let phys = PhysParams::new(r(2, 1), Complex64::new(0.0, -1.0), 0, 1).unwrap();
    // |u|^{−2} = 1 − 2t: blow-up at t = 1/2
    let u = ComplexField::from_fn(g, 0.0, |_| Complex64::new(1.0, 0.0));
    let cfg = SolverConfig::new(Scheme::StrangSplit, 1e-3, 0.0, 1.0);
    assert_eq!(cfg.blowup_threshold, DEFAULT_BLOWUP_THRESHOLD);
    let regions = vec![TrackedRegion::ball("all", &[0.0], 2.0)];
    let mut s = SimSession::new(phys, cfg, u, regions, None).unwrap();
    s.run().unwrap();
    assert_ne!(s.status, Status::Completed);
    assert!((s.t - 0.5).abs() < 1e-6, "{}", s.t);
    let (header, rows) = parse_csv(&s.series.to_csv()).unwrap();
    assert_eq!(header[4], "local:all");
    assert_eq!(rows.len(), s.series.rows.len());
}

#[test]
fn slope_fit_examples() {
    let pts: Vec<(f64, f64)> = (1..40).map(|i| -(10f64).powf(-i as f64 / 8.0)).map(|t| (t, 7.0 * (-t).powf(-0.5))).collect();
    let fit = slope_fit(&pts).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-10 && (fit.r_squared - 1.0).abs() < 1e-10);
    let wobble: Vec<(f64, f64)> = pts.iter().map(|&(t, _)| (t, (1.0 + 0.01 * (-t).ln().sin()) / -t)).collect();
    assert!((slope_fit(&wobble).unwrap().slope + 1.0).abs() < 0.02);
    assert!(slope_fit(&[(-1.0, 1.0); 5]).is_err());
}

proptest! {
    #[test]
    fn slope_fit_is_scale_invariant_and_power_equivariant(
        p in -3.0f64..3.0, c in 1e-3f64..1e3, a in 0.2f64..4.0, wiggle in 0.0f64..0.3
    ) {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = -(10f64).powf(-(i as f64) / 4.0);
                (t, (-t).powf(p) * (1.0 + wiggle * (i as f64).sin()))
            })
            .collect();
        let base = slope_fit(&pts).unwrap();
        let scaled: Vec<_> = pts.iter().map(|&(t, y)| (t, c * y)).collect();
        let s = slope_fit(&scaled).unwrap();
        prop_assert!((s.slope - base.slope).abs() < 1e-12);
        prop_assert!((s.intercept - base.intercept - c.ln()).abs() < 1e-9);
        let powered: Vec<_> = pts.iter().map(|&(t, y)| (t, y.powf(a))).collect();
        prop_assert!((slope_fit(&powered).unwrap().slope - a * base.slope).abs() < 1e-12 * (1.0 + a * base.slope.abs()) + 1e-12);
    }
}
