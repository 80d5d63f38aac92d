//! Physical parameters and the constants `δ, σ, J, k, M` of the blow-up
//! construction.

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{rational_str, Rational};

/// Serde adapter writing a complex number as `{"re": .., "im": ..}`.
pub mod complex_obj {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Repr { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(Complex64::new(r.re, r.im))
    }
}

/// Whether `(N−8)α` lies below, at or above 8.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Coefficients of `i∂ₜu + Δ²u + μΔu + λ|u|^α u = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    #[serde(with = "rational_str")]
    pub alpha: Rational,
    #[serde(with = "complex_obj")]
    pub lambda: Complex64,
    pub mu: i8,
    pub dim: u32,
}

impl PhysParams {
    pub fn new(alpha: Rational, lambda: Complex64, mu: i8, dim: u32) -> Result<Self> {
        let p = PhysParams {
            alpha,
            lambda,
            mu,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_positive() {
            return Err(Error::Regime(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !matches!(self.mu, -1..=1) {
            return Err(Error::Regime(format!("mu must be -1, 0 or 1, got {}", self.mu)));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Regime(format!(
                "only dimensions 1..=3 can be simulated, got {}",
                self.dim
            )));
        }
        if !(self.lambda.re.is_finite() && self.lambda.im.is_finite()) {
            return Err(Error::Regime("lambda must be finite".into()));
        }
        Ok(())
    }

    pub fn alpha_f64(&self) -> f64 {
        ratio_f64(self.alpha)
    }

    pub fn regime(&self) -> Regime {
        regime(self.alpha, self.dim)
    }

    /// Blow-up constructions need `Im λ < 0`.
    pub fn require_focusing_dissipation(&self) -> Result<()> {
        if self.lambda.im < 0.0 {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "Im lambda must be negative, got {}",
                self.lambda.im
            )))
        }
    }
}

pub fn regime(alpha: Rational, dim: u32) -> Regime {
    let lhs = Rational::from_integer(dim as i128 - 8) * alpha;
    let eight = Rational::from_integer(8);
    if lhs < eight {
        Regime::Subcritical
    } else if lhs == eight {
        Regime::Critical
    } else {
        Regime::Supercritical
    }
}

pub(crate) fn ratio_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// The constants the blow-up proof requires (see `paper_params`).
    Paper,
    Experiment,
}

/// The four candidates whose maximum is `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaTerms {
    pub four_over_delta: f64,
    pub four_over_alpha_gap: f64,
    pub nonlinear: f64,
    pub g: f64,
}

impl SigmaTerms {
    pub fn max(&self) -> f64 {
        self.four_over_delta
            .max(self.four_over_alpha_gap)
            .max(self.nonlinear)
            .max(self.g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnsatzParams {
    #[serde(with = "rational_str")]
    pub alpha: Rational,
    #[serde(with = "complex_obj")]
    pub lambda: Complex64,
    pub dim: u32,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(with = "rational_str")]
    pub delta: Rational,
    pub sigma: f64,
    #[serde(rename = "J")]
    pub j: u32,
    pub k: u32,
    pub mode: ParamMode,
    /// Rigorous mode only: the candidates for `σ`.
    pub sigma_terms: Option<SigmaTerms>,
    /// `false` for experiment mode; the constants then carry no proof.
    pub rigorous: bool,
}

impl AnsatzParams {
    pub fn alpha_f64(&self) -> f64 {
        ratio_f64(self.alpha)
    }

    /// `J(1−4/k) − 4/k`, the decay exponent of the level-`J` error relative
    /// to `|U₀|`.
    pub fn error_exponent(&self, j: u32) -> f64 {
        let k = self.k as f64;
        j as f64 * (1.0 - 4.0 / k) - 4.0 / k
    }

    /// `−1 − 1/α + J(1−4/k) − 4/k − (1−2δ)σ`, which must be non-negative in
    /// rigorous mode.
    pub fn closing_margin(&self) -> f64 {
        -1.0 - 1.0 / self.alpha_f64() + self.error_exponent(self.j)
            - (1.0 - 2.0 * ratio_f64(self.delta)) * self.sigma
    }

    pub fn phys(&self, mu: i8) -> Result<PhysParams> {
        PhysParams::new(self.alpha, self.lambda, mu, self.dim)
    }
}

/// `f(α) = 1` for `α ≤ 1`, else `(α−1)/(2(α+2))`.
pub fn f_alpha(alpha: Rational) -> Rational {
    if alpha <= Rational::one() {
        Rational::one()
    } else {
        (alpha - 1) / ((alpha + 2) * 2)
    }
}

/// `g(α) = 0` for `α ≤ 1`, else `2/((α−1)−(α+2)δ)`.
pub fn g_alpha(alpha: Rational, delta: Rational) -> Rational {
    if alpha <= Rational::one() {
        Rational::zero()
    } else {
        Rational::from_integer(2) / ((alpha - 1) - (alpha + 2) * delta)
    }
}

/// `δ = min{1/10, α/(α+4), f(α)}`.
pub fn delta(alpha: Rational) -> Rational {
    Rational::new(1, 10).min(alpha / (alpha + 4)).min(f_alpha(alpha))
}

fn floor_i128(r: Rational) -> i128 {
    r.floor().to_integer()
}

pub fn paper_params(alpha: Rational, lambda: Complex64, dim: u32, m: f64) -> Result<AnsatzParams> {
    if !alpha.is_positive() {
        return Err(Error::Regime(format!("alpha must be positive, got {alpha}")));
    }
    if dim == 0 || regime(alpha, dim) == Regime::Supercritical {
        return Err(Error::Regime(format!(
            "(N-8)·alpha must not exceed 8 (N = {dim}, alpha = {alpha})"
        )));
    }
    if !(lambda.im < 0.0) {
        return Err(Error::Regime(format!("Im lambda must be negative, got {}", lambda.im)));
    }
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::Regime(format!("M must be at least 1, got {m}")));
    }
    let one = Rational::one();
    let d = delta(alpha);
    let af = ratio_f64(alpha);
    let df = ratio_f64(d);
    let t1 = Rational::from_integer(4) / d;
    let t2 = Rational::from_integer(4) / (alpha * (one - d));
    let t4 = g_alpha(alpha, d);
    let nonlinear =
        2f64.powf(af + 2.0) * lambda.norm() * m / (-af * lambda.im) / (af.min(1.0) * (1.0 - df));
    let terms = SigmaTerms {
        four_over_delta: ratio_f64(t1),
        four_over_alpha_gap: ratio_f64(t2),
        nonlinear,
        g: ratio_f64(t4),
    };
    let sigma = terms.max();
    // J = ⌊2/α + 4σ⌋ + 1, in exact arithmetic whenever the winning term is rational
    let exact_sigma = [t1, t2, t4].into_iter().max().filter(|s| ratio_f64(*s) >= nonlinear);
    let j = match exact_sigma {
        Some(s) => floor_i128(Rational::from_integer(2) / alpha + s * 4) + 1,
        None => (2.0 / af + 4.0 * sigma).floor() as i128 + 1,
    };
    let k = (4 * j + 6).max(floor_i128(alpha * Rational::from_integer(dim as i128)) + 1);
    let out = AnsatzParams {
        alpha,
        lambda,
        dim,
        m,
        delta: d,
        sigma,
        j: u32::try_from(j).map_err(|_| Error::Regime("J out of range".into()))?,
        k: u32::try_from(k).map_err(|_| Error::Regime("k out of range".into()))?,
        mode: ParamMode::Paper,
        sigma_terms: Some(terms),
        rigorous: true,
    };
    // both inequalities are consumed by the Grönwall arguments downstream
    let usage = 2f64.powf(af + 1.0) * lambda.norm() * m / (-af * lambda.im);
    if !(sigma >= 4.0 / df && sigma >= usage) {
        return Err(Error::Constraint(format!(
            "sigma = {sigma} fails sigma >= 4/delta or sigma >= {usage}"
        )));
    }
    if out.closing_margin() < 0.0 {
        return Err(Error::Constraint(format!(
            "-1 - 1/alpha + J(1-4/k) - 4/k >= (1-2 delta) sigma fails by {}",
            -out.closing_margin()
        )));
    }
    Ok(out)
}

/// User-chosen `(J, k, σ, δ)` for numerically feasible experiments.
pub fn experiment_params(
    j: u32,
    k: u32,
    sigma: f64,
    delta: Rational,
    base: &PhysParams,
) -> Result<AnsatzParams> {
    let mut violated = Vec::new();
    if (k as u64) < 4 * j as u64 + 6 {
        violated.push(format!("k >= 4J+6 violated ({k} < {})", 4 * j + 6));
    }
    if Rational::from_integer(k as i128) <= base.alpha * Rational::from_integer(base.dim as i128) {
        violated.push(format!("k > N*alpha violated ({k} <= {})", base.alpha * base.dim as i128));
    }
    if !(delta.is_positive() && delta < Rational::one()) {
        violated.push(format!("0 < delta < 1 violated (delta = {delta})"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        violated.push(format!("sigma > 0 violated (sigma = {sigma})"));
    }
    if !violated.is_empty() {
        return Err(Error::Constraint(violated.join("; ")));
    }
    Ok(AnsatzParams {
        alpha: base.alpha,
        lambda: base.lambda,
        dim: base.dim,
        m: 1.0,
        delta,
        sigma,
        j,
        k,
        mode: ParamMode::Experiment,
        sigma_terms: None,
        rigorous: false,
    })
}

/// Sampled estimate of the constant `M ≥ 1` in
/// `||u+v|^α(u+v) − |u|^α u| ≤ M(|v|^{α+1} + |u|^α|v|)`.
///
/// Moduli are log-uniform in `[1e-6, 1e6]` and phases uniform. The result is
/// the running maximum of the ratio times a 1.1 safety factor, floored at 1.
pub fn estimate_m(alpha: Rational, samples: usize, seed: u64) -> Result<f64> {
    if !alpha.is_positive() {
        return Err(Error::Regime(format!("alpha must be positive, got {alpha}")));
    }
    let a = ratio_f64(alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let modulus = 10f64.powf(rng.gen_range(-6.0..6.0));
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(modulus, phase)
    };
    let nl = |z: Complex64| z * z.norm().powf(a);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = draw(&mut rng);
        let v = draw(&mut rng);
        let lhs = (nl(u + v) - nl(u)).norm();
        let rhs = v.norm().powf(a + 1.0) + u.norm().powf(a) * v.norm();
        if rhs > 0.0 && lhs.is_finite() {
            worst = worst.max(lhs / rhs);
        }
    }
    Ok((1.1 * worst).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn paper_alpha_two() {
        let p = paper_params(r(2, 1), Complex64::new(0.0, -1.0), 1, 1.0).unwrap();
        assert_eq!(f_alpha(r(2, 1)), r(1, 8));
        assert_eq!(p.delta, r(1, 10));
        let t = p.sigma_terms.unwrap();
        assert_eq!(t.four_over_delta, 40.0);
        assert!((t.four_over_alpha_gap - 20.0 / 9.0).abs() < 1e-14);
        assert!((t.nonlinear - 80.0 / 9.0).abs() < 1e-13);
        assert!((t.g - 10.0 / 3.0).abs() < 1e-14);
        assert_eq!(p.sigma, 40.0);
        assert_eq!((p.j, p.k), (162, 654));
        assert!(p.closing_margin() >= 0.0);
    }

    #[test]
    fn paper_alpha_one() {
        let p = paper_params(r(1, 1), Complex64::new(0.0, -1.0), 1, 1.0).unwrap();
        assert_eq!(p.delta, r(1, 10));
        assert_eq!(g_alpha(r(1, 1), p.delta), r(0, 1));
        assert_eq!(p.sigma, 40.0);
        assert_eq!((p.j, p.k), (163, 658));
    }

    #[test]
    fn paper_rejects_bad_input() {
        let l = Complex64::new(0.0, -1.0);
        assert!(paper_params(r(2, 1), Complex64::new(1.0, 0.0), 1, 1.0).is_err());
        assert!(paper_params(r(2, 1), l, 1, 0.5).is_err());
        assert!(paper_params(r(9, 1), l, 9, 1.0).is_err());
        assert!(paper_params(r(0, 1), l, 1, 1.0).is_err());
    }

    #[test]
    fn large_m_makes_nonlinear_term_win() {
        let p = paper_params(r(1, 2), Complex64::new(0.3, -0.2), 3, 50.0).unwrap();
        let t = p.sigma_terms.unwrap();
        assert_eq!(p.sigma, t.nonlinear);
        assert!(p.k as f64 > 3.0 * 0.5);
        assert!(p.closing_margin() >= 0.0);
    }

    #[test]
    fn delta_never_exceeds_a_tenth() {
        for n in 1..200 {
            let a = r(n, 17);
            assert!(delta(a) <= r(1, 10));
            if a <= r(1, 1) {
                assert_eq!(g_alpha(a, delta(a)), r(0, 1));
            }
        }
    }

    #[test]
    fn experiment_mode() {
        let base = PhysParams::new(r(2, 1), Complex64::new(0.0, -1.0), 0, 1).unwrap();
        let p = experiment_params(2, 40, 2.0, r(1, 10), &base).unwrap();
        assert_eq!(p.mode, ParamMode::Experiment);
        assert!(!p.rigorous);
        let e = experiment_params(2, 12, 2.0, r(1, 10), &base).unwrap_err();
        assert!(e.to_string().contains("k >= 4J+6 violated"));
        assert!(experiment_params(0, 6, 2.0, r(1, 10), &base).is_ok());
        assert!(experiment_params(0, 2, 2.0, r(1, 10), &base).is_err());
        let targets: Vec<f64> = (0..3).map(|j| p.error_exponent(j)).collect();
        for (t, e) in targets.iter().zip([-0.1, 0.8, 1.7]) {
            assert!((t - e).abs() < 1e-12);
        }
    }

    #[test]
    fn m_estimates() {
        let m1 = estimate_m(r(1, 1), 10_000, 1).unwrap();
        assert!((1.0..=4.0).contains(&m1));
        let m2a = estimate_m(r(2, 1), 20_000, 1).unwrap();
        let m2b = estimate_m(r(2, 1), 20_000, 2).unwrap();
        assert!((m2a - m2b).abs() / m2a < 0.05);
        assert!(estimate_m(r(2, 1), 40_000, 1).unwrap() >= m2a);
        assert_eq!(estimate_m(r(2, 1), 20_000, 1).unwrap(), m2a);
    }

    #[test]
    fn phys_serde_roundtrip() {
        let p = PhysParams::new(r(4, 3), Complex64::new(0.5, -1.0), -1, 2).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"alpha":"4/3","lambda":{"re":0.5,"im":-1.0},"mu":-1,"dim":2}"#);
        let back: PhysParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(PhysParams::new(r(1, 1), Complex64::new(0.0, 1.0), 2, 1).is_err());
    }
}
