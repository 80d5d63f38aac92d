//! Exact bookkeeping for the Lebesgue and Strichartz exponents.
//!
//! Everything here is carried in `Ratio<i128>` with an explicit infinity, so
//! identities are checked exactly rather than to a tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Rational number or `+∞`. `1/∞ = 0` and `1/0 = ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    Infinity,
}

impl ExtRational {
    pub fn new(numer: i128, denom: i128) -> Self {
        ExtRational::Finite(Rational::new(numer, denom))
    }

    pub fn integer(n: i128) -> Self {
        ExtRational::Finite(Rational::from_integer(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinity)
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            ExtRational::Finite(r) => Some(*r),
            ExtRational::Infinity => None,
        }
    }

    /// Floating-point value; `None` for infinity.
    pub fn finite_f64(&self) -> Option<f64> {
        self.finite().map(|r| ratio_to_f64(&r))
    }

    /// Floating-point value with `∞` mapped to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.finite_f64().unwrap_or(f64::INFINITY)
    }

    /// Reciprocal; zero maps to infinity and infinity to zero.
    pub fn recip(&self) -> Self {
        match self {
            ExtRational::Infinity => ExtRational::Finite(Rational::zero()),
            ExtRational::Finite(r) if r.is_zero() => ExtRational::Infinity,
            ExtRational::Finite(r) => ExtRational::Finite(r.recip()),
        }
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn dual(&self) -> Self {
        let inv = self.recip().finite().unwrap_or_else(Rational::zero);
        ExtRational::Finite(Rational::one() - inv).recip()
    }
}

fn ratio_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl From<Rational> for ExtRational {
    fn from(r: Rational) -> Self {
        ExtRational::Finite(r)
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Infinity, ExtRational::Infinity) => Ordering::Equal,
            (ExtRational::Infinity, _) => Ordering::Greater,
            (_, ExtRational::Infinity) => Ordering::Less,
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Infinity => write!(f, "inf"),
            ExtRational::Finite(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for ExtRational {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(ExtRational::Infinity);
        }
        parse_rational(s).map(ExtRational::Finite)
    }
}

/// Parse `"p/q"`, an integer, or a terminating decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Format(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: i128 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10i128.pow(frac.len() as u32);
        let frac_part: i128 = frac.parse().map_err(|_| bad())?;
        let mag = int_part.abs() * scale + frac_part;
        return Ok(Rational::new(if negative { -mag } else { mag }, scale));
    }
    s.parse::<i128>().map(Rational::from_integer).map_err(|_| bad())
}

/// Serde adapter writing a [`Rational`] as `"p/q"`.
pub mod rational_str {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

impl Serialize for ExtRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A pair `(q, r)` with `4/q + N/r = N/2`, `2 ≤ q, r ≤ ∞`, `(q, r, N) ≠ (2, ∞, 4)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub q: ExtRational,
    pub r: ExtRational,
    pub dim: u32,
}

impl AdmissiblePair {
    pub fn is_admissible(&self) -> bool {
        is_admissible(&self.q, &self.r, self.dim)
    }

    /// `4/q + N/r`, which equals `N/2` exactly for admissible pairs.
    pub fn scaling(&self) -> Rational {
        scaling(&self.q, &self.r, self.dim)
    }
}

fn inv(x: &ExtRational) -> Rational {
    x.recip().finite().unwrap_or_else(Rational::zero)
}

fn scaling(q: &ExtRational, r: &ExtRational, n: u32) -> Rational {
    Rational::from_integer(4) * inv(q) + Rational::from_integer(n as i128) * inv(r)
}

/// Biharmonic admissibility in exact arithmetic.
pub fn is_admissible(q: &ExtRational, r: &ExtRational, n: u32) -> bool {
    let two = ExtRational::integer(2);
    if *q < two || *r < two || n == 0 {
        return false;
    }
    if *q == two && r.is_infinite() && n == 4 {
        return false;
    }
    scaling(q, r, n) == Rational::new(n as i128, 2)
}

/// One displayed exponent identity, with both the printed and the exact
/// right-hand sides.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    #[serde(with = "rational_str")]
    pub lhs: Rational,
    #[serde(with = "rational_str")]
    pub printed_rhs: Rational,
    #[serde(with = "rational_str")]
    pub exact_rhs: Rational,
    /// `lhs == printed_rhs`.
    pub printed_holds: bool,
    /// The sign claimed alongside the identity holds for `lhs`.
    pub sign_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedExponents {
    #[serde(with = "rational_str")]
    pub alpha: Rational,
    pub dim: u32,
    pub gamma: ExtRational,
    pub rho: ExtRational,
    pub q0: ExtRational,
    pub p0: ExtRational,
    /// Defined for `0 < α ≤ 1`.
    pub rho_tilde_1: Option<ExtRational>,
    /// Defined for `α > 1`.
    pub rho_tilde_2: Option<ExtRational>,
}

fn regime_check(alpha: Rational, n: u32) -> Result<()> {
    if n < 9 {
        return Err(Error::Regime(format!("dimension must be at least 9, got {n}")));
    }
    if !alpha.is_positive() {
        return Err(Error::Regime(format!("alpha must be positive, got {alpha}")));
    }
    if Rational::from_integer(n as i128 - 8) * alpha > Rational::from_integer(8) {
        return Err(Error::Regime(format!(
            "(N-8)·alpha must not exceed 8 (N = {n}, alpha = {alpha})"
        )));
    }
    Ok(())
}

/// `γ = 8(α+2)/((N−8)α)`, the time exponent paired with `ρ`.
pub fn gamma(alpha: Rational, n: u32) -> ExtRational {
    let nn = Rational::from_integer(n as i128);
    let eight = Rational::from_integer(8);
    let denom = (nn - eight) * alpha;
    if denom.is_zero() {
        ExtRational::Infinity
    } else {
        ExtRational::Finite(eight * (alpha + 2) / denom)
    }
}

/// `ρ = N(α+2)/(N+4α)`.
pub fn rho(alpha: Rational, n: u32) -> Rational {
    let nn = Rational::from_integer(n as i128);
    nn * (alpha + 2) / (nn + alpha * 4)
}

pub fn derive_exponents(alpha: Rational, n: u32) -> Result<DerivedExponents> {
    regime_check(alpha, n)?;
    let one = Rational::one();
    let nn = Rational::from_integer(n as i128);
    let rho = rho(alpha, n);
    let inv_rho = rho.recip();
    let lead = (alpha + 2) / ((alpha + 1) * 2);
    // (α+1)/q0 = lead − 1/ρ
    let inv_q0 = (lead - inv_rho) / (alpha + 1);
    // 1/p0 = 1/ρ − α/(2(α+1))
    let inv_p0 = inv_rho - alpha / ((alpha + 1) * 2);
    let (rho_tilde_1, rho_tilde_2) = if alpha <= one {
        (Some(ExtRational::Finite(rho / (rho - alpha - one))), None)
    } else {
        // from 1/ρ' = (α−1)(1/ρ − 4/N) + 1/ρ + 1/ρ̃₂
        let inv_rt2 = one - inv_rho - inv_rho - (alpha - one) * (inv_rho - Rational::from_integer(4) / nn);
        (None, Some(ExtRational::Finite(inv_rt2.recip())))
    };
    Ok(DerivedExponents {
        alpha,
        dim: n,
        gamma: gamma(alpha, n),
        rho: ExtRational::Finite(rho),
        q0: ExtRational::Finite(inv_q0).recip(),
        p0: ExtRational::Finite(inv_p0).recip(),
        rho_tilde_1,
        rho_tilde_2,
    })
}

impl DerivedExponents {
    fn inv_rho(&self) -> Rational {
        inv(&self.rho)
    }

    /// The three displayed identities following the definitions of `q0`, `p0`.
    pub fn identity_checks(&self) -> Vec<IdentityCheck> {
        let a = self.alpha;
        let nn = Rational::from_integer(self.dim as i128);
        let four_n = Rational::from_integer(4) / nn;
        let ir = self.inv_rho();
        let lead = (a + 2) / ((a + 1) * 2);
        let gap = Rational::from_integer(8) - (nn - 8) * a;

        let lhs1 = lead - (a + 1) * (ir - four_n) - ir;
        let lhs2 = lead - (a + 1) * ir - ir;
        let lhs3 = inv(&self.p0) - ir + four_n;
        vec![
            IdentityCheck {
                name: "upper_embedding_gap",
                lhs: lhs1,
                printed_rhs: gap / ((a + 1) * 2),
                exact_rhs: gap / ((a + 1) * 2 * nn),
                printed_holds: lhs1 == gap / ((a + 1) * 2),
                sign_holds: !lhs1.is_negative(),
            },
            IdentityCheck {
                name: "lower_embedding_gap",
                lhs: lhs2,
                printed_rhs: -(a * 4) / nn,
                exact_rhs: -a / ((a + 1) * 2) - (a * 4) / nn,
                printed_holds: lhs2 == -(a * 4) / nn,
                sign_holds: lhs2 < Rational::zero(),
            },
            IdentityCheck {
                name: "p0_embedding_gap",
                lhs: lhs3,
                printed_rhs: gap / ((a + 1) * 2 * nn),
                exact_rhs: gap / ((a + 1) * 2 * nn),
                printed_holds: lhs3 == gap / ((a + 1) * 2 * nn),
                sign_holds: !lhs3.is_negative(),
            },
        ]
    }

    /// `1/ρ ≥ 1/q0 ≥ 1/ρ − 4/N` and `1/ρ > 1/p0 ≥ 1/ρ − 4/N`.
    pub fn embedding_chain_holds(&self) -> bool {
        let ir = self.inv_rho();
        let low = ir - Rational::from_integer(4) / Rational::from_integer(self.dim as i128);
        let iq = inv(&self.q0);
        let ip = inv(&self.p0);
        ir >= iq && iq >= low && ir > ip && ip >= low
    }

    /// The pair `(γ, ρ)` as an [`AdmissiblePair`].
    pub fn main_pair(&self) -> AdmissiblePair {
        AdmissiblePair {
            q: self.gamma,
            r: self.rho,
            dim: self.dim,
        }
    }

    /// Whether `(α+2)/(2(α+1)) = (α+1)/q0 + 1/ρ` and
    /// `1/ρ = α/(2(α+1)) + 1/p0` hold exactly.
    pub fn defining_equations_hold(&self) -> bool {
        let a = self.alpha;
        let ir = self.inv_rho();
        (a + 2) / ((a + 1) * 2) == (a + 1) * inv(&self.q0) + ir
            && ir == a / ((a + 1) * 2) + inv(&self.p0)
    }
}

/// Exponents of the blow-up alternative norm at the critical power.
///
/// The returned pair is the Sobolev image of `(γ, ρ)` at `α = 8/(N−8)` and
/// satisfies `4/q + N/r = (N−8)/2`; it is returned unvalidated.
pub fn critical_pair(n: u32) -> Result<AdmissiblePair> {
    if n < 9 {
        return Err(Error::Regime(format!("dimension must be at least 9, got {n}")));
    }
    let nn = n as i128;
    Ok(AdmissiblePair {
        q: ExtRational::new(2 * nn - 8, nn - 8),
        r: ExtRational::new(2 * nn * (nn - 4), (nn - 8) * (nn - 8)),
        dim: n,
    })
}

/// The pair `(16(α+1)/(Nα), 4(α+1)/(α+2))`, admissible in every dimension.
pub fn subcritical_aux_pair(alpha: Rational, n: u32) -> Result<AdmissiblePair> {
    if !alpha.is_positive() {
        return Err(Error::Regime(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::Regime("dimension must be positive".into()));
    }
    let nn = Rational::from_integer(n as i128);
    let pair = AdmissiblePair {
        q: ExtRational::Finite((alpha + 1) * 16 / (nn * alpha)),
        r: ExtRational::Finite((alpha + 1) * 4 / (alpha + 2)),
        dim: n,
    };
    if !pair.is_admissible() {
        return Err(Error::Regime(format!(
            "auxiliary pair ({}, {}) is not admissible for N = {n}",
            pair.q, pair.r
        )));
    }
    Ok(pair)
}

/// The auxiliary pair with the time exponent `16(α+1)/α` exactly as usually
/// quoted, without the `1/N` factor. Only admissible when `N = 1`.
pub fn aux_pair_as_printed(alpha: Rational, n: u32) -> AdmissiblePair {
    AdmissiblePair {
        q: ExtRational::Finite((alpha + 1) * 16 / alpha),
        r: ExtRational::Finite((alpha + 1) * 4 / (alpha + 2)),
        dim: n,
    }
}

/// `(q_ε, r_ε) = (8(2+ε)/(Nε), 2+ε)`.
pub fn epsilon_pair(eps: Rational, n: u32, alpha: Rational) -> Result<AdmissiblePair> {
    if !eps.is_positive() || !alpha.is_positive() || n == 0 {
        return Err(Error::Regime("epsilon, alpha and N must be positive".into()));
    }
    if (Rational::from_integer(2) - alpha) * eps > alpha * 2 || eps >= alpha * 2 {
        return Err(Error::Regime(format!(
            "epsilon = {eps} violates (2-α)ε ≤ 2α, ε < 2α for α = {alpha}"
        )));
    }
    let nn = Rational::from_integer(n as i128);
    let r = eps + 2;
    Ok(AdmissiblePair {
        q: ExtRational::Finite(r * 8 / (nn * eps)),
        r: ExtRational::Finite(r),
        dim: n,
    })
}
