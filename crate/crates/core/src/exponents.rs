//! Parameter validation and the exponent formulas, in exact rational
//! arithmetic.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses `"3/2"`, `"-4"`, `"0.125"` or `"1.5e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse {text:?} as a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(BigInt::from_str(&all).map_err(|_| bad())?);
    let shift = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if shift >= 0 {
        value *= num_traits::pow(ten, shift as usize);
    } else {
        value /= num_traits::pow(ten, (-shift) as usize);
    }
    Ok(if neg { -value } else { value })
}

/// Rational with the same shortest decimal representation as `x`, so that
/// `0.1` becomes `1/10` rather than its binary expansion.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite value {x}")));
    }
    parse_rational(&format!("{x:e}"))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Formats as `a/b`, or `a` for integers.
pub fn format_rational(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// The scalar parameters `(n, p, q, α, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub n: u32,
    pub p: Rational,
    pub q: Rational,
    pub alpha: Rational,
    pub r: Rational,
}

impl ProblemParams {
    pub fn new(n: u32, p: Rational, q: Rational, alpha: Rational, r: Rational) -> Self {
        Self { n, p, q, alpha, r }
    }

    pub fn from_f64(n: u32, p: f64, q: f64, alpha: f64, r: f64) -> Result<Self> {
        Ok(Self {
            n,
            p: rational_from_f64(p)?,
            q: rational_from_f64(q)?,
            alpha: rational_from_f64(alpha)?,
            r: rational_from_f64(r)?,
        })
    }

    pub fn parse(n: u32, p: &str, q: &str, alpha: &str, r: &str) -> Result<Self> {
        Ok(Self {
            n,
            p: parse_rational(p)?,
            q: parse_rational(q)?,
            alpha: parse_rational(alpha)?,
            r: parse_rational(r)?,
        })
    }

    pub fn p_f64(&self) -> f64 {
        to_f64(&self.p)
    }

    pub fn q_f64(&self) -> f64 {
        to_f64(&self.q)
    }

    pub fn alpha_f64(&self) -> f64 {
        to_f64(&self.alpha)
    }

    pub fn r_f64(&self) -> f64 {
        to_f64(&self.r)
    }

    fn nn(&self) -> Rational {
        int(self.n as i64)
    }

    /// `n(p−1)/(n−αp)`, defined when `αp < n`.
    pub fn critical_r(&self) -> Option<Rational> {
        let gap = self.nn() - &self.alpha * &self.p;
        gap.is_positive()
            .then(|| self.nn() * (&self.p - int(1)) / gap)
    }

    pub fn wolff(&self) -> crate::potentials::WolffParams {
        crate::potentials::WolffParams {
            n: self.n as usize,
            alpha: self.alpha_f64(),
            p: self.p_f64(),
        }
    }
}

impl Serialize for ProblemParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ProblemParams", 5)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("p", &format_rational(&self.p))?;
        st.serialize_field("q", &format_rational(&self.q))?;
        st.serialize_field("alpha", &format_rational(&self.alpha))?;
        st.serialize_field("r", &format_rational(&self.r))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ProblemParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: u32,
            p: String,
            q: String,
            alpha: String,
            r: String,
        }
        let raw = Raw::deserialize(d)?;
        ProblemParams::parse(raw.n, &raw.p, &raw.q, &raw.alpha, &raw.r)
            .map_err(serde::de::Error::custom)
    }
}

/// The condition that puts a parameter set outside the solvable regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrivialRule {
    /// `n < 2`.
    DimensionTooSmall,
    /// `p ≤ 1`.
    PNotAboveOne,
    /// `q ≤ 0` or `q ≥ p − 1`.
    QOutOfRange,
    /// `α ≤ 0`.
    AlphaNotPositive,
    /// `αp ≥ n`: only the zero supersolution exists.
    AlphaPAtLeastN,
    /// `r ≤ 0`.
    RNotPositive,
    /// `r ≤ n(p−1)/(n−αp)`: only the zero supersolution exists.
    RAtMostCritical,
}

impl fmt::Display for TrivialRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrivialRule::DimensionTooSmall => "dimension n must be at least 2",
            TrivialRule::PNotAboveOne => "p must exceed 1",
            TrivialRule::QOutOfRange => "q must satisfy 0 < q < p - 1",
            TrivialRule::AlphaNotPositive => "alpha must be positive",
            TrivialRule::AlphaPAtLeastN => "alpha*p >= n admits only the trivial supersolution",
            TrivialRule::RNotPositive => "r must be positive",
            TrivialRule::RAtMostCritical => {
                "r <= n(p-1)/(n-alpha*p) admits only the trivial supersolution"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub solvable: bool,
    pub violated: Vec<TrivialRule>,
    pub diagnostics: Vec<String>,
}

impl Validity {
    pub fn first_violation(&self) -> Option<&TrivialRule> {
        self.violated.first()
    }
}

/// Checks `1 < p`, `0 < q < p−1`, `0 < αp < n` and `r > n(p−1)/(n−αp)`.
pub fn validate_params(pp: &ProblemParams) -> Validity {
    let mut violated = Vec::new();
    let mut diagnostics = Vec::new();
    let one = int(1);
    if pp.n < 2 {
        violated.push(TrivialRule::DimensionTooSmall);
        diagnostics.push(format!("n = {}", pp.n));
    }
    if pp.p <= one {
        violated.push(TrivialRule::PNotAboveOne);
        diagnostics.push(format!("p = {}", format_rational(&pp.p)));
    }
    if !pp.q.is_positive() || pp.q >= &pp.p - &one {
        violated.push(TrivialRule::QOutOfRange);
        diagnostics.push(format!(
            "q = {}, p - 1 = {}",
            format_rational(&pp.q),
            format_rational(&(&pp.p - &one))
        ));
    }
    if !pp.alpha.is_positive() {
        violated.push(TrivialRule::AlphaNotPositive);
        diagnostics.push(format!("alpha = {}", format_rational(&pp.alpha)));
    }
    let ap = &pp.alpha * &pp.p;
    if ap >= pp.nn() {
        violated.push(TrivialRule::AlphaPAtLeastN);
        diagnostics.push(format!("alpha*p = {} >= n = {}", format_rational(&ap), pp.n));
    }
    if !pp.r.is_positive() {
        violated.push(TrivialRule::RNotPositive);
        diagnostics.push(format!("r = {}", format_rational(&pp.r)));
    }
    if let Some(rc) = pp.critical_r() {
        if pp.p > one && pp.r <= rc {
            violated.push(TrivialRule::RAtMostCritical);
            diagnostics.push(format!(
                "r = {} <= critical r = {}",
                format_rational(&pp.r),
                format_rational(&rc)
            ));
        }
    }
    Validity {
        solvable: violated.is_empty(),
        violated,
        diagnostics,
    }
}

/// Every exponent attached to a solvable parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSet {
    /// `γ = (r(n−αp) − (p−1)n)/n`.
    pub gamma: Rational,
    /// Embedding exponent `γ/q + 1`.
    pub s_embed: Rational,
    /// `nr/(n(p−1−q) + pr)`, defined for `α = 1`.
    pub s1: Option<Rational>,
    /// `nr/(n(1−q) + 2αr)`, defined for `p = 2`.
    pub s2: Option<Rational>,
    /// `nr/(n(1−q) + 2r)`, defined for `p = 2`, `α = 1`, `n ≥ 3`.
    pub s3: Option<Rational>,
    /// `n(p−1)/(n−αp)`.
    pub r_critical: Rational,
    /// `β = (γ+q)(p−1)/(p−1−q)`.
    pub sigma_norm_exponent: Rational,
    /// `n(β+p−1)/(n(p−1) + pαβ)` with the `β` above.
    pub s_prop_wolff: Rational,
    /// `n(β'+1)/(n + 2αβ')` with `β' = (γ+q)/(1−q)`, defined for `p = 2`.
    pub s_prop_kernel: Option<Rational>,
    /// `np/(n−αp)`, the value of `r` at which `γ = 1`.
    pub r_unit_gamma: Rational,
    /// `r(p−1)/(p−1−q)`, the Lebesgue exponent of the `dx` condition.
    pub dx_exponent: Rational,
    /// `γ + q`, the exponent of the `dσ` norm of solutions.
    pub solution_sigma_exponent: Rational,
}

impl ExponentSet {
    /// `(name, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, Option<&Rational>)> {
        vec![
            ("gamma", Some(&self.gamma)),
            ("s_embed", Some(&self.s_embed)),
            ("s1", self.s1.as_ref()),
            ("s2", self.s2.as_ref()),
            ("s3", self.s3.as_ref()),
            ("r_critical", Some(&self.r_critical)),
            ("sigma_norm_exponent", Some(&self.sigma_norm_exponent)),
            ("s_prop_wolff", Some(&self.s_prop_wolff)),
            ("s_prop_kernel", self.s_prop_kernel.as_ref()),
            ("r_unit_gamma", Some(&self.r_unit_gamma)),
            ("dx_exponent", Some(&self.dx_exponent)),
            ("solution_sigma_exponent", Some(&self.solution_sigma_exponent)),
        ]
    }
}

#[derive(Serialize)]
struct ExactValue {
    exact: String,
    value: f64,
}

impl Serialize for ExponentSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let entries = self.entries();
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (name, v) in entries {
            let v = v.map(|v| ExactValue {
                exact: format_rational(v),
                value: to_f64(v),
            });
            map.serialize_entry(name, &v)?;
        }
        map.end()
    }
}

pub fn derive_exponents(pp: &ProblemParams) -> Result<ExponentSet> {
    let v = validate_params(pp);
    if let Some(rule) = v.first_violation() {
        return Err(Error::TrivialRegime(rule.clone()));
    }
    let one = int(1);
    let two = int(2);
    let n = pp.nn();
    let (p, q, a, r) = (&pp.p, &pp.q, &pp.alpha, &pp.r);
    let pm1 = p - &one;
    let gap = &n - a * p;
    let gamma = (r * &gap - &pm1 * &n) / &n;
    let s_embed = &gamma / q + &one;
    let s1 = (a == &one).then(|| &n * r / (&n * (&pm1 - q) + p * r));
    let s2 = (p == &two).then(|| &n * r / (&n * (&one - q) + &two * a * r));
    let s3 = (p == &two && a == &one && pp.n >= 3).then(|| &n * r / (&n * (&one - q) + &two * r));
    let beta = (&gamma + q) * &pm1 / (&pm1 - q);
    let s_prop_wolff = &n * (&beta + &pm1) / (&n * &pm1 + p * a * &beta);
    let s_prop_kernel = (p == &two).then(|| {
        let b = (&gamma + q) / (&one - q);
        &n * (&b + &one) / (&n + &two * a * &b)
    });
    Ok(ExponentSet {
        r_critical: &n * &pm1 / &gap,
        r_unit_gamma: &n * p / &gap,
        dx_exponent: r * &pm1 / (&pm1 - q),
        solution_sigma_exponent: &gamma + q,
        gamma,
        s_embed,
        s1,
        s2,
        s3,
        sigma_norm_exponent: beta,
        s_prop_wolff,
        s_prop_kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(q("3/2"), Rational::new(3.into(), 2.into()));
        assert_eq!(q("0.125"), Rational::new(1.into(), 8.into()));
        assert_eq!(q("-4"), int(-4));
        assert_eq!(q("1.5e-3"), Rational::new(3.into(), 2000.into()));
        assert_eq!(q("2E2"), int(200));
        assert_eq!(rational_from_f64(0.1).unwrap(), Rational::new(1.into(), 10.into()));
        for bad in ["", "x", "1/0", "1.2.3", "--1", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn reference_scenario_is_solvable() {
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "6").unwrap();
        assert!(validate_params(&pp).solvable);
        let e = derive_exponents(&pp).unwrap();
        assert_eq!(e.gamma, int(1));
        assert_eq!(e.s_embed, int(3));
        let four_thirds = Rational::new(4.into(), 3.into());
        assert_eq!(e.s1.as_ref(), Some(&four_thirds));
        assert_eq!(e.s2.as_ref(), Some(&four_thirds));
        assert_eq!(e.s3.as_ref(), Some(&four_thirds));
        assert_eq!(e.s_prop_wolff, four_thirds);
        assert_eq!(e.s_prop_kernel, Some(four_thirds));
        assert_eq!(e.r_critical, int(3));
        assert_eq!(e.r_unit_gamma, int(6));
        assert_eq!(e.dx_exponent, int(12));
    }

    #[test]
    fn trivial_regimes_are_named() {
        let pp = ProblemParams::parse(3, "3", "1", "1", "10").unwrap();
        let v = validate_params(&pp);
        assert!(!v.solvable);
        assert!(v.violated.contains(&TrivialRule::AlphaPAtLeastN));
        let pp = ProblemParams::parse(3, "2", "0.5", "1", "3").unwrap();
        assert_eq!(validate_params(&pp).violated, vec![TrivialRule::RAtMostCritical]);
        assert!(matches!(
            derive_exponents(&pp),
            Err(Error::TrivialRegime(TrivialRule::RAtMostCritical))
        ));
    }
}
