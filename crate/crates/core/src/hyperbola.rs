//! Exponent arithmetic on the critical hyperbola 1/(p+1) + 1/(q+1) = (N-2)/N,
//! the admissible existence regimes, and the far-field decay rates of the
//! ground state.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedSub, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for float comparisons against regime boundaries and the
/// hyperbola identity.
pub const BOUNDARY_TOL: f64 = 1e-12;

type Rational = Ratio<i128>;

/// An exponent, kept as an exact rational whenever the input allowed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    value: f64,
    exact: Option<Rational>,
}

impl Exponent {
    pub fn from_f64(value: f64) -> Self {
        Self { value, exact: None }
    }

    /// Exact rational `num/den`.
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidExponent(format!("{num}/{den}")));
        }
        Ok(Self::from_ratio(Rational::new(num as i128, den as i128)))
    }

    fn from_ratio(r: Rational) -> Self {
        let value = r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
        Self {
            value,
            exact: Some(r),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Reduced numerator and denominator when exact.
    pub fn as_fraction(&self) -> Option<(i128, i128)> {
        self.exact.map(|r| (*r.numer(), *r.denom()))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `a/b`, plain decimals (`1.5`, `-2`, `.25`) parsed exactly, and
    /// anything else `f64` understands (scientific notation) as inexact.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidExponent(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Self::from_ratio(Rational::new(n, d)));
        }
        if let Some(r) = parse_decimal(s) {
            return Ok(Self::from_ratio(r));
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if !v.is_finite() {
            return Err(bad());
        }
        Ok(Self::from_f64(v))
    }
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    if frac.len() > 18 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mut numer: i128 = digits.parse().ok()?;
    if neg {
        numer = -numer;
    }
    let denom = 10i128.checked_pow(frac.len() as u32)?;
    Some(Rational::new(numer, denom))
}

/// Existence regime tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    I,
    II,
    III,
    Unsupported,
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeTag::I => "I",
            RegimeTag::II => "II",
            RegimeTag::III => "III",
            RegimeTag::Unsupported => "Unsupported",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// Dimension floor of the exponent range `p` falls in. `None` only at the
    /// logarithmic point p = N/(N-2), which belongs to no range.
    pub minimum_dimension: Option<u32>,
}

/// Power-law decay exponents of the ground state at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub v_rate: f64,
    pub u_rate: f64,
    /// U carries an extra `log r` factor (only at p = N/(N-2)).
    pub u_log_flag: bool,
    pub dv_rate: f64,
    pub du_rate: f64,
    pub d2v_rate: f64,
    pub d2u_rate: f64,
}

/// Where `p` sits relative to the boundary value `N/(N-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBoundary {
    Below,
    At,
    Above,
}

/// A validated triple (p, q, N) on the critical hyperbola with
/// 1 < p <= (N+2)/(N-2) <= q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr", into = "PointRepr")]
pub struct HyperbolaPoint {
    p: Exponent,
    q: Exponent,
    n: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRepr {
    p: String,
    q: String,
    #[serde(rename = "N")]
    n: u32,
}

impl From<HyperbolaPoint> for PointRepr {
    fn from(pt: HyperbolaPoint) -> Self {
        Self {
            p: pt.p.to_string(),
            q: pt.q.to_string(),
            n: pt.n,
        }
    }
}

impl TryFrom<PointRepr> for HyperbolaPoint {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        HyperbolaPoint::new(r.p.parse()?, r.q.parse()?, r.n)
    }
}

impl HyperbolaPoint {
    /// Builds the point from `p` and `N`, deriving `q`.
    pub fn from_p(p: Exponent, n: u32) -> Result<Self> {
        let q = q_from_p(p, n)?;
        Self::new(p, q, n)
    }

    /// Validates an explicit triple.
    pub fn new(p: Exponent, q: Exponent, n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::NotOnHyperbola(format!("N = {n} < 3")));
        }
        let nf = n as f64;
        let (pv, qv) = (p.value(), q.value());
        let lhs = 1.0 / (pv + 1.0) + 1.0 / (qv + 1.0);
        let rhs = (nf - 2.0) / nf;
        if (lhs - rhs).abs() > BOUNDARY_TOL {
            return Err(Error::NotOnHyperbola(format!(
                "1/(p+1) + 1/(q+1) = {lhs} != (N-2)/N = {rhs}"
            )));
        }
        if pv <= 1.0 {
            return Err(Error::NotOnHyperbola(format!("p = {pv} <= 1")));
        }
        let crit = (nf + 2.0) / (nf - 2.0);
        if compare(p, crit_ratio(n, 2), crit) == std::cmp::Ordering::Greater {
            return Err(Error::NotOnHyperbola(format!("p = {pv} > (N+2)/(N-2) = {crit}")));
        }
        if compare(q, crit_ratio(n, 2), crit) == std::cmp::Ordering::Less {
            return Err(Error::NotOnHyperbola(format!("q = {qv} < (N+2)/(N-2) = {crit}")));
        }
        if pv <= 2.0 / (nf - 2.0) {
            return Err(Error::NotOnHyperbola(format!("p = {pv} <= 2/(N-2)")));
        }
        Ok(Self { p, q, n })
    }

    pub fn p(&self) -> f64 {
        self.p.value()
    }

    pub fn q(&self) -> f64 {
        self.q.value()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p_exponent(&self) -> Exponent {
        self.p
    }

    pub fn q_exponent(&self) -> Exponent {
        self.q
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// True when p = q = (N+2)/(N-2).
    pub fn is_scalar(&self) -> bool {
        compare(self.p, crit_ratio(self.n, 2), self.critical_exponent()) == std::cmp::Ordering::Equal
    }

    pub fn critical_exponent(&self) -> f64 {
        (self.dim() + 2.0) / (self.dim() - 2.0)
    }

    /// Position of p relative to N/(N-2).
    pub fn log_boundary(&self) -> LogBoundary {
        let b = self.dim() / (self.dim() - 2.0);
        match compare(self.p, crit_ratio(self.n, 0), b) {
            std::cmp::Ordering::Less => LogBoundary::Below,
            std::cmp::Ordering::Equal => LogBoundary::At,
            std::cmp::Ordering::Greater => LogBoundary::Above,
        }
    }

    pub fn regime(&self) -> Regime {
        classify(self)
    }

    pub fn decay_rates(&self) -> DecayRates {
        rates(self)
    }
}

/// (N + offset)/(N - 2) as a rational.
fn crit_ratio(n: u32, offset: i128) -> Rational {
    Rational::new(n as i128 + offset, n as i128 - 2)
}

/// Exact comparison when `x` is rational, else a `BOUNDARY_TOL` band.
fn compare(x: Exponent, exact: Rational, approx: f64) -> std::cmp::Ordering {
    match x.exact {
        Some(r) => r.cmp(&exact),
        None => {
            let d = x.value() - approx;
            if d.abs() <= BOUNDARY_TOL {
                std::cmp::Ordering::Equal
            } else if d < 0.0 {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        }
    }
}

/// Solves 1/(q+1) = (N-2)/N - 1/(p+1) for q.
pub fn q_from_p(p: Exponent, n: u32) -> Result<Exponent> {
    if n < 3 {
        return Err(Error::NotOnHyperbola(format!("N = {n} < 3")));
    }
    if p.value() <= 1.0 {
        return Err(Error::NotOnHyperbola(format!("p = {} <= 1", p.value())));
    }
    let nf = n as f64;
    let q = match p.exact.and_then(|r| exact_q(r, n)) {
        Some(Ok(q)) => q,
        Some(Err(e)) => return Err(e),
        None => {
            let inv = (nf - 2.0) / nf - 1.0 / (p.value() + 1.0);
            if inv <= 0.0 {
                return Err(Error::NotOnHyperbola(format!(
                    "(N-2)/N - 1/(p+1) = {inv} <= 0 for p = {}",
                    p.value()
                )));
            }
            Exponent::from_f64(1.0 / inv - 1.0)
        }
    };
    if compare(q, crit_ratio(n, 2), (nf + 2.0) / (nf - 2.0)) == std::cmp::Ordering::Less {
        return Err(Error::NotOnHyperbola(format!(
            "q = {} < (N+2)/(N-2) = {}",
            q.value(),
            (nf + 2.0) / (nf - 2.0)
        )));
    }
    Ok(q)
}

/// Rational route; `None` on overflow so the caller falls back to floats.
fn exact_q(p: Rational, n: u32) -> Option<Result<Exponent>> {
    let one = Rational::from_integer(1);
    let ratio = Rational::new(n as i128 - 2, n as i128);
    let inv_p1 = one.checked_div(&p.checked_add(&one)?)?;
    let inv = ratio.checked_sub(&inv_p1)?;
    if inv <= Rational::from_integer(0) {
        return Some(Err(Error::NotOnHyperbola(format!(
            "(N-2)/N - 1/(p+1) = {inv} <= 0"
        ))));
    }
    let q = one.checked_div(&inv)?.checked_sub(&one)?;
    Some(Ok(Exponent::from_ratio(q)))
}

/// Regime classification for the pair (p, N).
pub fn classify_regime(p: Exponent, n: u32) -> Result<Regime> {
    Ok(HyperbolaPoint::from_p(p, n)?.regime())
}

fn classify(pt: &HyperbolaPoint) -> Regime {
    use std::cmp::Ordering::*;
    let n = pt.n;
    let crit = compare(pt.p, crit_ratio(n, 2), pt.critical_exponent());
    let log = pt.log_boundary();
    let (tag, floor) = match (log, crit) {
        (LogBoundary::At, _) => (RegimeTag::Unsupported, None),
        (LogBoundary::Above, Less) => (RegimeTag::I, Some(8)),
        (_, Equal) => (RegimeTag::II, Some(10)),
        (LogBoundary::Below, _) => (RegimeTag::III, Some(12)),
        (LogBoundary::Above, Greater) => (RegimeTag::Unsupported, None),
    };
    let tag = match floor {
        Some(f) if n >= f => tag,
        _ => RegimeTag::Unsupported,
    };
    Regime {
        tag,
        minimum_dimension: floor,
    }
}

/// Decay exponents of (U, V) and their first two derivatives.
pub fn decay_rates(p: Exponent, n: u32) -> Result<DecayRates> {
    Ok(HyperbolaPoint::from_p(p, n)?.decay_rates())
}

fn rates(pt: &HyperbolaPoint) -> DecayRates {
    let nf = pt.dim();
    let v_rate = 2.0 - nf;
    let (u_rate, u_log_flag) = match pt.log_boundary() {
        LogBoundary::Above => (2.0 - nf, false),
        LogBoundary::At => (2.0 - nf, true),
        LogBoundary::Below => (2.0 - (nf - 2.0) * pt.p(), false),
    };
    DecayRates {
        v_rate,
        u_rate,
        u_log_flag,
        dv_rate: v_rate - 1.0,
        du_rate: u_rate - 1.0,
        d2v_rate: v_rate - 2.0,
        d2u_rate: u_rate - 2.0,
    }
}
