//! Generalized entropies on the probability simplex (and on the unit box).
//!
//! Every entropy here is concave, symmetric and vanishes at the vertices of the
//! simplex. Shannon and Tsallis entropies are *separable*: they are sums of a
//! scalar generator `h` applied to each coordinate, which is what makes the
//! root-finding prediction solver applicable. Norm, squared-norm and Rényi
//! entropies are not, and go through projected gradient instead.
//!
//! Adding a family means adding a [`Family`] variant plus its value, gradient
//! and (if separable) generator; nothing downstream dispatches on anything but
//! these methods.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FyError, Result};

/// Tolerance on `|sum(p) - 1|` for simplex membership.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Entries down to `-NONNEG_TOL` still count as nonnegative.
pub const NONNEG_TOL: f64 = 1e-12;
/// Inputs to `h'^{-1}` this far outside `[h'(1), h'(0)]` are clamped silently.
pub const INVERSE_CLAMP_TOL: f64 = 1e-12;

/// A real number or `+inf`, kept apart so that an infinite derivative or margin
/// is an explicit branch instead of a float overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    /// Lossy conversion, `+inf` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::PosInfinity) => Some(Ordering::Less),
            (Extended::PosInfinity, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::PosInfinity, Extended::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => write!(f, "+inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Extended::Finite(v)),
            Repr::Str(s) if s == "+inf" || s == "inf" => Ok(Extended::PosInfinity),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad extended real {s:?}"))),
        }
    }
}

/// Where a prediction lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Simplex,
    /// `[0,1]^d`, one binary problem per coordinate.
    Box,
    FullSpace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Shannon,
    Tsallis { alpha: f64 },
    Norm { q: f64 },
    SquaredNorm { q: f64 },
    Renyi { beta: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Shannon => "shannon",
            Family::Tsallis { .. } => "tsallis",
            Family::Norm { .. } => "norm",
            Family::SquaredNorm { .. } => "squared_norm",
            Family::Renyi { .. } => "renyi",
        }
    }
}

/// An immutable, validated generalized entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntropySpec", into = "RawEntropySpec")]
pub struct EntropySpec {
    family: Family,
    domain: Domain,
}

impl EntropySpec {
    pub fn shannon() -> Self {
        EntropySpec {
            family: Family::Shannon,
            domain: Domain::Simplex,
        }
    }

    /// Tsallis entropy with normalization constant `k = 1/alpha`.
    pub fn tsallis(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(FyError::InvalidParameter(format!(
                "tsallis alpha must be finite and > 1, got {alpha}"
            )));
        }
        Ok(EntropySpec {
            family: Family::Tsallis { alpha },
            domain: Domain::Simplex,
        })
    }

    pub fn norm(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(EntropySpec {
            family: Family::Norm { q },
            domain: Domain::Simplex,
        })
    }

    pub fn squared_norm(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(EntropySpec {
            family: Family::SquaredNorm { q },
            domain: Domain::Simplex,
        })
    }

    /// Rényi entropy for `beta` in `(0, 1]`; `beta = 1` is Shannon.
    pub fn renyi(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(FyError::InvalidParameter(format!(
                "renyi beta must lie in (0, 1], got {beta}"
            )));
        }
        if beta == 1.0 {
            return Ok(Self::shannon());
        }
        Ok(EntropySpec {
            family: Family::Renyi { beta },
            domain: Domain::Simplex,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain == Domain::FullSpace {
            return Err(FyError::InvalidParameter(
                "entropies are defined on the simplex or the box, not the full space".into(),
            ));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.family, Family::Shannon | Family::Tsallis { .. })
    }

    /// `H(p)`.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        check_membership(p, self.domain)?;
        Ok(match self.domain {
            Domain::Box => p
                .iter()
                .map(|&pi| {
                    let pi = pi.clamp(0.0, 1.0);
                    self.simplex_value(&[pi, 1.0 - pi])
                })
                .sum(),
            _ => self.simplex_value(p),
        })
    }

    /// Entropy of a simplex point, no membership check.
    pub(crate) fn simplex_value(&self, p: &[f64]) -> f64 {
        match self.family {
            Family::Shannon => p.iter().map(|&t| neg_xlogx(t)).sum(),
            Family::Tsallis { alpha } => p.iter().map(|&t| tsallis_h(alpha, t)).sum(),
            Family::Norm { q } => 1.0 - q_norm(p, q),
            Family::SquaredNorm { q } => {
                let n = q_norm(p, q);
                0.5 * (1.0 - n * n)
            }
            Family::Renyi { beta } => {
                let s: f64 = p.iter().map(|&t| pow0(t.max(0.0), beta)).sum();
                s.ln() / (1.0 - beta)
            }
        }
    }

    /// Scalar generator `h(t)` of a separable entropy.
    pub fn h(&self, t: f64) -> Result<f64> {
        self.require_separable()?;
        check_unit(t)?;
        Ok(match self.family {
            Family::Shannon => neg_xlogx(t),
            Family::Tsallis { alpha } => tsallis_h(alpha, t),
            _ => unreachable!(),
        })
    }

    /// `h'(t)`; `+inf` for Shannon at `t = 0`.
    pub fn h_prime(&self, t: f64) -> Result<Extended> {
        self.require_separable()?;
        check_unit(t)?;
        Ok(self.h_prime_unchecked(t))
    }

    pub(crate) fn h_prime_unchecked(&self, t: f64) -> Extended {
        match self.family {
            Family::Shannon => {
                if t <= 0.0 {
                    Extended::PosInfinity
                } else {
                    Extended::Finite(-t.ln() - 1.0)
                }
            }
            Family::Tsallis { alpha } => Extended::Finite(tsallis_h_prime(alpha, t)),
            _ => unreachable!("h' requested for a non-separable family"),
        }
    }

    /// Inverse of `h'` on `[h'(1), h'(0)]`.
    pub fn h_prime_inverse(&self, u: f64) -> Result<f64> {
        self.require_separable()?;
        let lo = self.h_prime_unchecked(1.0).to_f64();
        let hi = self.h_prime_unchecked(0.0).to_f64();
        if !(u >= lo - INVERSE_CLAMP_TOL && u <= hi + INVERSE_CLAMP_TOL) {
            return Err(FyError::OutOfRange { value: u, lo, hi });
        }
        Ok(self.h_prime_inverse_clamped(u))
    }

    /// `h'^{-1}` with the argument clamped to `[h'(1), h'(0)]`. The endpoints
    /// map to exactly 1 and exactly 0.
    pub(crate) fn h_prime_inverse_clamped(&self, u: f64) -> f64 {
        match self.family {
            Family::Shannon => {
                if u <= -1.0 {
                    1.0
                } else {
                    (-1.0 - u).exp()
                }
            }
            Family::Tsallis { alpha } => {
                let am1 = alpha - 1.0;
                let hi = 1.0 / (alpha * am1);
                let lo = -1.0 / alpha;
                if u >= hi {
                    0.0
                } else if u <= lo {
                    1.0
                } else {
                    let base = (1.0 - alpha * am1 * u) / alpha;
                    base.max(0.0).powf(1.0 / am1).min(1.0)
                }
            }
            _ => unreachable!("h'^-1 requested for a non-separable family"),
        }
    }

    /// `∇H(p)`.
    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_membership(p, self.domain)?;
        match self.domain {
            Domain::Box => p
                .iter()
                .enumerate()
                .map(|(i, &pi)| {
                    let pi = pi.clamp(0.0, 1.0);
                    let g = self
                        .simplex_gradient(&[pi, 1.0 - pi])
                        .map_err(|_| FyError::BoundaryGradientUndefined { index: i })?;
                    Ok(g[0] - g[1])
                })
                .collect(),
            _ => self.simplex_gradient(p),
        }
    }

    pub(crate) fn simplex_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        if self.has_infinite_boundary_gradient() {
            if let Some(index) = p.iter().position(|&t| t <= 0.0) {
                return Err(FyError::BoundaryGradientUndefined { index });
            }
        }
        Ok(self.simplex_gradient_floored(p, 0.0))
    }

    /// Gradient with coordinates raised to at least `floor` wherever the exact
    /// gradient diverges at zero. With `floor = 0` the caller must have ruled
    /// out zero coordinates for Shannon and Rényi.
    pub(crate) fn simplex_gradient_floored(&self, p: &[f64], floor: f64) -> Vec<f64> {
        match self.family {
            Family::Shannon => p.iter().map(|&t| -t.max(floor).ln() - 1.0).collect(),
            Family::Tsallis { alpha } => p
                .iter()
                .map(|&t| tsallis_h_prime(alpha, t.clamp(0.0, 1.0)))
                .collect(),
            Family::Norm { q } => {
                let n = q_norm(p, q);
                p.iter().map(|&t| -pow0(t.max(0.0) / n, q - 1.0)).collect()
            }
            Family::SquaredNorm { q } => {
                let n = q_norm(p, q);
                let c = n.powf(2.0 - q);
                p.iter().map(|&t| -c * pow0(t.max(0.0), q - 1.0)).collect()
            }
            Family::Renyi { beta } => {
                let s: f64 = p.iter().map(|&t| pow0(t.max(0.0), beta)).sum();
                let c = beta / ((1.0 - beta) * s);
                p.iter()
                    .map(|&t| c * t.max(floor).powf(beta - 1.0))
                    .collect()
            }
        }
    }

    /// True when `∇H` blows up at the boundary of the simplex.
    pub fn has_infinite_boundary_gradient(&self) -> bool {
        matches!(self.family, Family::Shannon | Family::Renyi { .. })
    }

    fn require_separable(&self) -> Result<()> {
        if self.is_separable() {
            Ok(())
        } else {
            Err(FyError::NotSeparable(self.family.name()))
        }
    }
}

impl fmt::Display for EntropySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Shannon => write!(f, "shannon"),
            Family::Tsallis { alpha } => write!(f, "tsallis(alpha={alpha})"),
            Family::Norm { q } => write!(f, "norm(q={q})"),
            Family::SquaredNorm { q } => write!(f, "squared_norm(q={q})"),
            Family::Renyi { beta } => write!(f, "renyi(beta={beta})"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntropySpec {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<Domain>,
}

impl TryFrom<RawEntropySpec> for EntropySpec {
    type Error = FyError;

    fn try_from(raw: RawEntropySpec) -> Result<Self> {
        let keys = [
            ("alpha", raw.alpha.is_some()),
            ("q", raw.q.is_some()),
            ("beta", raw.beta.is_some()),
        ];
        let allowed: &[&str] = match raw.family.as_str() {
            "shannon" => &[],
            "tsallis" => &["alpha"],
            "norm" | "squared_norm" => &["q"],
            "renyi" => &["beta"],
            other => {
                return Err(FyError::InvalidParameter(format!(
                    "unknown entropy family {other:?}"
                )))
            }
        };
        for (key, present) in keys {
            if present && !allowed.contains(&key) {
                return Err(FyError::InvalidParameter(format!(
                    "key {key:?} does not apply to family {:?}",
                    raw.family
                )));
            }
        }
        let missing = |k: &str| FyError::InvalidParameter(format!("missing key {k:?}"));
        let spec = match raw.family.as_str() {
            "shannon" => EntropySpec::shannon(),
            "tsallis" => EntropySpec::tsallis(raw.alpha.ok_or_else(|| missing("alpha"))?)?,
            "norm" => EntropySpec::norm(raw.q.ok_or_else(|| missing("q"))?)?,
            "squared_norm" => EntropySpec::squared_norm(raw.q.ok_or_else(|| missing("q"))?)?,
            "renyi" => EntropySpec::renyi(raw.beta.ok_or_else(|| missing("beta"))?)?,
            _ => unreachable!(),
        };
        spec.with_domain(raw.domain.unwrap_or_default())
    }
}

impl From<EntropySpec> for RawEntropySpec {
    fn from(spec: EntropySpec) -> Self {
        let (alpha, q, beta) = match spec.family {
            Family::Shannon => (None, None, None),
            Family::Tsallis { alpha } => (Some(alpha), None, None),
            Family::Norm { q } | Family::SquaredNorm { q } => (None, Some(q), None),
            Family::Renyi { beta } => (None, None, Some(beta)),
        };
        RawEntropySpec {
            family: spec.family.name().to_string(),
            alpha,
            q,
            beta,
            domain: (spec.domain != Domain::Simplex).then_some(spec.domain),
        }
    }
}

/// A point of the simplex (or of the box), validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn simplex(values: Vec<f64>) -> Result<Self> {
        check_membership(&values, Domain::Simplex)?;
        Ok(ProbabilityVector(values))
    }

    pub fn in_domain(values: Vec<f64>, domain: Domain) -> Result<Self> {
        check_membership(&values, domain)?;
        Ok(ProbabilityVector(values))
    }

    pub fn vertex(d: usize, k: usize) -> Self {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        ProbabilityVector(v)
    }

    pub fn uniform(d: usize) -> Self {
        ProbabilityVector(vec![1.0 / d as f64; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.0).count()
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ProbabilityVector(values)
    }
}

impl std::ops::Deref for ProbabilityVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Unnormalized, finite model scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FyError::InvalidParameter("empty score vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FyError::InvalidParameter(format!(
                "score {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(ScoreVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks simplex or box membership at the crate tolerances.
pub fn check_membership(p: &[f64], domain: Domain) -> Result<()> {
    if p.is_empty() {
        return Err(FyError::DomainViolation("empty vector".into()));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(FyError::DomainViolation(format!("entry {i} is not finite")));
    }
    match domain {
        Domain::Simplex => {
            if let Some(i) = p.iter().position(|&v| v < -NONNEG_TOL) {
                return Err(FyError::DomainViolation(format!(
                    "entry {i} is negative ({})",
                    p[i]
                )));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
                return Err(FyError::DomainViolation(format!(
                    "entries sum to {s}, not 1"
                )));
            }
        }
        Domain::Box => {
            if let Some(i) = p
                .iter()
                .position(|&v| v < -NONNEG_TOL || v > 1.0 + NONNEG_TOL)
            {
                return Err(FyError::DomainViolation(format!(
                    "entry {i} outside [0, 1] ({})",
                    p[i]
                )));
            }
        }
        Domain::FullSpace => {}
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q > 1.0 {
        Ok(())
    } else {
        Err(FyError::InvalidParameter(format!(
            "q must be finite and > 1, got {q}"
        )))
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(FyError::OutOfRange {
            value: t,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// `-t ln t` with `0 ln 0 = 0`.
pub(crate) fn neg_xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -t * t.ln()
    }
}

pub(crate) fn tsallis_h(alpha: f64, t: f64) -> f64 {
    let t = t.max(0.0);
    (t - t.powf(alpha)) / (alpha * (alpha - 1.0))
}

pub(crate) fn tsallis_h_prime(alpha: f64, t: f64) -> f64 {
    (1.0 - alpha * pow0(t, alpha - 1.0)) / (alpha * (alpha - 1.0))
}

/// `t^e` for `t >= 0`, with `0^e = 0` for `e > 0`.
fn pow0(t: f64, e: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t.powf(e)
    }
}

pub(crate) fn q_norm(p: &[f64], q: f64) -> f64 {
    // scale by the max entry so large q does not underflow
    let m = p.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = p.iter().map(|&t| pow0(t.abs() / m, q)).sum();
    m * s.powf(1.0 / q)
}
