//! Exponent algebra and regime classification.
//!
//! Everything here is a closed-form function of `(N, q, p)`; the other
//! modules ask this one which regime they are in before doing any numerics.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance used to decide that `p` sits exactly on a critical exponent.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Hard cap on the decay-exponent iteration.
pub const DECAY_ITERATION_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub dim: usize,
    pub q: f64,
    pub p: f64,
    pub alpha: f64,
    #[serde(rename = "m")]
    pub mass: f64,
}

impl ProblemParams {
    pub fn new(dim: usize, q: f64, p: f64, alpha: f64, mass: f64) -> Result<Self> {
        let params = ProblemParams { dim, q, p, alpha, mass };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidParams("N must be at least 1".into()));
        }
        if !self.q.is_finite() || self.q <= 2.0 {
            return Err(Error::InvalidParams("q must exceed 2".into()));
        }
        if !self.p.is_finite() || self.p <= 2.0 {
            return Err(Error::InvalidParams("p must exceed 2".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidParams("alpha must be nonnegative".into()));
        }
        if !self.mass.is_finite() || self.mass <= 0.0 {
            return Err(Error::InvalidParams("m must be positive".into()));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        ProblemParams { alpha, ..*self }
    }

    pub fn with_mass(&self, mass: f64) -> Self {
        ProblemParams { mass, ..*self }
    }

    pub fn n_f64(&self) -> f64 {
        self.dim as f64
    }

    /// `p·δ_p = N(p−2)/2`, the dilation exponent of `‖u‖_p^p`.
    pub fn p_delta_p(&self) -> f64 {
        self.n_f64() * (self.p - 2.0) / 2.0
    }

    /// `q(1+δ_q) = q + N(q−2)/2`, the dilation exponent of `‖∇u‖_q^q`.
    pub fn q_one_plus_delta_q(&self) -> f64 {
        self.q + self.n_f64() * (self.q - 2.0) / 2.0
    }

    /// Rejects anything outside the open intermediate window `p₂ < p < p_q`.
    pub fn require_intermediate(&self) -> Result<()> {
        let regime = classify_regime(self);
        if regime.kind == RegimeKind::Intermediate {
            Ok(())
        } else {
            let (p2, pq) = mass_critical_exponents(self.dim, self.q)?;
            Err(Error::Regime(format!(
                "p = {} is {} (intermediate window is {} < p < {})",
                self.p, regime.kind, p2, pq
            )))
        }
    }

    /// Rejects `p ≥ p_q`, where the energy is unbounded below on the mass sphere.
    pub fn require_coercive(&self) -> Result<()> {
        let (_, pq) = mass_critical_exponents(self.dim, self.q)?;
        if self.p < pq * (1.0 - BOUNDARY_RTOL) {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "p = {} is not below p_q = {}; energy is not coercive on the mass sphere",
                self.p, pq
            )))
        }
    }
}

/// A Sobolev-type critical exponent that may be infinite.
///
/// `Unbounded` compares greater than every finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalExponent {
    Finite(f64),
    Unbounded,
}

impl CriticalExponent {
    /// `N s / (N − s)₊`.
    pub fn sobolev(dim: usize, s: f64) -> Self {
        let n = dim as f64;
        if s >= n {
            CriticalExponent::Unbounded
        } else {
            CriticalExponent::Finite(n * s / (n - s))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, CriticalExponent::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            CriticalExponent::Finite(v) => Some(*v),
            CriticalExponent::Unbounded => None,
        }
    }

    /// `1/s*`, zero for the unbounded sentinel.
    pub fn reciprocal(&self) -> f64 {
        match self {
            CriticalExponent::Finite(v) => 1.0 / v,
            CriticalExponent::Unbounded => 0.0,
        }
    }

    /// Strictly greater than `x`.
    pub fn exceeds(&self, x: f64) -> bool {
        match self {
            CriticalExponent::Finite(v) => *v > x,
            CriticalExponent::Unbounded => true,
        }
    }
}

impl PartialOrd<f64> for CriticalExponent {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        match self {
            CriticalExponent::Finite(v) => v.partial_cmp(other),
            CriticalExponent::Unbounded => Some(Ordering::Greater),
        }
    }
}

impl PartialEq<f64> for CriticalExponent {
    fn eq(&self, other: &f64) -> bool {
        matches!(self, CriticalExponent::Finite(v) if v == other)
    }
}

impl fmt::Display for CriticalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalExponent::Finite(v) => write!(f, "{v}"),
            CriticalExponent::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for CriticalExponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CriticalExponent::Finite(v) => serializer.serialize_f64(*v),
            CriticalExponent::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for CriticalExponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => Ok(CriticalExponent::Finite(v)),
            Repr::Tag(s) if s == "unbounded" => Ok(CriticalExponent::Unbounded),
            Repr::Tag(s) => Err(serde::de::Error::custom(format!("bad exponent tag {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub p2: f64,
    pub pq: f64,
    pub two_star: CriticalExponent,
    pub q_star: CriticalExponent,
    pub delta_p: f64,
    pub delta_q: f64,
    /// `ν_{p,2}`; `None` when `p ≥ 2*`.
    pub nu_p2: Option<f64>,
    /// `ν_{p,q}`; `None` when `p ≥ q*`.
    pub nu_pq: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Subcritical,
    MassCriticalLower,
    Intermediate,
    MassCriticalUpper,
    Supercritical,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeKind::Subcritical => "Subcritical",
            RegimeKind::MassCriticalLower => "MassCriticalLower",
            RegimeKind::Intermediate => "Intermediate",
            RegimeKind::MassCriticalUpper => "MassCriticalUpper",
            RegimeKind::Supercritical => "Supercritical",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub zero_mass_eligible: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// Both coefficients of the zero-mass Pohozaev combination are nonpositive.
    Pohozaev,
    /// Radial comparison against an explicit subsolution (`N ≤ 4`).
    RadialComparison,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateOutcome {
    Certified(CertificateKind),
    NotCertified,
}

impl CertificateOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertificateOutcome::Certified(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `a_0, a_1, …` up to and including the first term with `a_n ≥ N−2`.
    pub sequence: Vec<f64>,
    /// Number of applications of the affine map.
    pub steps: usize,
    /// First index `n` with `(p−1)·a_n ≥ N`, if it occurs before termination.
    pub branch_step: Option<usize>,
}

fn check_dim_q(dim: usize, q: f64) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidParams("N must be at least 1".into()));
    }
    if !q.is_finite() || q <= 2.0 {
        return Err(Error::InvalidParams("q must exceed 2".into()));
    }
    Ok(())
}

/// `(p₂, p_q) = (2 + 4/N, q(1 + 2/N))`.
pub fn mass_critical_exponents(dim: usize, q: f64) -> Result<(f64, f64)> {
    check_dim_q(dim, q)?;
    let n = dim as f64;
    Ok((2.0 + 4.0 / n, q * (1.0 + 2.0 / n)))
}

/// `δ_s = N(s−2)/(2s)`.
pub fn delta(dim: usize, s: f64) -> f64 {
    dim as f64 * (s - 2.0) / (2.0 * s)
}

/// Gagliardo–Nirenberg exponent `ν_{p,r} = [N r / (r(N+2) − 2N)]·(p−2)/p`.
pub fn nu(dim: usize, p: f64, r: f64) -> Result<f64> {
    let n = dim as f64;
    if r <= 2.0 * n / (n + 2.0) {
        return Err(Error::InvalidParams(format!(
            "nu_(p,r) requires r > 2N/(N+2) = {}, got r = {r}",
            2.0 * n / (n + 2.0)
        )));
    }
    if p <= 2.0 {
        return Err(Error::InvalidParams("nu_(p,r) requires p > 2".into()));
    }
    Ok(n * r / (r * (n + 2.0) - 2.0 * n) * (p - 2.0) / p)
}

pub fn gn_exponents(params: &ProblemParams) -> Result<ExponentTable> {
    params.validate()?;
    let (p2, pq) = mass_critical_exponents(params.dim, params.q)?;
    let two_star = CriticalExponent::sobolev(params.dim, 2.0);
    let q_star = CriticalExponent::sobolev(params.dim, params.q);
    let nu_p2 = if two_star.exceeds(params.p) {
        Some(nu(params.dim, params.p, 2.0)?)
    } else {
        None
    };
    let nu_pq = if q_star.exceeds(params.p) {
        Some(nu(params.dim, params.p, params.q)?)
    } else {
        None
    };
    Ok(ExponentTable {
        p2,
        pq,
        two_star,
        q_star,
        delta_p: delta(params.dim, params.p),
        delta_q: delta(params.dim, params.q),
        nu_p2,
        nu_pq,
    })
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_RTOL * b.abs().max(1.0)
}

pub fn classify_regime(params: &ProblemParams) -> Regime {
    let n = params.n_f64();
    let p2 = 2.0 + 4.0 / n;
    let pq = params.q * (1.0 + 2.0 / n);
    let p = params.p;
    let kind = if near(p, p2) {
        RegimeKind::MassCriticalLower
    } else if near(p, pq) {
        RegimeKind::MassCriticalUpper
    } else if p < p2 {
        RegimeKind::Subcritical
    } else if p < pq {
        RegimeKind::Intermediate
    } else {
        RegimeKind::Supercritical
    };
    let two_star = CriticalExponent::sobolev(params.dim, 2.0);
    let q_star = CriticalExponent::sobolev(params.dim, params.q);
    let zero_mass_eligible = params.dim >= 3 && two_star < p && q_star.exceeds(p);
    Regime { kind, zero_mass_eligible }
}

/// Analytic nonexistence certificate for nontrivial zero-mass solutions.
pub fn liouville_certificate(dim: usize, p: f64, q: f64) -> CertificateOutcome {
    let two_star = CriticalExponent::sobolev(dim, 2.0);
    let first = two_star.reciprocal() - 1.0 / p;
    let second = 1.0 / q - 1.0 / dim as f64 - 1.0 / p;
    if first <= 0.0 && second < 0.0 {
        CertificateOutcome::Certified(CertificateKind::Pohozaev)
    } else if dim <= 4 {
        CertificateOutcome::Certified(CertificateKind::RadialComparison)
    } else {
        CertificateOutcome::NotCertified
    }
}

/// Iterates `a_{n+1} = (p−1)a_n − 2` from `a_0 = (N−2)/2` until `a_n ≥ N−2`.
///
/// The step at which `(p−1)a_n ≥ N` first holds is recorded in `branch_step`.
pub fn decay_iteration(dim: usize, p: f64) -> Result<IterationTrace> {
    if dim < 3 {
        return Err(Error::InvalidParams("decay iteration requires N >= 3".into()));
    }
    let n = dim as f64;
    let two_star = 2.0 * n / (n - 2.0);
    if !(p > two_star) {
        return Err(Error::InvalidParams(format!(
            "decay iteration requires p > 2* = {two_star}, got p = {p}"
        )));
    }
    let target = n - 2.0;
    let mut a = (n - 2.0) / 2.0;
    let mut sequence = vec![a];
    let mut branch_step = None;
    for step in 0..=DECAY_ITERATION_CAP {
        if branch_step.is_none() && (p - 1.0) * a >= n {
            branch_step = Some(step);
        }
        if a >= target {
            return Ok(IterationTrace { sequence, steps: step, branch_step });
        }
        a = (p - 1.0) * a - 2.0;
        sequence.push(a);
    }
    Err(Error::IterationLimit(format!(
        "decay iteration did not reach N-2 within {DECAY_ITERATION_CAP} steps"
    )))
}
