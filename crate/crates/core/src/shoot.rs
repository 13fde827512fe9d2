//! Radial ODE integration and shooting.
//!
//! Radial solutions of `−Δu − Δ_q u + λu = α|u|^{p−2}u` satisfy
//!
//! ```text
//! (1 + (q−1)|u′|^{q−2}) u″ = −((N−1)/r)(1 + |u′|^{q−2}) u′ + λu − α|u|^{p−2}u
//! ```
//!
//! with `u′(0) = 0`. Trajectories are integrated with step-doubling RK4 from a
//! series start just off the origin and classified as crossing zero, turning
//! away (or blowing up), or decaying. Ground states are located by bisection
//! on `u(0)` across a change of classification.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{EnergyReport, Norms};
use crate::params::{classify_regime, ProblemParams};
use crate::radial::{unit_sphere_measure, RadialFn, RadialGrid, Spacing};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootConfig {
    pub lambda: f64,
    /// `u(0)`.
    pub u0: f64,
    pub r_max: f64,
    /// Initial step; the controller adapts it from there.
    pub h0: f64,
    /// Local error tolerance per step (relative).
    pub tol_step: f64,
    /// A trajectory with `|u| > blowup_ratio·u0` counts as blown up.
    pub blowup_ratio: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig { lambda: 1.0, u0: 1.0, r_max: 50.0, h0: 1e-4, tol_step: 1e-12, blowup_ratio: 1e6 }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.u0.is_finite() && self.u0 > 0.0) {
            return Err(Error::InvalidParams(format!("u0 must be positive, got {}", self.u0)));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::InvalidParams(format!("r_max must be positive, got {}", self.r_max)));
        }
        if !(self.h0 > 0.0 && self.tol_step > 0.0 && self.tol_step < 1.0) {
            return Err(Error::InvalidParams("h0 and tol_step must be positive, tol_step < 1".into()));
        }
        if !(self.blowup_ratio > 1.0) {
            return Err(Error::InvalidParams("blowup_ratio must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "r")]
pub enum Classification {
    /// First zero of `u`.
    Crossing(f64),
    /// Turned upward, blew up, or failed to decay by the horizon.
    Diverging(f64),
    Decaying,
}

impl Classification {
    pub fn is_crossing(&self) -> bool {
        matches!(self, Classification::Crossing(_))
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Crossing(r) => write!(f, "Crossing({r})"),
            Classification::Diverging(r) => write!(f, "Diverging({r})"),
            Classification::Decaying => f.write_str("Decaying"),
        }
    }
}

/// Accepted steps of one integration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// First integral `½u′² + ((q−1)/q)|u′|^q + (α/p)|u|^p − (λ/2)u²`.
    pub f: Vec<f64>,
    /// `∫₀^r s^{N−1} u² ds`.
    pub mass: Vec<f64>,
    /// `∫₀^r s^{N−1} (λu − α|u|^{p−2}u) ds`.
    pub source: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    fn push(&mut self, r: f64, y: &State, f: f64) {
        self.r.push(r);
        self.u.push(y[0]);
        self.v.push(y[1]);
        self.f.push(f);
        self.mass.push(y[2]);
        self.source.push(y[3]);
    }

    fn truncate_at(&mut self, len: usize) {
        self.r.truncate(len);
        self.u.truncate(len);
        self.v.truncate(len);
        self.f.truncate(len);
        self.mass.truncate(len);
        self.source.truncate(len);
    }

    /// Cubic Hermite interpolation of `(u, u′)` inside `[r_0, r_end]`; below
    /// `r_0` the series start is continued evenly.
    pub fn eval(&self, r: f64) -> Option<(f64, f64)> {
        let n = self.r.len();
        if n == 0 || r > self.r[n - 1] {
            return None;
        }
        if r <= self.r[0] {
            // u(r) ≈ u0 + c r²/2 with c = v(r₀)/r₀
            let c = if self.r[0] > 0.0 { self.v[0] / self.r[0] } else { 0.0 };
            let u0 = self.u[0] - 0.5 * c * self.r[0] * self.r[0];
            return Some((u0 + 0.5 * c * r * r, c * r));
        }
        let k = match self.r.binary_search_by(|x| x.partial_cmp(&r).expect("finite radii")) {
            Ok(k) => return Some((self.u[k], self.v[k])),
            Err(k) => k - 1,
        };
        Some(hermite(self.r[k], self.r[k + 1], self.u[k], self.u[k + 1], self.v[k], self.v[k + 1], r))
    }

    /// CSV with columns `r,u,du,F`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,u,du,F")?;
        for i in 0..self.len() {
            writeln!(out, "{:?},{:?},{:?},{:?}", self.r[i], self.u[i], self.v[i], self.f[i])?;
        }
        Ok(())
    }
}

fn hermite(r0: f64, r1: f64, u0: f64, u1: f64, v0: f64, v1: f64, r: f64) -> (f64, f64) {
    let h = r1 - r0;
    let t = (r - r0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let u = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
        + (t3 - 2.0 * t2 + t) * h * v0
        + (-2.0 * t3 + 3.0 * t2) * u1
        + (t3 - t2) * h * v1;
    let du = ((6.0 * t2 - 6.0 * t) * u0 + (-6.0 * t2 + 6.0 * t) * u1) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * v0
        + (3.0 * t2 - 2.0 * t) * v1;
    (u, du)
}

/// Analytic continuation of a resolved profile past its last trusted radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Tail {
    /// `u(R)(R/r)^{(N−1)/2} e^{−√λ (r−R)}`.
    Exponential { from: f64, value: f64, rate: f64 },
    /// `u(R)(r/R)^{slope}`.
    Power { from: f64, value: f64, slope: f64 },
}

impl Tail {
    fn eval(&self, dim: usize, r: f64) -> (f64, f64) {
        match *self {
            Tail::Exponential { from, value, rate } => {
                let k = (dim as f64 - 1.0) / 2.0;
                let u = value * (from / r).powf(k) * (-rate * (r - from)).exp();
                (u, -u * (k / r + rate))
            }
            Tail::Power { from, value, slope } => {
                let u = value * (r / from).powf(slope);
                (u, slope * u / r)
            }
        }
    }

    pub fn from(&self) -> f64 {
        match *self {
            Tail::Exponential { from, .. } | Tail::Power { from, .. } => from,
        }
    }

    /// `∫_R^∞ r^{N−1} u² dr`, `None` when it diverges.
    fn mass(&self, dim: usize) -> Option<f64> {
        let n = dim as f64;
        match *self {
            Tail::Exponential { from, value, rate } => {
                Some(value * value * from.powf(n - 1.0) / (2.0 * rate))
            }
            Tail::Power { from, value, slope } => {
                let e = 2.0 * slope + n;
                (e < 0.0).then(|| value * value * from.powf(n) / -e)
            }
        }
    }
}

/// Result of [`decay_fit`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DecayFit {
    Power { slope: f64, intercept: f64, r_lo: f64, r_hi: f64 },
    /// The local slope keeps steepening across the window.
    SuperPolynomial { r_lo: f64, r_hi: f64 },
}

impl DecayFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            DecayFit::Power { slope, .. } => Some(*slope),
            DecayFit::SuperPolynomial { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum L2Mass {
    Finite(f64),
    /// The fitted tail makes `‖u‖₂²` divergent or leaves it too close to call.
    Divergent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootResult {
    pub params: ProblemParams,
    pub lambda: f64,
    pub u0: f64,
    pub profile: Trajectory,
    pub classification: Classification,
    /// Largest increase of `F` (for `N = 1`, largest deviation) relative to
    /// `(α/p)u0^p + (λ/2)u0²`.
    pub f_drift: f64,
    /// Beyond this radius the profile is given by `tail` (if any).
    pub resolved: f64,
    pub tail: Option<Tail>,
    pub decay: Option<DecayFit>,
    pub l2_mass: Option<L2Mass>,
    pub pohozaev_residual: Option<f64>,
    /// `(αL_p − K)/m` of the grid-mapped profile, for `λ > 0`.
    pub mapped_multiplier: Option<f64>,
}

/// Serializable summary of a [`ShootResult`] (the trajectory goes to CSV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootRecord {
    pub lambda: f64,
    pub u0: f64,
    pub classification: Classification,
    pub f_drift: f64,
    pub resolved: f64,
    pub tail: Option<Tail>,
    pub decay: Option<DecayFit>,
    pub decay_slope: Option<f64>,
    pub l2_mass: Option<L2Mass>,
    pub pohozaev_residual: Option<f64>,
    pub mapped_multiplier: Option<f64>,
    pub steps: usize,
}

impl ShootResult {
    pub fn record(&self) -> ShootRecord {
        ShootRecord {
            lambda: self.lambda,
            u0: self.u0,
            classification: self.classification,
            f_drift: self.f_drift,
            resolved: self.resolved,
            tail: self.tail,
            decay: self.decay,
            decay_slope: self.decay.and_then(|d| d.slope()),
            l2_mass: self.l2_mass,
            pohozaev_residual: self.pohozaev_residual,
            mapped_multiplier: self.mapped_multiplier,
            steps: self.profile.len(),
        }
    }

    /// `u(r)`: interpolated, then continued by the tail, then zero.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.resolved {
            if let Some((u, _)) = self.profile.eval(r) {
                return u;
            }
        }
        match self.tail {
            Some(t) if r >= t.from() => t.eval(self.params.dim, r).0,
            _ => 0.0,
        }
    }

    /// Samples the profile on `grid`.
    pub fn to_grid(&self, grid: Arc<RadialGrid>) -> Result<RadialFn> {
        RadialFn::from_fn(grid, |r| self.eval(r))
    }

    /// Grid wide enough to hold the profile and its tail, used for the
    /// functional certificates.
    pub fn certificate_grid(&self) -> Result<Arc<RadialGrid>> {
        let dim = self.params.dim;
        let grid = if self.lambda > 0.0 {
            let r_max = self.resolved + 40.0 / self.lambda.sqrt();
            RadialGrid::uniform(dim, r_max, 16385)?
        } else {
            let r_max = 1e3 * self.resolved;
            let first = self.profile.r.get(1).copied().unwrap_or(self.resolved * 1e-4);
            let h0 = (self.resolved * 1e-4).min(first.max(self.resolved * 1e-6));
            let n = 16385;
            RadialGrid::new(dim, r_max, n, Spacing::Geometric(geometric_ratio(r_max, h0, n)))?
        };
        Ok(Arc::new(grid))
    }
}

/// Ratio `ρ` with `h0 (ρ^{n−1} − 1)/(ρ − 1) = r_max`.
fn geometric_ratio(r_max: f64, h0: f64, n: usize) -> f64 {
    let cells = (n - 1) as f64;
    if h0 * cells >= r_max {
        return 1.0 + 1e-12;
    }
    let total = |rho: f64| (rho.powf(cells) - 1.0) / (rho - 1.0);
    let target = r_max / h0;
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while total(hi) < target {
        hi = 1.0 + 2.0 * (hi - 1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `u″` from the radial equation at `r > 0`.
pub fn ode_rhs(r: f64, u: f64, v: f64, params: &ProblemParams, lambda: f64) -> f64 {
    let (q, p, alpha) = (params.q, params.p, params.alpha);
    let vq = v.abs().powf(q - 2.0);
    let drift = if params.dim > 1 { (params.dim as f64 - 1.0) / r * (1.0 + vq) * v } else { 0.0 };
    (-drift + lambda * u - alpha * u.abs().powf(p - 2.0) * u) / (1.0 + (q - 1.0) * vq)
}

/// First integral `F(r)`; nonincreasing along solutions, constant for `N = 1`.
pub fn first_integral(u: f64, v: f64, params: &ProblemParams, lambda: f64) -> f64 {
    let (q, p) = (params.q, params.p);
    0.5 * v * v + (q - 1.0) / q * v.abs().powf(q) + params.alpha / p * u.abs().powf(p)
        - 0.5 * lambda * u * u
}

/// `r^{N−1}(1 + |u′|^{q−2})u′`; its derivative is `r^{N−1}(λu − α|u|^{p−2}u)`.
pub fn flux(r: f64, v: f64, params: &ProblemParams) -> f64 {
    r.powi(params.dim as i32 - 1) * (1.0 + v.abs().powf(params.q - 2.0)) * v
}

type State = [f64; 4];

fn deriv(r: f64, y: &State, params: &ProblemParams, lambda: f64) -> State {
    let (u, v) = (y[0], y[1]);
    let w = r.powi(params.dim as i32 - 1);
    let force = lambda * u - params.alpha * u.abs().powf(params.p - 2.0) * u;
    [v, ode_rhs(r, u, v, params, lambda), w * u * u, w * force]
}

fn rk4(r: f64, y: &State, h: f64, params: &ProblemParams, lambda: f64) -> State {
    let add = |a: &State, b: &State, s: f64| -> State {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = deriv(r, y, params, lambda);
    let k2 = deriv(r + 0.5 * h, &add(y, &k1, 0.5 * h), params, lambda);
    let k3 = deriv(r + 0.5 * h, &add(y, &k2, 0.5 * h), params, lambda);
    let k4 = deriv(r + h, &add(y, &k3, h), params, lambda);
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Length over which a trajectory from `u0` evolves: the slower of the
/// Laplacian and q-Laplacian balances, capped by `1/√λ`.
pub fn natural_length(params: &ProblemParams, lambda: f64, u0: f64) -> f64 {
    let (q, p, alpha) = (params.q, params.p, params.alpha);
    let l2 = (alpha * u0.powf(p - 2.0)).powf(-0.5);
    let lq = (u0.powf(q - p) / alpha).powf(1.0 / q);
    let nonlinear = l2.max(lq);
    if lambda > 0.0 {
        nonlinear.min(1.0 / lambda.sqrt())
    } else {
        nonlinear
    }
}

/// Start radius and state from the series `u = u0 + u″(0) r²/2`.
fn series_start(cfg: &ShootConfig, params: &ProblemParams) -> (f64, State) {
    let n = params.n_f64();
    let u0 = cfg.u0;
    let eps = 1e-6 * cfg.r_max.min(natural_length(params, cfg.lambda, u0));
    let force = cfg.lambda * u0 - params.alpha * u0.powf(params.p - 1.0);
    let c = force / n;
    let en = eps.powi(params.dim as i32) / n;
    (eps, [u0 + 0.5 * c * eps * eps, c * eps, u0 * u0 * en, force * en])
}

const MAX_STEPS: usize = 4_000_000;

/// Integrates one trajectory and classifies it.
///
/// Stops at the first zero of `u`, at an upward turn (`λ > 0`), at blow-up, or
/// at `r_max`. Reaching `r_max` counts as decaying when `|u| < 1e−8·u0`.
pub fn shoot(cfg: &ShootConfig, params: &ProblemParams) -> Result<ShootResult> {
    cfg.validate()?;
    params.validate()?;
    let (traj, class) = integrate(cfg, params)?;
    let mut res = bare_result(cfg, params, traj, class);
    if res.classification == Classification::Decaying {
        certify(&mut res)?;
    }
    Ok(res)
}

fn bare_result(
    cfg: &ShootConfig,
    params: &ProblemParams,
    traj: Trajectory,
    class: Classification,
) -> ShootResult {
    let f_drift = f_drift(&traj, params, cfg.lambda, cfg.u0);
    let resolved = traj.end();
    ShootResult {
        params: *params,
        lambda: cfg.lambda,
        u0: cfg.u0,
        profile: traj,
        classification: class,
        f_drift,
        resolved,
        tail: None,
        decay: None,
        l2_mass: None,
        pohozaev_residual: None,
        mapped_multiplier: None,
    }
}

fn f_drift(traj: &Trajectory, params: &ProblemParams, lambda: f64, u0: f64) -> f64 {
    let scale = params.alpha / params.p * u0.powf(params.p) + 0.5 * lambda * u0 * u0;
    let Some(&f0) = traj.f.first() else { return 0.0 };
    let drift = if params.dim == 1 {
        traj.f.iter().map(|f| (f - f0).abs()).fold(0.0, f64::max)
    } else {
        let mut low = f0;
        let mut worst: f64 = 0.0;
        for &f in &traj.f {
            worst = worst.max(f - low);
            low = low.min(f);
        }
        worst
    };
    drift / scale
}

fn integrate(cfg: &ShootConfig, params: &ProblemParams) -> Result<(Trajectory, Classification)> {
    let lambda = cfg.lambda;
    let (mut r, mut y) = series_start(cfg, params);
    let mut traj = Trajectory::default();
    traj.push(r, &y, first_integral(y[0], y[1], params, lambda));
    let mut h = cfg.h0.min(natural_length(params, lambda, cfg.u0) * 1e-3).max(r);
    let cap = cfg.blowup_ratio * cfg.u0;
    for _ in 0..MAX_STEPS {
        if r >= cfg.r_max {
            let class = if y[0].abs() < 1e-8 * cfg.u0 {
                Classification::Decaying
            } else {
                Classification::Diverging(r)
            };
            return Ok((traj, class));
        }
        let step = h.min(cfg.r_max - r);
        let full = rk4(r, &y, step, params, lambda);
        let half = rk4(r, &y, 0.5 * step, params, lambda);
        let two = rk4(r + 0.5 * step, &half, 0.5 * step, params, lambda);
        let acc = ode_rhs(r, y[0], y[1], params, lambda).abs();
        let su = y[0].abs() + step * y[1].abs() + 1e-300;
        let sv = y[1].abs() + step * acc + 1e-300;
        let err = ((two[0] - full[0]).abs() / su).max((two[1] - full[1]).abs() / sv) / 15.0;
        if !err.is_finite() || err > cfg.tol_step {
            let shrink = if err.is_finite() { (0.9 * (cfg.tol_step / err).powf(0.2)).max(0.1) } else { 0.1 };
            h = step * shrink;
            if h < 1e-14 * r.max(1e-300) || h < f64::MIN_POSITIVE {
                return Err(Error::StiffRegion { r, u: y[0], v: y[1] });
            }
            continue;
        }
        // local extrapolation
        let mut next = two;
        for i in 0..4 {
            next[i] += (two[i] - full[i]) / 15.0;
        }
        let r_next = r + step;
        let grow = if err > 0.0 { (0.9 * (cfg.tol_step / err).powf(0.2)).clamp(0.2, 5.0) } else { 5.0 };
        h = step * grow;

        if next[0] <= 0.0 {
            let r_star = refine_zero(r, r_next, y[0], next[0], y[1], next[1]);
            traj.push(r_next, &next, first_integral(next[0], next[1], params, lambda));
            return Ok((traj, Classification::Crossing(r_star)));
        }
        traj.push(r_next, &next, first_integral(next[0], next[1], params, lambda));
        r = r_next;
        y = next;
        if (lambda > 0.0 && y[1] > 0.0) || y[0].abs() > cap {
            return Ok((traj, Classification::Diverging(r)));
        }
    }
    Err(Error::Numerical(format!("step limit reached at r = {r}")))
}

fn refine_zero(r0: f64, r1: f64, u0: f64, u1: f64, v0: f64, v1: f64) -> f64 {
    let (mut lo, mut hi) = (r0, r1);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hermite(r0, r1, u0, u1, v0, v1, mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Constant-step RK4 from the series start to `r_end`; returns `(u, u′)`.
pub fn integrate_fixed(cfg: &ShootConfig, params: &ProblemParams, steps: usize) -> Result<(f64, f64)> {
    cfg.validate()?;
    let (r0, mut y) = series_start(cfg, params);
    let h = (cfg.r_max - r0) / steps as f64;
    for k in 0..steps {
        y = rk4(r0 + k as f64 * h, &y, h, params, cfg.lambda);
    }
    if !(y[0].is_finite() && y[1].is_finite()) {
        return Err(Error::NonFinite { index: steps, r: cfg.r_max });
    }
    Ok((y[0], y[1]))
}

/// Least-squares slope of `ln|u|` against `ln r` over the last decade of the
/// trusted profile.
pub fn decay_fit(result: &ShootResult) -> Result<DecayFit> {
    if result.classification != Classification::Decaying {
        return Err(Error::InsufficientTail("trajectory is not decaying".into()));
    }
    fit_tail(&result.profile, result.resolved, result.u0)
}

/// Tail fit on `[r_end/10, r_end]` of a trajectory.
pub fn fit_tail(traj: &Trajectory, r_end: f64, u0: f64) -> Result<DecayFit> {
    const SAMPLES: usize = 64;
    let r_hi = r_end.min(traj.end());
    let r_lo = r_hi / 10.0;
    if traj.is_empty() || r_lo <= traj.r[0] {
        return Err(Error::InsufficientTail("less than one decade of tail".into()));
    }
    let mut pts = Vec::with_capacity(SAMPLES);
    for k in 0..SAMPLES {
        let r = r_lo * 10f64.powf(k as f64 / (SAMPLES - 1) as f64);
        let (u, _) = traj.eval(r.min(r_hi)).expect("inside trajectory");
        if !(u.abs() > 1e-12 * u0) {
            return Err(Error::InsufficientTail(format!("|u| below 1e-12·u0 at r = {r}")));
        }
        pts.push((r.ln(), u.abs().ln()));
    }
    let line = |pts: &[(f64, f64)]| -> (f64, f64) {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    };
    let (slope, intercept) = line(&pts);
    let (first, _) = line(&pts[..SAMPLES / 2]);
    let (second, _) = line(&pts[SAMPLES / 2..]);
    if (second - first).abs() > 0.5 + 0.25 * slope.abs() {
        return Ok(DecayFit::SuperPolynomial { r_lo, r_hi });
    }
    Ok(DecayFit::Power { slope, intercept, r_lo, r_hi })
}

/// Fills in the tail, decay fit, L² mass and functional certificates of a
/// resolved decaying profile.
fn certify(res: &mut ShootResult) -> Result<()> {
    let dim = res.params.dim;
    let omega = unit_sphere_measure(dim);
    let idx = res.profile.r.partition_point(|&r| r <= res.resolved);
    res.profile.truncate_at(idx.max(1));
    res.resolved = res.profile.end();
    let u_end = *res.profile.u.last().expect("nonempty profile");
    res.decay = fit_tail(&res.profile, res.resolved, res.u0).ok();
    res.tail = if res.lambda > 0.0 {
        Some(Tail::Exponential { from: res.resolved, value: u_end, rate: res.lambda.sqrt() })
    } else {
        res.decay
            .and_then(|d| d.slope())
            .map(|slope| Tail::Power { from: res.resolved, value: u_end, slope })
    };
    let inner = *res.profile.mass.last().unwrap_or(&0.0);
    res.l2_mass = Some(match res.tail.and_then(|t| t.mass(dim)) {
        Some(tail) if l2_tail_converges(&res.tail, dim) => L2Mass::Finite(omega * (inner + tail)),
        _ => L2Mass::Divergent,
    });
    let grid = res.certificate_grid()?;
    let mapped = res.to_grid(grid)?;
    let norms = Norms::of(&mapped, &res.params)?;
    let lambda = res.lambda;
    let p = norms.pohozaev(&res.params, lambda);
    let scale = norms.kinetic() + lambda.abs() * norms.mass;
    res.pohozaev_residual = Some(p.abs() / scale);
    if lambda > 0.0 {
        res.mapped_multiplier = norms.lagrange_multiplier(&res.params).ok();
    }
    Ok(())
}

/// Margin on `2·slope + N` below which a power tail counts as square integrable.
const L2_MARGIN: f64 = 0.25;

fn l2_tail_converges(tail: &Option<Tail>, dim: usize) -> bool {
    match tail {
        Some(Tail::Exponential { .. }) => true,
        Some(Tail::Power { slope, .. }) => 2.0 * slope + (dim as f64) < -L2_MARGIN,
        None => false,
    }
}

/// `‖u‖₂²` restricted to `[0, R]` for a certified profile, using the tail
/// beyond the resolved radius. `None` if the result carries no tail.
pub fn partial_mass(res: &ShootResult, big_r: f64) -> Option<f64> {
    let omega = unit_sphere_measure(res.params.dim);
    let n = res.params.n_f64();
    if big_r <= res.resolved {
        let k = res.profile.r.partition_point(|&r| r <= big_r);
        return Some(omega * res.profile.mass[k.saturating_sub(1)]);
    }
    let inner = *res.profile.mass.last()?;
    let extra = match res.tail? {
        Tail::Exponential { from, value, rate } => {
            value * value * from.powf(n - 1.0) * (1.0 - (-2.0 * rate * (big_r - from)).exp()) / (2.0 * rate)
        }
        Tail::Power { from, value, slope } => {
            let e = 2.0 * slope + n;
            if e.abs() < 1e-12 {
                value * value * from.powf(n) * (big_r / from).ln()
            } else {
                value * value * from.powf(n) * ((big_r / from).powf(e) - 1.0) / e
            }
        }
    };
    Some(omega * (inner + extra))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundStateOptions {
    pub tol_step: f64,
    pub u0_min: f64,
    pub u0_max: f64,
    pub probes_per_decade: usize,
    /// Relative width at which bisection on `u0` stops.
    pub corridor_rtol: f64,
    /// Bracket trajectories agreeing to this relative level count as resolved.
    pub separation: f64,
    /// Integration horizon in units of [`natural_length`].
    pub horizon: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tol_step: 1e-12,
            u0_min: 1e-8,
            u0_max: 1e8,
            probes_per_decade: 8,
            corridor_rtol: 1e-10,
            separation: 1e-6,
            horizon: 1e4,
        }
    }
}

/// Ground-state search outcome: the certified first corridor plus any further
/// changes of classification seen in the probe scan (not resolved).
#[derive(Clone, Debug, PartialEq)]
pub struct GroundState {
    pub result: ShootResult,
    pub bracket: (f64, f64),
    pub extra_corridors: Vec<(f64, f64)>,
}

fn probe_config(params: &ProblemParams, lambda: f64, u0: f64, opts: &GroundStateOptions) -> ShootConfig {
    let len = natural_length(params, lambda, u0);
    ShootConfig {
        lambda,
        u0,
        r_max: opts.horizon * len,
        h0: 1e-3 * len,
        tol_step: opts.tol_step,
        blowup_ratio: 1e6,
    }
}

/// Locates the positive decaying solution at multiplier `λ ≥ 0`.
///
/// Probes `u0` on a log grid, bisects the first change between crossing and
/// non-crossing trajectories, and keeps the profile up to where the two
/// bracketing trajectories still agree. For `λ > 0` the exponential tail is
/// appended; for `λ = 0` the fitted power tail is.
pub fn find_ground_state(
    params: &ProblemParams,
    lambda: f64,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    params.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 && !classify_regime(params).zero_mass_eligible {
        // the scan still runs: finding nothing is the expected outcome here
        log::warn!("zero-mass search outside N >= 3, 2* < p < q*; no decaying solution is expected");
    }
    if !(opts.u0_min > 0.0 && opts.u0_max > opts.u0_min && opts.probes_per_decade > 0) {
        return Err(Error::InvalidParams("bad u0 probe range".into()));
    }
    let decades = (opts.u0_max / opts.u0_min).log10();
    let count = (decades * opts.probes_per_decade as f64).ceil() as usize + 1;
    let probes: Vec<f64> = (0..count)
        .map(|k| opts.u0_min * 10f64.powf(decades * k as f64 / (count - 1) as f64))
        .collect();
    let labels: Vec<bool> = probes
        .par_iter()
        .map(|&u0| crossing(params, lambda, u0, opts))
        .collect::<Result<_>>()?;
    let corridors: Vec<(f64, f64)> = (1..count)
        .filter(|&k| labels[k] != labels[k - 1])
        .map(|k| (probes[k - 1], probes[k]))
        .collect();
    let Some(&(mut lo, mut hi)) = corridors.first() else {
        return Err(Error::NoGroundState(format!(
            "no change of classification for u0 in [{}, {}]",
            opts.u0_min, opts.u0_max
        )));
    };
    let lo_crosses = crossing(params, lambda, lo, opts)?;
    while (hi - lo) > opts.corridor_rtol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crossing(params, lambda, mid, opts)? == lo_crosses {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let run = |u0: f64| integrate(&probe_config(params, lambda, u0, opts), params);
    let (t_lo, _) = run(lo)?;
    let (t_hi, _) = run(hi)?;
    let cfg = probe_config(params, lambda, mid, opts);
    let (t_mid, class) = run(mid)?;
    let resolved = agreement_radius(&t_mid, &t_lo, &t_hi, opts.separation);
    let mut res = bare_result(&cfg, params, t_mid, class);
    res.resolved = resolved;
    certify(&mut res)?;
    let horizon = cfg.r_max;
    let far = res.eval(horizon).abs();
    if res.tail.is_none() || !(far < 1e-8 * mid) {
        return Err(Error::NoGroundState(format!(
            "corridor near u0 = {mid} did not resolve a decaying profile (|u(R)| = {far:e})"
        )));
    }
    res.classification = Classification::Decaying;
    Ok(GroundState { result: res, bracket: (lo, hi), extra_corridors: corridors[1..].to_vec() })
}

fn crossing(params: &ProblemParams, lambda: f64, u0: f64, opts: &GroundStateOptions) -> Result<bool> {
    let (_, class) = integrate(&probe_config(params, lambda, u0, opts), params)?;
    Ok(class.is_crossing())
}

/// Largest sample radius of `mid` up to which both bracket trajectories
/// agree with each other to `sep·|u_mid|`.
fn agreement_radius(mid: &Trajectory, lo: &Trajectory, hi: &Trajectory, sep: f64) -> f64 {
    let mut last = mid.r[0];
    for (k, &r) in mid.r.iter().enumerate() {
        let u = mid.u[k];
        let (Some((a, _)), Some((b, _))) = (lo.eval(r), hi.eval(r)) else { break };
        if !(u > 0.0) || (a - b).abs() > sep * u {
            break;
        }
        last = r;
    }
    last
}

/// Energy report of the profile sampled on `grid`.
pub fn mapped_report(res: &ShootResult, grid: Arc<RadialGrid>, alpha: f64) -> Result<EnergyReport> {
    let u = res.to_grid(grid)?;
    let params = ProblemParams { alpha, mass: u.mass(), ..res.params };
    EnergyReport::from_norms(&Norms::of(&u, &params)?, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize, q: f64, p: f64, alpha: f64) -> ProblemParams {
        ProblemParams::new(dim, q, p, alpha, 1.0).unwrap()
    }

    #[test]
    fn rhs_substitutions() {
        let pr = params(3, 3.0, 4.0, 2.0);
        assert_eq!(ode_rhs(1.0, 1.5, 0.0, &pr, 0.0), -2.0 * 1.5f64.powi(3));
        let one = params(1, 3.0, 4.5, 1.0);
        let (u, v, lam): (f64, f64, f64) = (0.7, -0.3, 1.3);
        let expect = (lam * u - u.powf(3.5)) / (1.0 + 2.0 * 0.3);
        assert!((ode_rhs(5.0, u, v, &one, lam) - expect).abs() < 1e-15);
    }

    #[test]
    fn rhs_large_slope_limit() {
        let pr = params(3, 3.0, 4.0, 1.0);
        let (r, v) = (2.0, -1e6);
        let limit = -(2.0 / (2.0 * r)) * v;
        let got = ode_rhs(r, 0.5, v, &pr, 1.0);
        assert!(((got - limit) / limit).abs() < 1e-4);
    }

    #[test]
    fn tiny_amplitude_does_not_cross() {
        let pr = params(3, 3.0, 4.0, 1.0);
        let cfg = ShootConfig { lambda: 1.0, u0: 1e-6, r_max: 30.0, ..Default::default() };
        let res = shoot(&cfg, &pr).unwrap();
        assert!(!res.classification.is_crossing(), "{}", res.classification);
    }

    #[test]
    fn huge_amplitude_crosses() {
        let pr = params(3, 3.0, 4.0, 1.0);
        let cfg = ShootConfig { lambda: 1.0, u0: 1e3, r_max: 30.0, ..Default::default() };
        assert!(shoot(&cfg, &pr).unwrap().classification.is_crossing());
    }

    #[test]
    fn first_integral_is_conserved_in_one_dimension() {
        let pr = params(1, 3.0, 4.5, 1.0);
        for u0 in [0.5, 1.2, 3.0] {
            let cfg = ShootConfig { lambda: 1.0, u0, r_max: 20.0, ..Default::default() };
            let res = shoot(&cfg, &pr).unwrap();
            assert!(res.f_drift < 1e-8, "u0 = {u0}: drift {}", res.f_drift);
        }
    }

    #[test]
    fn first_integral_never_increases() {
        let pr = params(3, 3.0, 4.0, 1.0);
        for (lam, u0) in [(1.0, 2.0), (0.0, 1.0), (0.5, 10.0)] {
            let cfg = ShootConfig { lambda: lam, u0, r_max: 20.0, ..Default::default() };
            let res = shoot(&cfg, &pr).unwrap();
            assert!(res.f_drift < 1e-8, "{}", res.f_drift);
        }
    }

    #[test]
    fn fixed_step_order() {
        // even q keeps |u′|^{q−2} smooth
        let pr = params(2, 4.0, 4.0, 1.0);
        let cfg = ShootConfig { lambda: 0.5, u0: 0.8, r_max: 3.0, ..Default::default() };
        let exact = integrate_fixed(&cfg, &pr, 8192).unwrap();
        let e1 = integrate_fixed(&cfg, &pr, 64).unwrap();
        let e2 = integrate_fixed(&cfg, &pr, 128).unwrap();
        let err = |x: (f64, f64)| (x.0 - exact.0).abs() + (x.1 - exact.1).abs();
        assert!(err(e1) / err(e2) >= 8.0, "ratio {}", err(e1) / err(e2));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |r: f64| 1.0 - 2.0 * r + 0.5 * r.powi(3);
        let df = |r: f64| -2.0 + 1.5 * r * r;
        let (u, du) = hermite(0.3, 0.9, f(0.3), f(0.9), df(0.3), df(0.9), 0.55);
        assert!((u - f(0.55)).abs() < 1e-14 && (du - df(0.55)).abs() < 1e-13);
    }

    fn synthetic(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Trajectory {
        let mut t = Trajectory::default();
        for k in 0..=400 {
            let r = 1.0 * 100f64.powf(k as f64 / 400.0);
            t.push(r, &[f(r), df(r), 0.0, 0.0], 0.0);
        }
        t
    }

    #[test]
    fn power_tail_fit() {
        let t = synthetic(|r| 2.0 * r.powi(-3), |r| -6.0 * r.powi(-4));
        match fit_tail(&t, 100.0, 1.0).unwrap() {
            DecayFit::Power { slope, .. } => assert!((slope + 3.0).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponential_tail_is_flagged() {
        let t = synthetic(|r| (-r).exp(), |r| -(-r).exp());
        let fit = fit_tail(&t, 20.0, 1.0).unwrap();
        assert!(matches!(fit, DecayFit::SuperPolynomial { .. }), "{fit:?}");
    }

    #[test]
    fn one_dimensional_ground_state_amplitude() {
        // F ≡ 0 on the decaying solution gives (α/p)u0^{p−2} = λ/2.
        let pr = params(1, 3.0, 4.5, 1.0);
        let gs = find_ground_state(&pr, 1.0, &GroundStateOptions::default()).unwrap();
        let expect = (4.5f64 / 2.0).powf(1.0 / 2.5);
        let u0 = gs.result.u0;
        assert!((u0 - expect).abs() < 1e-8 * expect, "{u0} vs {expect}");
        assert!(gs.result.pohozaev_residual.unwrap() < 1e-3);
        let lam = gs.result.mapped_multiplier.unwrap();
        assert!((lam - 1.0).abs() < 1e-2, "multiplier {lam}");
        assert!(matches!(gs.result.l2_mass, Some(L2Mass::Finite(_))));
    }

    #[test]
    fn geometric_ratio_hits_radius() {
        let rho = geometric_ratio(1000.0, 1e-3, 4097);
        let total = 1e-3 * (rho.powf(4096.0) - 1.0) / (rho - 1.0);
        assert!((total - 1000.0).abs() < 1e-6);
    }
}
