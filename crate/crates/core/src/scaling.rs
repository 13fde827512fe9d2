//! Mass-preserving dilations `u_θ(r) = θ^{N/2} u(θr)` and the algebra of the
//! energy along a dilation orbit.
//!
//! Under `u ↦ u_θ` the mass is unchanged and
//! `‖∇u‖₂² ↦ θ²‖∇u‖₂²`, `‖∇u‖_q^q ↦ θ^{q(1+δ_q)}‖∇u‖_q^q`,
//! `‖u‖_p^p ↦ θ^{pδ_p}‖u‖_p^p`. [`Fiber`] works on these three numbers only;
//! [`theta_scale`] is the physical resampling used when a new iterate is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Norms;
use crate::params::ProblemParams;
use crate::radial::RadialFn;

/// Scaled mass may drift from the original by this much before it is flagged.
pub const MASS_DRIFT_FLAG: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub theta: f64,
    /// `E(u_θ)/θ²`
    pub value: f64,
    /// `E(u_θ)`
    pub energy_at_theta: f64,
}

/// Energy along the dilation orbit of a fixed function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fiber {
    norms: Norms,
    alpha: f64,
    q: f64,
    p: f64,
    /// dilation exponent of `‖∇u‖_q^q`
    kin_exp: f64,
    /// dilation exponent of `‖u‖_p^p`
    pot_exp: f64,
}

impl Fiber {
    pub fn new(norms: Norms, params: &ProblemParams) -> Self {
        Fiber {
            norms,
            alpha: params.alpha,
            q: params.q,
            p: params.p,
            kin_exp: params.q_one_plus_delta_q(),
            pot_exp: params.p_delta_p(),
        }
    }

    pub fn of(u: &RadialFn, params: &ProblemParams) -> Result<Self> {
        Ok(Self::new(Norms::of(u, params)?, params))
    }

    pub fn norms(&self) -> &Norms {
        &self.norms
    }

    /// Exact norms of `u_θ`.
    pub fn norms_at(&self, theta: f64) -> Norms {
        Norms {
            grad2: theta * theta * self.norms.grad2,
            gradq: theta.powf(self.kin_exp) * self.norms.gradq,
            lp: theta.powf(self.pot_exp) * self.norms.lp,
            mass: self.norms.mass,
        }
    }

    pub fn psi(&self, theta: f64) -> f64 {
        0.5 * self.norms.grad2 + theta.powf(self.kin_exp - 2.0) * self.norms.gradq / self.q
            - self.alpha / self.p * theta.powf(self.pot_exp - 2.0) * self.norms.lp
    }

    pub fn energy(&self, theta: f64) -> f64 {
        theta * theta * self.psi(theta)
    }

    pub fn kinetic(&self, theta: f64) -> f64 {
        theta * theta * self.norms.grad2 + theta.powf(self.kin_exp) * self.norms.gradq
    }

    pub fn point(&self, theta: f64) -> FiberPoint {
        let value = self.psi(theta);
        FiberPoint { theta, value, energy_at_theta: theta * theta * value }
    }

    /// Energy of `σ∗u = u_{e^σ}` written directly in `σ`.
    pub fn sigma_energy(&self, sigma: f64) -> f64 {
        0.5 * (2.0 * sigma).exp() * self.norms.grad2
            + (sigma * self.kin_exp).exp() * self.norms.gradq / self.q
            - self.alpha / self.p * (sigma * self.pot_exp).exp() * self.norms.lp
    }

    fn check_window(&self) -> Result<(f64, f64)> {
        let a = self.kin_exp - 2.0;
        let b = self.pot_exp - 2.0;
        if !(a > b && b > 0.0) {
            return Err(Error::Regime(format!(
                "fiber minimum needs q(1+δ_q) > pδ_p > 2, got {} and {}",
                self.kin_exp, self.pot_exp
            )));
        }
        if self.alpha == 0.0 {
            return Err(Error::NoInteriorMinimum(
                "alpha = 0: the fiber is increasing in theta".into(),
            ));
        }
        if !(self.norms.lp > 0.0 && self.norms.gradq > 0.0) {
            return Err(Error::NoInteriorMinimum("needs ‖u‖_p > 0 and ‖∇u‖_q > 0".into()));
        }
        Ok((a, b))
    }

    /// Minimizer of `ψ` and the minimum value `ψ(θ̄)` evaluated through `psi`.
    pub fn argmin(&self) -> Result<(f64, f64)> {
        let (a, b) = self.check_window()?;
        let ratio = self.q * self.alpha * b * self.norms.lp / (self.p * a * self.norms.gradq);
        let theta = ratio.powf(1.0 / (a - b));
        Ok((theta, self.psi(theta)))
    }

    /// The minimum of `ψ` from the closed form in the three norms, without
    /// going through `θ̄`.
    pub fn psi_min_closed(&self) -> Result<f64> {
        let (a, b) = self.check_window()?;
        let gap = a - b;
        let Norms { grad2, gradq, lp, .. } = self.norms;
        let (q, p) = (self.q, self.p);
        Ok(0.5 * grad2
            - self.alpha.powf(a / gap)
                * (q * b / (p * a)).powf(b / gap)
                * (gap / (p * a))
                * lp.powf(a / gap)
                * gradq.powf(-b / gap))
    }

    /// Strength above which `ψ` dips below zero for this function.
    pub fn sign_threshold(&self, params: &ProblemParams) -> Result<f64> {
        alpha0_from_d(self.norms.quotient_j(params)?, params)
    }

    /// Local minimizer of `θ ↦ E(u_θ)` with the lowest energy, if any.
    pub fn energy_local_min(&self) -> Option<(f64, f64)> {
        // sign of dE/dθ / θ
        let slope = |t: f64| {
            let th = t.exp();
            self.norms.grad2 + self.kin_exp / self.q * th.powf(self.kin_exp - 2.0) * self.norms.gradq
                - self.alpha * self.pot_exp / self.p * th.powf(self.pot_exp - 2.0) * self.norms.lp
        };
        let (lo, hi, steps) = (-60.0, 60.0, 1200);
        let dt = (hi - lo) / steps as f64;
        let mut best: Option<(f64, f64)> = None;
        let mut prev = slope(lo);
        for i in 1..=steps {
            let t1 = lo + i as f64 * dt;
            let cur = slope(t1);
            if prev < 0.0 && cur >= 0.0 {
                let (mut a, mut b) = (t1 - dt, t1);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if slope(mid) < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let theta = (0.5 * (a + b)).exp();
                let e = self.energy(theta);
                if best.is_none_or(|(_, eb)| e < eb) {
                    best = Some((theta, e));
                }
            }
            prev = cur;
        }
        best
    }

    /// The dilation with `K(u_θ) = target` (`K` is increasing in θ).
    pub fn theta_for_kinetic(&self, target: f64) -> Result<f64> {
        if !(target > 0.0) || !(self.norms.kinetic() > 0.0) {
            return Err(Error::InvalidParams("kinetic target and K(u) must be positive".into()));
        }
        let (mut a, mut b) = (-80.0f64, 80.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.kinetic(mid.exp()) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((0.5 * (a + b)).exp())
    }
}

pub fn fiber_psi(u: &RadialFn, params: &ProblemParams, theta: f64) -> Result<FiberPoint> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParams(format!("theta must be positive, got {theta}")));
    }
    Ok(Fiber::of(u, params)?.point(theta))
}

/// `(θ̄, ψ(θ̄))`.
pub fn fiber_argmin(u: &RadialFn, params: &ProblemParams) -> Result<(f64, f64)> {
    Fiber::of(u, params)?.argmin()
}

/// A resampled dilation together with its mass bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Rescaled {
    pub u: RadialFn,
    /// `|‖u_θ‖₂² − ‖u‖₂²| / ‖u‖₂²` on the grid.
    pub mass_drift: f64,
    pub flagged: bool,
}

/// `θ^{N/2} u(θr)` resampled onto the same grid by cubic interpolation.
pub fn theta_scale(u: &RadialFn, theta: f64) -> Result<RadialFn> {
    Ok(theta_scale_checked(u, theta)?.u)
}

pub fn theta_scale_checked(u: &RadialFn, theta: f64) -> Result<Rescaled> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParams(format!("theta must be positive, got {theta}")));
    }
    let grid = u.grid();
    let nodes = grid.nodes();
    let peak = u.max_abs();
    let support = u
        .values()
        .iter()
        .rposition(|v| v.abs() > 1e-12 * peak)
        .map(|i| nodes[i])
        .unwrap_or(0.0);
    if peak > 0.0 && support / theta < nodes[4] {
        return Err(Error::UnderResolved(format!(
            "theta = {theta} squeezes the support into fewer than 4 cells"
        )));
    }
    let amp = theta.powf(grid.dim() as f64 / 2.0);
    let values: Vec<f64> = nodes.iter().map(|&r| amp * u.eval(theta * r)).collect();
    let scaled = u.with_values(values)?;
    let m0 = u.mass();
    let mass_drift = if m0 > 0.0 { (scaled.mass() - m0).abs() / m0 } else { 0.0 };
    let flagged = mass_drift > MASS_DRIFT_FLAG;
    if flagged {
        log::warn!("dilation by {theta} changed the grid mass by {mass_drift:.3e}");
    }
    Ok(Rescaled { u: scaled, mass_drift, flagged })
}

/// `σ∗u = u_{e^σ}`.
pub fn sigma_star(u: &RadialFn, sigma: f64) -> Result<RadialFn> {
    theta_scale(u, sigma.exp())
}

/// Power of `m` in the mass law `d(m) = m^{e} d(1)`.
pub fn d_mass_exponent(params: &ProblemParams) -> f64 {
    let gap = params.q_one_plus_delta_q() - params.p_delta_p();
    -params.p * (params.q - 2.0) / (2.0 * gap)
}

/// Power of `m` in `α₀(m) = α₀(1) m^{e}`.
pub fn alpha0_mass_exponent(params: &ProblemParams) -> f64 {
    -params.p * (params.q - 2.0) / (2.0 * (params.q_one_plus_delta_q() - 2.0))
}

pub fn d_from_d1(d1: f64, params: &ProblemParams) -> f64 {
    params.mass.powf(d_mass_exponent(params)) * d1
}

/// Threshold strength from the infimum of the quotient at the current mass.
pub fn alpha0_from_d(d_m: f64, params: &ProblemParams) -> Result<f64> {
    if !(d_m > 0.0 && d_m.is_finite()) {
        return Err(Error::InvalidParams(format!("d(m) must be positive, got {d_m}")));
    }
    params.require_intermediate()?;
    let a = params.q_one_plus_delta_q() - 2.0;
    let b = params.p_delta_p() - 2.0;
    let gap = a - b;
    let (q, p) = (params.q, params.p);
    let inner = (q * b / (p * a)).powf(-b / gap) * (p * a / gap) * 0.5 * d_m;
    Ok(inner.powf(gap / a))
}

/// `α₀(m)` from `d(1)` with the mass dependence pulled out as a single power.
pub fn alpha0_from_d1(d1: f64, params: &ProblemParams) -> Result<f64> {
    let at_unit = alpha0_from_d(d1, &params.with_mass(1.0))?;
    Ok(at_unit * params.mass.powf(alpha0_mass_exponent(params)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub d1: f64,
    pub dm: f64,
    pub alpha0_formula: f64,
    pub alpha0_bisect: Option<f64>,
    pub mass: f64,
    /// `|bisect − formula| / formula` when both are available.
    pub relative_gap: Option<f64>,
}

impl ThresholdReport {
    pub fn new(d1: f64, alpha0_bisect: Option<f64>, params: &ProblemParams) -> Result<Self> {
        let dm = d_from_d1(d1, params);
        let alpha0_formula = alpha0_from_d(dm, params)?;
        Ok(ThresholdReport {
            d1,
            dm,
            alpha0_formula,
            alpha0_bisect,
            mass: params.mass,
            relative_gap: alpha0_bisect.map(|b| (b - alpha0_formula).abs() / alpha0_formula),
        })
    }
}
