//! Energy, Pohozaev-type functionals, the quotient `J` and exact discrete
//! first variations.
//!
//! Every functional is an algebraic combination of four numbers: the two
//! gradient integrals, the `L^p` integral and the mass. [`Norms`] evaluates
//! them once; the scalar formulas live on it so that other modules (fiber
//! algebra, random-profile searches) can reuse them without touching the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::radial::{grad_norm_pow, lp_norm_pow, RadialFn};

/// The four integrals every functional is built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `‖∇u‖₂²`
    pub grad2: f64,
    /// `‖∇u‖_q^q`
    pub gradq: f64,
    /// `‖u‖_p^p`
    pub lp: f64,
    /// `‖u‖₂²`
    pub mass: f64,
}

impl Norms {
    pub fn of(u: &RadialFn, params: &ProblemParams) -> Result<Self> {
        Ok(Norms {
            grad2: grad_norm_pow(u, 2.0)?,
            gradq: grad_norm_pow(u, params.q)?,
            lp: lp_norm_pow(u, params.p)?,
            mass: lp_norm_pow(u, 2.0)?,
        })
    }

    pub fn kinetic(&self) -> f64 {
        self.grad2 + self.gradq
    }

    pub fn energy(&self, params: &ProblemParams) -> f64 {
        0.5 * self.grad2 + self.gradq / params.q - params.alpha * self.lp / params.p
    }

    pub fn q_functional(&self, params: &ProblemParams) -> f64 {
        let n = params.n_f64();
        let (q, p) = (params.q, params.p);
        self.grad2 + ((n + 2.0) * q / 2.0 - n) / q * self.gradq
            - params.alpha * n / p * (p / 2.0 - 1.0) * self.lp
    }

    pub fn pohozaev(&self, params: &ProblemParams, lambda: f64) -> f64 {
        let n = params.n_f64();
        let (q, p) = (params.q, params.p);
        (n - 2.0) / 2.0 * self.grad2 + (n - q) / q * self.gradq + n * lambda / 2.0 * self.mass
            - n * params.alpha / p * self.lp
    }

    pub fn lagrange_multiplier(&self, params: &ProblemParams) -> Result<f64> {
        if !(self.mass > 0.0) {
            return Err(Error::ZeroMass("multiplier needs positive mass".into()));
        }
        Ok((params.alpha * self.lp - self.kinetic()) / self.mass)
    }

    /// Dilation-invariant quotient
    /// `‖∇u‖₂² (‖∇u‖_q^q)^{(pδ_p−2)/D} / (‖u‖_p^p)^{(q(1+δ_q)−2)/D}`
    /// with `D = q(1+δ_q) − pδ_p`.
    pub fn quotient_j(&self, params: &ProblemParams) -> Result<f64> {
        if !(self.lp > 0.0) || !(self.gradq > 0.0) {
            return Err(Error::JUndefined(
                "needs ‖u‖_p > 0 and ‖∇u‖_q > 0".into(),
            ));
        }
        let (a, b) = j_exponents(params)?;
        Ok(self.grad2 * self.gradq.powf(a) / self.lp.powf(b))
    }
}

/// Exponents `((pδ_p−2)/D, (q(1+δ_q)−2)/D)` of the quotient.
pub fn j_exponents(params: &ProblemParams) -> Result<(f64, f64)> {
    let pd = params.p_delta_p();
    let qd = params.q_one_plus_delta_q();
    let gap = qd - pd;
    if !(gap > 0.0) {
        return Err(Error::JUndefined(format!(
            "dilation exponents do not separate (q(1+δ_q) − pδ_p = {gap})"
        )));
    }
    Ok(((pd - 2.0) / gap, (qd - 2.0) / gap))
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numerical(format!("{what} evaluated to {x}")))
    }
}

/// Bundled evaluation of every functional at one function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "K")]
    pub kinetic: f64,
    #[serde(rename = "Q")]
    pub q_functional: f64,
    pub grad2: f64,
    pub gradq: f64,
    pub mass: f64,
    pub lp: f64,
    pub lambda: f64,
    pub pohozaev: f64,
    pub params: ProblemParams,
}

impl EnergyReport {
    pub fn from_norms(norms: &Norms, params: &ProblemParams) -> Result<Self> {
        let lambda = norms.lagrange_multiplier(params)?;
        Ok(EnergyReport {
            energy: finite(norms.energy(params), "energy")?,
            kinetic: finite(norms.kinetic(), "K")?,
            q_functional: finite(norms.q_functional(params), "Q")?,
            grad2: norms.grad2,
            gradq: norms.gradq,
            mass: norms.mass,
            lp: norms.lp,
            lambda: finite(lambda, "lambda")?,
            pohozaev: finite(norms.pohozaev(params, lambda), "Pohozaev functional")?,
            params: *params,
        })
    }

    /// `|Q| / K`.
    pub fn q_residual(&self) -> f64 {
        self.q_functional.abs() / self.kinetic
    }

    /// `|P| / (K + |λ| m)`.
    pub fn pohozaev_residual(&self) -> f64 {
        self.pohozaev.abs() / (self.kinetic + self.lambda.abs() * self.mass)
    }
}

pub fn energy_report(u: &RadialFn, params: &ProblemParams) -> Result<EnergyReport> {
    EnergyReport::from_norms(&Norms::of(u, params)?, params)
}

pub fn energy(u: &RadialFn, params: &ProblemParams) -> Result<f64> {
    finite(Norms::of(u, params)?.energy(params), "energy")
}

pub fn kinetic(u: &RadialFn, params: &ProblemParams) -> Result<f64> {
    Ok(grad_norm_pow(u, 2.0)? + grad_norm_pow(u, params.q)?)
}

pub fn q_functional(u: &RadialFn, params: &ProblemParams) -> Result<f64> {
    finite(Norms::of(u, params)?.q_functional(params), "Q")
}

pub fn pohozaev(u: &RadialFn, params: &ProblemParams, lambda: f64) -> Result<f64> {
    finite(Norms::of(u, params)?.pohozaev(params, lambda), "Pohozaev functional")
}

pub fn lagrange_multiplier(u: &RadialFn, params: &ProblemParams) -> Result<f64> {
    let norms = Norms::of(u, params)?;
    finite(norms.lagrange_multiplier(params)?, "lambda")
}

pub fn quotient_j(u: &RadialFn, params: &ProblemParams) -> Result<f64> {
    finite(Norms::of(u, params)?.quotient_j(params)?, "J")
}

/// Gradients (with respect to the node values) of the three integrals that
/// make up the energy, each the exact derivative of its discrete quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct NormGradients {
    pub grad2: Vec<f64>,
    pub gradq: Vec<f64>,
    pub lp: Vec<f64>,
}

impl NormGradients {
    pub fn of(u: &RadialFn, params: &ProblemParams) -> Self {
        let grid = u.grid();
        let n = grid.len();
        let d = u.derivative();
        let cells = grid.cell_measures();
        let mut grad2 = vec![0.0; n];
        let mut gradq = vec![0.0; n];
        for (k, (&dk, &c)) in d.iter().zip(cells).enumerate() {
            let h = grid.cell_width(k);
            // ∂/∂u of c·D² and c·|D|^q with D = (u_{k+1} − u_k)/h
            let t2 = 2.0 * c * dk / h;
            let tq = params.q * c * signed_pow(dk, params.q - 1.0) / h;
            grad2[k] -= t2;
            grad2[k + 1] += t2;
            gradq[k] -= tq;
            gradq[k + 1] += tq;
        }
        let lp = u
            .values()
            .iter()
            .zip(grid.weights())
            .map(|(&v, &w)| params.p * w * signed_pow(v, params.p - 1.0))
            .collect();
        NormGradients { grad2, gradq, lp }
    }

    /// Gradient of `E = G₂/2 + G_q/q − (α/p) L_p`.
    pub fn energy(&self, params: &ProblemParams) -> Vec<f64> {
        let (q, p, a) = (params.q, params.p, params.alpha);
        self.grad2
            .iter()
            .zip(&self.gradq)
            .zip(&self.lp)
            .map(|((g2, gq), gp)| 0.5 * g2 + gq / q - a * gp / p)
            .collect()
    }
}

/// `|x|^e sign(x)`, continuously extended by 0 at `x = 0`.
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// Exact gradient of the discrete energy with respect to the node values.
///
/// For every grid function `v`, `Σ gᵢ vᵢ` equals the directional derivative
/// of the discrete energy at `u` along `v`.
pub fn first_variation(u: &RadialFn, params: &ProblemParams) -> Result<RadialFn> {
    let g = NormGradients::of(u, params).energy(params);
    u.with_values(g)
}
