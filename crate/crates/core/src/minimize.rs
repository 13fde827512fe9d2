//! Constrained minimization on the mass sphere `S_m = {‖u‖₂² = m}`.
//!
//! All minimizers share one engine: projected descent along a Sobolev
//! gradient. At each iterate the search direction solves a tridiagonal system
//! with the metric `A = Σ_cells κ_c c_c (e_{k+1} − e_k)² / h_k² + s·W`
//! (`W` the quadrature weights), projected to be `W`-orthogonal to `u`, and
//! the step is found by Armijo backtracking followed by rescaling back onto
//! the sphere. Every accepted step strictly lowers the objective. The outer
//! node is held at zero, so iterates are zero-extended functions on `ℝ^N`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{j_exponents, EnergyReport, NormGradients, Norms};
use crate::params::{nu, ProblemParams, RegimeKind};
use crate::radial::{RadialFn, RadialGrid, Spacing};
use crate::scaling::{sigma_star, Fiber};

/// Grid used by the minimizers; `r_max = None` picks a radius from the
/// natural length scale of the problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: Option<f64>,
    pub n: usize,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { r_max: None, n: 2049, spacing: Spacing::Uniform }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Initial line-search step; accepted steps may grow from here.
    pub step: f64,
    pub step_shrink: f64,
    /// Stopping threshold on the relative tangent residual.
    pub tol_grad: f64,
    pub restarts: usize,
    pub seed: u64,
    pub grid: GridSpec,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 4000,
            step: 1.0,
            step_shrink: 0.5,
            tol_grad: 1e-7,
            restarts: 4,
            seed: 0,
            grid: GridSpec::default(),
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidParams("max_iter and restarts must be positive".into()));
        }
        if !(self.step > 0.0) || !(self.tol_grad > 0.0) {
            return Err(Error::InvalidParams("step and tol_grad must be positive".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::InvalidParams("step_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Threshold below which an energy counts as genuinely negative.
    pub fn tol_neg(&self, mass: f64) -> f64 {
        10.0 * self.tol_grad * mass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rho")]
pub enum Constraint {
    Global,
    LocalAboveRho(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeResult {
    pub u: RadialFn,
    pub energy: f64,
    pub lambda: f64,
    pub grad_tangent_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint: Constraint,
    /// Best energy is not below `−tol_neg`: the infimum is zero and not attained.
    pub vanishing: bool,
    /// See [`outer_decayed`].
    pub boundary_decayed: bool,
    pub restart: usize,
    pub report: EnergyReport,
}

/// Serializable summary of a [`MinimizeResult`] (the profile goes to CSV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeRecord {
    pub energy: f64,
    pub lambda: f64,
    pub grad_tangent_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint: Constraint,
    pub vanishing: bool,
    pub boundary_decayed: bool,
    pub restart: usize,
    pub kinetic: f64,
    pub q_residual: f64,
    pub pohozaev_residual: f64,
    pub r_max: f64,
    pub n: usize,
}

impl MinimizeResult {
    pub fn record(&self) -> MinimizeRecord {
        MinimizeRecord {
            energy: self.energy,
            lambda: self.lambda,
            grad_tangent_norm: self.grad_tangent_norm,
            iterations: self.iterations,
            converged: self.converged,
            constraint: self.constraint,
            vanishing: self.vanishing,
            boundary_decayed: self.boundary_decayed,
            restart: self.restart,
            kinetic: self.report.kinetic,
            q_residual: self.report.q_residual(),
            pohozaev_residual: self.report.pohozaev_residual(),
            r_max: self.u.grid().r_max(),
            n: self.u.grid().len(),
        }
    }
}

/// `√m / ‖u‖₂ · u`.
pub fn project_sphere(u: &RadialFn, m: f64) -> Result<RadialFn> {
    let mass = u.mass();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass("cannot project the zero function".into()));
    }
    Ok(u.scaled((m / mass).sqrt()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a symmetric tridiagonal system (diagonal `diag`, off-diagonal `off`).
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// A smooth objective on grid functions with enough structure to build the
/// descent metric.
trait Objective: Sync {
    fn value_grad(&self, u: &RadialFn) -> Result<(f64, Vec<f64>)>;
    fn value(&self, u: &RadialFn) -> Result<f64>;
    /// Per-cell coefficient `κ_c` of the gradient-term metric.
    fn stiffness(&self, u: &RadialFn) -> Result<Vec<f64>>;
    /// Extra multiple of `W` added to the metric.
    fn shift(&self, _u: &RadialFn, _lambda: f64) -> f64 {
        0.0
    }
    /// Magnitude used to make the tangent residual dimensionless.
    fn scale(&self, u: &RadialFn) -> Result<f64>;
}

struct EnergyObjective {
    params: ProblemParams,
}

impl Objective for EnergyObjective {
    fn value_grad(&self, u: &RadialFn) -> Result<(f64, Vec<f64>)> {
        let norms = Norms::of(u, &self.params)?;
        let grads = NormGradients::of(u, &self.params);
        Ok((norms.energy(&self.params), grads.energy(&self.params)))
    }

    fn value(&self, u: &RadialFn) -> Result<f64> {
        Ok(Norms::of(u, &self.params)?.energy(&self.params))
    }

    fn stiffness(&self, u: &RadialFn) -> Result<Vec<f64>> {
        let q = self.params.q;
        Ok(u.derivative()
            .iter()
            .map(|d| 1.0 + (q - 1.0) * d.abs().powf(q - 2.0))
            .collect())
    }

    fn shift(&self, _u: &RadialFn, lambda: f64) -> f64 {
        lambda.max(0.0)
    }

    fn scale(&self, u: &RadialFn) -> Result<f64> {
        let n = Norms::of(u, &self.params)?;
        Ok(n.kinetic() + self.params.alpha * n.lp)
    }
}

/// Dilation-invariant log-quotient
/// `c₂ ln G₂ + c_q ln G_q + c_p ln L_p`, plus a penalty pinning `ln L_p`
/// so the invariant direction cannot wander off the grid.
struct LogQuotientObjective {
    q_grad: f64,
    c2: f64,
    cq: f64,
    cp: f64,
    p: f64,
    anchor: f64,
}

impl LogQuotientObjective {
    const PENALTY: f64 = 1.0;

    fn parts(&self, u: &RadialFn) -> Result<(f64, f64, f64)> {
        use crate::radial::{grad_norm_pow, lp_norm_pow};
        let g2 = if self.c2 != 0.0 { grad_norm_pow(u, 2.0)? } else { 1.0 };
        let gq = if self.cq != 0.0 { grad_norm_pow(u, self.q_grad)? } else { 1.0 };
        let lp = lp_norm_pow(u, self.p)?;
        if !(g2 > 0.0 && gq > 0.0 && lp > 0.0) {
            return Err(Error::JUndefined("a norm in the quotient vanished".into()));
        }
        Ok((g2, gq, lp))
    }

    fn unpenalized(&self, u: &RadialFn) -> Result<f64> {
        let (g2, gq, lp) = self.parts(u)?;
        Ok(self.c2 * g2.ln() + self.cq * gq.ln() + self.cp * lp.ln())
    }

    fn norm_grads(&self, u: &RadialFn) -> NormGradients {
        // q-gradient and p-power taken with the objective's own exponents
        let params = ProblemParams {
            dim: u.grid().dim(),
            q: self.q_grad,
            p: self.p,
            alpha: 0.0,
            mass: 1.0,
        };
        NormGradients::of(u, &params)
    }
}

impl Objective for LogQuotientObjective {
    fn value_grad(&self, u: &RadialFn) -> Result<(f64, Vec<f64>)> {
        let (g2, gq, lp) = self.parts(u)?;
        let grads = self.norm_grads(u);
        let off = lp.ln() - self.anchor;
        let value = self.c2 * g2.ln()
            + self.cq * gq.ln()
            + self.cp * lp.ln()
            + Self::PENALTY * off * off;
        let cp = self.cp + 2.0 * Self::PENALTY * off;
        let g = (0..u.values().len())
            .map(|i| {
                self.c2 * grads.grad2[i] / g2 + self.cq * grads.gradq[i] / gq + cp * grads.lp[i] / lp
            })
            .collect();
        Ok((value, g))
    }

    fn value(&self, u: &RadialFn) -> Result<f64> {
        let (_, _, lp) = self.parts(u)?;
        let off = lp.ln() - self.anchor;
        Ok(self.unpenalized(u)? + Self::PENALTY * off * off)
    }

    fn stiffness(&self, u: &RadialFn) -> Result<Vec<f64>> {
        let (g2, gq, _) = self.parts(u)?;
        let q = self.q_grad;
        Ok(u.derivative()
            .iter()
            .map(|d| {
                2.0 * self.c2.abs() / g2 + self.cq.abs() * q * (q - 1.0) * d.abs().powf(q - 2.0) / gq
            })
            .collect())
    }

    fn scale(&self, _u: &RadialFn) -> Result<f64> {
        Ok(self.c2.abs() * 2.0 + self.cq.abs() * self.q_grad + self.cp.abs() * self.p)
    }
}

#[derive(Clone, Debug)]
struct Descent {
    u: RadialFn,
    value: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    reached_target: bool,
    /// The line search ran out because of the admissibility test.
    blocked: bool,
}

/// Multiplier `λ = −⟨g, u⟩ / ⟨u, u⟩_W` over the free nodes.
fn tangent_multiplier(u: &RadialFn, g: &[f64]) -> f64 {
    let w = u.grid().weights();
    let free = w.len() - 1;
    let wu: Vec<f64> = u.values().iter().zip(w).map(|(a, b)| a * b).collect();
    -dot(&g[..free], &u.values()[..free]) / dot(&wu, u.values())
}

/// Projected descent on `S_m` with `u(r_max) = 0`.
///
/// Directions are Sobolev gradients (`A⁻¹` applied to the gradient, made
/// `W`-orthogonal to `u`) combined Polak–Ribière style with the previous
/// direction; a direction that fails to descend is replaced by the plain
/// Sobolev gradient.
fn descend(
    obj: &dyn Objective,
    start: RadialFn,
    mass: f64,
    opts: &MinimizeOptions,
    admissible: &dyn Fn(&RadialFn) -> Result<bool>,
    stop_below: Option<f64>,
) -> Result<Descent> {
    const ARMIJO: f64 = 1e-4;
    let grid = start.grid().clone();
    let w = grid.weights().to_vec();
    let n = grid.len();
    let free = n - 1;
    let mut pinned = start.into_values();
    pinned[free] = 0.0;
    let mut u = project_sphere(&RadialFn::new(grid.clone(), pinned)?, mass)?;
    let mut tau = opts.step;
    let mut out = Descent {
        u: u.clone(),
        value: f64::INFINITY,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
        reached_target: false,
        blocked: false,
    };
    // previous (projected gradient, preconditioned projected gradient, direction)
    let mut history: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for it in 0..=opts.max_iter {
        let (f, g) = obj.value_grad(&u)?;
        if !f.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("objective not finite at iteration {it}")));
        }
        let lambda = tangent_multiplier(&u, &g);
        // metric on the free nodes
        let kappa = obj.stiffness(&u)?;
        let mut diag = vec![0.0; free];
        let mut off = vec![0.0; free - 1];
        let cells = grid.cell_measures();
        let mut quad = 0.0;
        let d = u.derivative();
        for k in 0..n - 1 {
            let h = grid.cell_width(k);
            let a = kappa[k] * cells[k] / (h * h);
            diag[k] += a;
            if k + 1 < free {
                diag[k + 1] += a;
                off[k] = -a;
            }
            quad += a * d[k] * d[k] * h * h;
        }
        let wu: Vec<f64> = u.values()[..free].iter().zip(&w).map(|(a, b)| a * b).collect();
        let uwu = dot(&wu, &u.values()[..free]);
        let s = obj.shift(&u, lambda) + if quad > 0.0 { 0.1 * quad / uwu } else { 1.0 };
        for i in 0..free {
            diag[i] += s * w[i];
        }
        let y1 = solve_tridiagonal(&diag, &off, &g[..free]);
        let y2 = solve_tridiagonal(&diag, &off, &wu);
        let mu = dot(&wu, &y1) / dot(&wu, &y2);
        let z: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - mu * b).collect();
        let r: Vec<f64> = g[..free].iter().zip(&wu).map(|(a, b)| a - mu * b).collect();
        // dual (Sobolev) norm of the tangent gradient
        let u_norm = (quad + s * uwu).sqrt();
        let residual =
            dot(&r, &z).max(0.0).sqrt() * u_norm / obj.scale(&u)?.max(f64::MIN_POSITIVE);
        out.u = u.clone();
        out.value = f;
        out.residual = residual;
        out.iterations = it;
        if residual <= opts.tol_grad {
            out.converged = true;
            break;
        }
        if stop_below.is_some_and(|t| f < t) {
            out.reached_target = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }

        let mut dir: Vec<f64> = z.iter().map(|x| -x).collect();
        if let Some((r_prev, z_prev, d_prev)) = &history {
            let num: f64 = r.iter().zip(&z).zip(z_prev).map(|((ri, zi), zp)| ri * (zi - zp)).sum();
            let beta = (num / dot(r_prev, z_prev)).max(0.0);
            if beta.is_finite() && beta > 0.0 {
                for (di, dp) in dir.iter_mut().zip(d_prev) {
                    *di += beta * dp;
                }
                // keep the direction tangent to the sphere
                let c = dot(&wu, &dir) / dot(&wu, &y2);
                for (di, yi) in dir.iter_mut().zip(&y2) {
                    *di -= c * yi;
                }
                if !(dot(&g[..free], &dir) < 0.0) {
                    dir = z.iter().map(|x| -x).collect();
                }
            }
        }
        let slope = dot(&g[..free], &dir);
        if !(slope < 0.0) {
            break;
        }

        tau = (tau * 2.0).min(opts.step * 1e6);
        let mut accepted = false;
        let mut blocked = false;
        while tau > 1e-14 {
            let mut trial_vals: Vec<f64> =
                u.values()[..free].iter().zip(&dir).map(|(a, b)| a + tau * b).collect();
            trial_vals.push(0.0);
            let trial = project_sphere(&u.with_values(trial_vals)?, mass)?;
            if !admissible(&trial)? {
                blocked = true;
                tau *= opts.step_shrink;
                continue;
            }
            blocked = false;
            let ft = obj.value(&trial)?;
            if ft.is_finite() && ft <= f + ARMIJO * tau * slope && ft < f {
                u = trial;
                accepted = true;
                break;
            }
            tau *= opts.step_shrink;
        }
        if !accepted {
            if history.is_some() {
                // retry from a plain Sobolev gradient before giving up
                history = None;
                tau = opts.step;
                continue;
            }
            out.blocked = blocked;
            break;
        }
        history = Some((r, z, dir));
    }
    Ok(out)
}

/// Scale `1/θ` at which the energy of a Gaussian on `S_m` is stationary,
/// clamped to a sane range. Used to size grids.
pub fn natural_length(params: &ProblemParams) -> Result<f64> {
    let grid = Arc::new(RadialGrid::uniform(params.dim, 12.0, 2049)?);
    let gauss = project_sphere(&RadialFn::from_fn(grid, |r| (-r * r).exp())?, params.mass)?;
    let fiber = Fiber::of(&gauss, params)?;
    let theta = match fiber.energy_local_min() {
        Some((theta, _)) => theta,
        None => fiber.argmin().map(|(t, _)| t).unwrap_or(1.0),
    };
    Ok(1.0 / theta.clamp(1e-6, 1e6))
}

pub fn build_grid(params: &ProblemParams, spec: &GridSpec) -> Result<Arc<RadialGrid>> {
    let r_max = match spec.r_max {
        Some(r) => r,
        None => 20.0 * natural_length(params)?,
    };
    Ok(Arc::new(RadialGrid::new(params.dim, r_max, spec.n, spec.spacing)?))
}

/// A seed shape `r ↦ f(r)`, evaluated analytically under dilation.
#[derive(Clone, Copy, Debug)]
struct SeedShape {
    width: f64,
    bump: f64,
    bump_ratio: f64,
}

impl SeedShape {
    fn eval(&self, r: f64) -> f64 {
        let s = r / self.width;
        (-s * s).exp() + self.bump * (-(s / self.bump_ratio).powi(2)).exp()
    }

    /// Gaussians of log-spaced widths; all but the first carry a random
    /// second bump so that restarts are not dilations of each other.
    fn family(count: usize, seed: u64, unit: f64) -> Vec<SeedShape> {
        (0..count)
            .map(|i| {
                let frac = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.5 };
                let width = unit * (0.25f64.ln() + frac * (32f64).ln()).exp() / 1.414;
                if i == 0 {
                    return SeedShape { width: unit, bump: 0.0, bump_ratio: 1.0 };
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                SeedShape {
                    width,
                    bump: rng.gen_range(0.0..0.5),
                    bump_ratio: rng.gen_range(0.3..3.0),
                }
            })
            .collect()
    }

    fn sample(&self, grid: &Arc<RadialGrid>, theta: f64) -> Result<RadialFn> {
        let amp = theta.powf(grid.dim() as f64 / 2.0);
        RadialFn::from_fn(grid.clone(), |r| amp * self.eval(theta * r))
    }
}

/// Dilation of a seed chosen along its fiber: the lowest local minimum of
/// `θ ↦ E(u_θ)` if there is one with `K > floor`, else the smallest θ meeting
/// the floor. Kept within what the grid can resolve.
fn fiber_seed(
    shape: &SeedShape,
    grid: &Arc<RadialGrid>,
    params: &ProblemParams,
    kinetic_floor: Option<f64>,
) -> Result<RadialFn> {
    let base = project_sphere(&shape.sample(grid, 1.0)?, params.mass)?;
    let fiber = Fiber::of(&base, params)?;
    let mut theta = match fiber.energy_local_min() {
        Some((t, _)) => t,
        None => fiber.argmin().map(|(t, _)| t).unwrap_or(1.0),
    };
    if let Some(floor) = kinetic_floor {
        if fiber.kinetic(theta) <= floor {
            theta = fiber.theta_for_kinetic(2.0 * floor)?;
        }
    }
    let h = grid.cell_width(0).max(grid.r_max() / grid.len() as f64);
    let widest = shape.width * shape.bump_ratio.max(1.0);
    let narrowest = shape.width * shape.bump_ratio.min(1.0);
    let theta = theta.clamp(widest * 6.0 / grid.r_max(), narrowest / (10.0 * h));
    project_sphere(&shape.sample(grid, theta)?, params.mass)
}

fn finish(
    d: Descent,
    params: &ProblemParams,
    constraint: Constraint,
    restart: usize,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    let report = EnergyReport::from_norms(&Norms::of(&d.u, params)?, params)?;
    Ok(MinimizeResult {
        boundary_decayed: outer_decayed(&d.u),
        energy: report.energy,
        lambda: report.lambda,
        grad_tangent_norm: d.residual,
        iterations: d.iterations,
        converged: d.converged,
        constraint,
        vanishing: report.energy >= -opts.tol_neg(params.mass),
        restart,
        report,
        u: d.u,
    })
}

/// With `u(r_max)` pinned to zero, a too-small domain shows up as mass piling
/// against the wall: require `|u| < 1e−6 max|u|` on the outer 5% of radii.
pub fn outer_decayed(u: &RadialFn) -> bool {
    let cut = 0.95 * u.grid().r_max();
    let peak = u.max_abs();
    u.grid()
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(r, _)| **r >= cut)
        .all(|(_, v)| v.abs() <= 1e-6 * peak)
}

/// Lowest energy wins; near-ties go to the smaller `K`.
fn pick_best(results: Vec<MinimizeResult>, tol: f64) -> Option<MinimizeResult> {
    results.into_iter().reduce(|best, r| {
        if r.energy < best.energy - tol
            || ((r.energy - best.energy).abs() <= tol && r.report.kinetic < best.report.kinetic)
        {
            r
        } else {
            best
        }
    })
}

fn check_minimizable(params: &ProblemParams) -> Result<()> {
    params.validate()?;
    params.require_coercive()?;
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParams("alpha must be positive".into()));
    }
    Ok(())
}

fn global_with_grid(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    opts: &MinimizeOptions,
    stop_below: Option<f64>,
) -> Result<Vec<MinimizeResult>> {
    let unit = natural_length(params)?;
    let shapes = SeedShape::family(opts.restarts, opts.seed, unit);
    let obj = EnergyObjective { params: *params };
    shapes
        .par_iter()
        .enumerate()
        .map(|(i, shape)| {
            let seed = fiber_seed(shape, grid, params, None)?;
            let d = descend(&obj, seed, params.mass, opts, &|_| Ok(true), stop_below)?;
            finish(d, params, Constraint::Global, i, opts)
        })
        .collect()
}

/// Global minimization of the energy on `S_m` by multistart projected descent.
///
/// When no restart reaches an energy below `−tol_neg` the result is marked
/// `vanishing`: the infimum is zero and minimizing sequences spread out.
pub fn global_minimize(params: &ProblemParams, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    check_minimizable(params)?;
    opts.validate()?;
    let grid = build_grid(params, &opts.grid)?;
    global_minimize_on(params, &grid, opts)
}

pub fn global_minimize_on(
    params: &ProblemParams,
    grid: &Arc<RadialGrid>,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    check_minimizable(params)?;
    let results = global_with_grid(params, grid, opts, None)?;
    let best = pick_best(results, opts.tol_neg(params.mass))
        .ok_or_else(|| Error::Numerical("no restarts ran".into()))?;
    if !best.converged && !best.vanishing {
        log::warn!(
            "global descent stopped after {} iterations with residual {:.3e}",
            best.iterations,
            best.grad_tangent_norm
        );
    }
    Ok(best)
}

/// Minimization over `{u ∈ S_m : K(u) > ρ/2}`; steps leaving the set are rejected.
pub fn local_minimize(
    params: &ProblemParams,
    rho: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    check_minimizable(params)?;
    params.require_intermediate()?;
    opts.validate()?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParams("rho must be positive".into()));
    }
    let grid = build_grid(params, &opts.grid)?;
    let unit = natural_length(params)?;
    let shapes = SeedShape::family(opts.restarts, opts.seed, unit);
    let obj = EnergyObjective { params: *params };
    let floor = rho / 2.0;
    let admissible = move |u: &RadialFn| -> Result<bool> {
        Ok(crate::functionals::kinetic(u, params)? > floor)
    };
    let results: Vec<Result<MinimizeResult>> = shapes
        .par_iter()
        .enumerate()
        .map(|(i, shape)| {
            let seed = fiber_seed(shape, &grid, params, Some(rho))?;
            let d = descend(&obj, seed, params.mass, opts, &admissible, None)?;
            let blocked = d.blocked;
            let r = finish(d, params, Constraint::LocalAboveRho(rho), i, opts)?;
            if blocked || r.report.kinetic < floor * (1.0 + 1e-3) {
                return Err(Error::NoLocalMinimizer(format!(
                    "restart {i} ended on the boundary K = {floor}"
                )));
            }
            Ok(r)
        })
        .collect();
    let ok: Vec<MinimizeResult> = results.into_iter().filter_map(|r| r.ok()).collect();
    let mut best = pick_best(ok, opts.tol_neg(params.mass)).ok_or_else(|| {
        Error::NoLocalMinimizer(format!("every seed collapsed to K = rho/2 with rho = {rho}"))
    })?;
    best.vanishing = false;
    Ok(best)
}

/// Random smooth nonnegative profiles on a grid (sums of Gaussian bumps).
pub fn random_profiles(grid: &Arc<RadialGrid>, count: usize, seed: u64) -> Result<Vec<RadialFn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = grid.r_max();
    (0..count)
        .map(|_| {
            let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..4))
                .map(|_| {
                    (
                        rng.gen_range(0.1..1.0),
                        r_max * rng.gen_range(0.01..0.08),
                        r_max * rng.gen_range(0.0..0.3),
                    )
                })
                .collect();
            RadialFn::from_fn(grid.clone(), |r| {
                bumps
                    .iter()
                    .map(|(a, w, c)| a * (-((r - c) / w).powi(2)).exp())
                    .sum()
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho_hat: f64,
    pub samples: usize,
    /// Smallest observed `E/K` and `Q/K` over all checked points.
    pub min_energy_ratio: f64,
    pub min_q_ratio: f64,
}

/// Largest `ρ` (by halving) such that every sampled `u` with `‖u‖₂² ≤ m` and
/// `K(u) ≤ ρ` satisfies `E ≥ K/(2q)` and `Q ≥ K/2`. Each sample is checked
/// at several kinetic levels along its exact dilation orbit.
pub fn estimate_rho_hat(params: &ProblemParams, samples: usize, seed: u64) -> Result<RhoEstimate> {
    params.require_intermediate()?;
    let grid = Arc::new(RadialGrid::uniform(params.dim, 20.0, 1025)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let fibers: Vec<Fiber> = random_profiles(&grid, samples.max(200), seed)?
        .into_iter()
        .map(|u| {
            let frac: f64 = rng.gen_range(0.1..=1.0);
            let u = project_sphere(&u, frac * params.mass)?;
            Fiber::of(&u, params)
        })
        .collect::<Result<_>>()?;
    let levels: Vec<f64> = (0..60).map(|k| 0.5f64.powi(k)).collect();
    let mut rho = 1e6;
    for _ in 0..400 {
        let mut ok = true;
        let (mut e_min, mut q_min) = (f64::INFINITY, f64::INFINITY);
        'outer: for fiber in &fibers {
            for &level in &levels {
                let target = level * rho;
                let theta = fiber.theta_for_kinetic(target)?;
                let n = fiber.norms_at(theta);
                let k = n.kinetic();
                let e_ratio = n.energy(params) / k;
                let q_ratio = n.q_functional(params) / k;
                e_min = e_min.min(e_ratio);
                q_min = q_min.min(q_ratio);
                if e_ratio < 1.0 / (2.0 * params.q) || q_ratio < 0.5 {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return Ok(RhoEstimate {
                rho_hat: rho,
                samples: fibers.len(),
                min_energy_ratio: e_min,
                min_q_ratio: q_min,
            });
        }
        rho *= 0.5;
    }
    Err(Error::Numerical("no admissible rho found".into()))
}

fn quotient_seeds(grid: &Arc<RadialGrid>, count: usize) -> Result<Vec<RadialFn>> {
    let shapes: [&dyn Fn(f64) -> f64; 4] = [
        &|r: f64| (-r * r).exp(),
        &|r: f64| 1.0 / r.cosh(),
        &|r: f64| (1.0 + r * r).powf(-2.0),
        &|r: f64| (-r).exp() * (1.0 + r),
    ];
    (0..count)
        .map(|i| RadialFn::from_fn(grid.clone(), shapes[i % shapes.len()]))
        .collect()
}

fn minimize_log_quotient(
    obj_for: &(dyn Fn(&RadialFn) -> Result<LogQuotientObjective> + Sync),
    grid: &Arc<RadialGrid>,
    mass: f64,
    opts: &MinimizeOptions,
) -> Result<Vec<(RadialFn, f64, bool)>> {
    quotient_seeds(grid, opts.restarts.max(1))?
        .into_par_iter()
        .map(|seed| {
            let seed = project_sphere(&seed, mass)?;
            let obj = obj_for(&seed)?;
            let d = descend(&obj, seed, mass, opts, &|_| Ok(true), None)?;
            let v = obj.unpenalized(&d.u)?;
            Ok((d.u, v, d.converged))
        })
        .collect()
}

fn quotient_grid(params: &ProblemParams, opts: &MinimizeOptions) -> Result<Arc<RadialGrid>> {
    let r_max = opts.grid.r_max.unwrap_or(30.0);
    Ok(Arc::new(RadialGrid::new(params.dim, r_max, opts.grid.n, opts.grid.spacing)?))
}

/// Estimate of `d(m) = inf{J(u) : u ∈ S_m}` at `m = params.mass`, returned
/// with the profile attaining it.
pub fn estimate_d_profile(params: &ProblemParams, opts: &MinimizeOptions) -> Result<(f64, RadialFn)> {
    params.validate()?;
    params.require_intermediate()?;
    opts.validate()?;
    let (a, b) = j_exponents(params)?;
    let grid = quotient_grid(params, opts)?;
    let p = *params;
    let runs = minimize_log_quotient(
        &|seed| {
            Ok(LogQuotientObjective {
                q_grad: p.q,
                c2: 1.0,
                cq: a,
                cp: -b,
                p: p.p,
                anchor: crate::radial::lp_norm_pow(seed, p.p)?.ln(),
            })
        },
        &grid,
        params.mass,
        opts,
    )?;
    let (u, log_j, _) = runs
        .into_iter()
        .min_by(|x, y| x.1.partial_cmp(&y.1).expect("finite"))
        .ok_or_else(|| Error::Numerical("no seeds".into()))?;
    let d = log_j.exp();
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Numerical(format!("quotient infimum estimate {d} is not positive")));
    }
    Ok((d, u))
}

pub fn estimate_d(params: &ProblemParams, opts: &MinimizeOptions) -> Result<f64> {
    Ok(estimate_d_profile(params, opts)?.0)
}

pub fn estimate_d1(params: &ProblemParams, opts: &MinimizeOptions) -> Result<f64> {
    estimate_d(&params.with_mass(1.0), opts)
}

/// Strength at which the global minimum energy turns negative, by bisection
/// on "some restart reaches energy below `−tol_neg`".
pub fn alpha0_bisect(params: &ProblemParams, opts: &MinimizeOptions) -> Result<f64> {
    params.validate()?;
    params.require_intermediate()?;
    opts.validate()?;
    let tol_neg = opts.tol_neg(params.mass);
    // a Gaussian's own threshold bounds α₀ from above
    let probe_grid = Arc::new(RadialGrid::uniform(params.dim, 12.0, 2049)?);
    let gauss = project_sphere(&RadialFn::from_fn(probe_grid, |r| (-r * r).exp())?, params.mass)?;
    let guess = Fiber::of(&gauss, params)?.sign_threshold(params)?;
    let negative = |alpha: f64| -> Result<bool> {
        let pa = params.with_alpha(alpha);
        let grid = build_grid(&pa, &opts.grid)?;
        let runs = global_with_grid(&pa, &grid, opts, Some(-tol_neg))?;
        Ok(runs.iter().any(|r| r.energy < -tol_neg))
    };
    let mut hi = guess * 1.05;
    let mut expand = 0;
    while !negative(hi)? {
        hi *= 2.0;
        expand += 1;
        if expand > 20 {
            return Err(Error::BracketNotFound(format!("no negative energy up to alpha = {hi}")));
        }
    }
    let mut lo = hi / 2.0;
    expand = 0;
    while negative(lo)? {
        hi = lo;
        lo /= 2.0;
        expand += 1;
        if expand > 40 {
            return Err(Error::BracketNotFound(format!("negative energy down to alpha = {lo}")));
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if negative(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Log of `‖u‖_p / (‖∇u‖_r^ν ‖u‖₂^{1−ν})`.
pub fn gn_log_ratio(u: &RadialFn, p: f64, r: f64) -> Result<f64> {
    use crate::radial::{grad_norm_pow, lp_norm_pow};
    let nu = nu(u.grid().dim(), p, r)?;
    let lp = lp_norm_pow(u, p)?;
    let gr = grad_norm_pow(u, r)?;
    let m = lp_norm_pow(u, 2.0)?;
    Ok(lp.ln() / p - nu * gr.ln() / r - (1.0 - nu) * m.ln() / 2.0)
}

/// Empirical Gagliardo–Nirenberg constant: the largest ratio found by
/// maximizing over profiles. A lower bound on the sharp constant.
pub fn estimate_gn_constant(params: &ProblemParams, r: f64, opts: &MinimizeOptions) -> Result<f64> {
    params.validate()?;
    opts.validate()?;
    let nu = nu(params.dim, params.p, r)?;
    let star = crate::params::CriticalExponent::sobolev(params.dim, r);
    if !star.exceeds(params.p) {
        return Err(Error::InvalidParams(format!("p = {} is not below {r}* = {star}", params.p)));
    }
    let grid = quotient_grid(params, opts)?;
    let p = params.p;
    let runs = minimize_log_quotient(
        &|seed| {
            Ok(LogQuotientObjective {
                q_grad: r,
                c2: 0.0,
                cq: nu / r,
                cp: -1.0 / p,
                p,
                anchor: crate::radial::lp_norm_pow(seed, p)?.ln(),
            })
        },
        &grid,
        1.0,
        opts,
    )?;
    let best = runs
        .iter()
        .map(|(u, _, _)| gn_log_ratio(u, p, r))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MountainPass {
    /// Best (smallest) path maximum found: an upper bound on the minimax level.
    pub level: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    /// Path parameter where the best path peaks.
    pub t_peak: f64,
    /// Energy of the path endpoints.
    pub endpoint_energies: (f64, f64),
    pub barrier: f64,
}

/// Upper bound on the mountain-pass level between a low-`K` and a high-`K`
/// point of `S_m` separated by the level set `K = ρ̂`.
pub fn mountain_pass_estimate(
    params: &ProblemParams,
    u_low: &RadialFn,
    u_high: &RadialFn,
    rho_hat: f64,
) -> Result<MountainPass> {
    if !Arc::ptr_eq(u_low.grid(), u_high.grid()) && u_low.grid() != u_high.grid() {
        return Err(Error::GridMismatch("endpoints live on different grids".into()));
    }
    let barrier = rho_hat / (2.0 * params.q);
    let m = params.mass;
    let energy = |u: &RadialFn| crate::functionals::energy(u, params);
    let kin = |u: &RadialFn| crate::functionals::kinetic(u, params);
    let geometry = |low: &RadialFn, high: &RadialFn| -> Result<Option<(f64, f64)>> {
        let (el, eh) = (energy(low)?, energy(high)?);
        let ok = kin(low)? < rho_hat && kin(high)? > rho_hat && el < barrier && eh < barrier;
        Ok(ok.then_some((el, eh)))
    };
    let low0 = project_sphere(u_low, m)?;
    let high0 = project_sphere(u_high, m)?;
    if geometry(&low0, &high0)?.is_none() {
        return Err(Error::NotMountainPass(format!(
            "need K(low) < {rho_hat} < K(high) and both energies below {barrier}"
        )));
    }
    let sigmas = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let mut best: Option<MountainPass> = None;
    for &sa in &sigmas {
        let low = match sigma_star(&low0, sa).and_then(|u| project_sphere(&u, m)) {
            Ok(u) => u,
            Err(_) => continue,
        };
        for &sb in &sigmas {
            let high = match sigma_star(&high0, sb).and_then(|u| project_sphere(&u, m)) {
                Ok(u) => u,
                Err(_) => continue,
            };
            let Some(ends) = geometry(&low, &high)? else { continue };
            let mut peak = (f64::NEG_INFINITY, 0.0);
            for i in 0..=40 {
                let t = i as f64 / 40.0;
                let mix: Vec<f64> = low
                    .values()
                    .iter()
                    .zip(high.values())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                let e = match project_sphere(&low.with_values(mix)?, m) {
                    Ok(v) => energy(&v)?,
                    // the path passes through zero: not a valid path in S_m
                    Err(_) => f64::INFINITY,
                };
                if e > peak.0 {
                    peak = (e, t);
                }
            }
            if best.is_none_or(|b| peak.0 < b.level) {
                best = Some(MountainPass {
                    level: peak.0,
                    sigma_low: sa,
                    sigma_high: sb,
                    t_peak: peak.1,
                    endpoint_energies: ends,
                    barrier,
                });
            }
        }
    }
    best.ok_or_else(|| Error::NotMountainPass("no admissible path in the family".into()))
}

/// Low-`K` partner for a mountain-pass path: the dilation of `u` whose `K`
/// equals `fraction · ρ̂`, resampled on the same grid.
pub fn low_partner(
    params: &ProblemParams,
    u: &RadialFn,
    rho_hat: f64,
    fraction: f64,
) -> Result<RadialFn> {
    let fiber = Fiber::of(u, params)?;
    let theta = fiber.theta_for_kinetic(fraction * rho_hat)?;
    project_sphere(&crate::scaling::theta_scale(u, theta)?, params.mass)
}

/// Regime gate used by callers that want a readable explanation.
pub fn regime_note(params: &ProblemParams) -> String {
    let regime = crate::params::classify_regime(params);
    match regime.kind {
        RegimeKind::Intermediate => "intermediate".into(),
        kind => format!("{kind}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{energy, energy_report};

    fn opts_fast() -> MinimizeOptions {
        MinimizeOptions { restarts: 2, grid: GridSpec { n: 1025, ..GridSpec::default() }, ..Default::default() }
    }

    #[test]
    fn projection() {
        let g = Arc::new(RadialGrid::uniform(3, 8.0, 256).unwrap());
        let u = RadialFn::from_fn(g.clone(), |r| (-r * r).exp()).unwrap();
        let v = project_sphere(&u, 2.0).unwrap();
        assert!((v.mass() - 2.0).abs() < 1e-12);
        let w = project_sphere(&v, 2.0).unwrap();
        for (a, b) in v.values().iter().zip(w.values()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
        assert!(matches!(project_sphere(&RadialFn::zeros(g), 1.0), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn tridiagonal_solver() {
        let diag = [4.0, 5.0, 6.0, 7.0];
        let off = [1.0, -2.0, 0.5];
        let x = [1.0, -1.0, 2.0, 0.25];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { off[i - 1] * x[i - 1] } else { 0.0 }
                    + if i < 3 { off[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let y = solve_tridiagonal(&diag, &off, &rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn large_alpha_has_negative_energy_and_positive_multiplier() {
        let p = ProblemParams::new(1, 3.0, 4.5, 50.0, 1.0).unwrap();
        let res = global_minimize(&p, &opts_fast()).unwrap();
        assert!(res.converged, "residual {}", res.grad_tangent_norm);
        assert!(res.energy < 0.0 && res.lambda > 0.0);
        assert!((res.u.mass() - 1.0).abs() < 1e-10);
        assert!(res.report.q_residual() < 1e-3);
        assert!(res.report.pohozaev_residual() < 1e-3);
        let fiber = Fiber::of(&res.u, &p).unwrap();
        assert!(fiber.psi(1.0) < 0.0);
        // one sign
        let vals = res.u.values();
        assert!(vals.iter().all(|&v| v >= 0.0) || vals.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn tiny_alpha_vanishes() {
        let p = ProblemParams::new(1, 3.0, 4.5, 1e-4, 1.0).unwrap();
        let res = global_minimize(&p, &opts_fast()).unwrap();
        assert!(res.vanishing);
        assert!(res.energy >= -opts_fast().tol_neg(1.0));
    }

    #[test]
    fn descent_never_increases_energy() {
        let p = ProblemParams::new(1, 3.0, 7.0, 3.0, 1.0).unwrap();
        let grid = Arc::new(RadialGrid::uniform(1, 20.0, 513).unwrap());
        let obj = EnergyObjective { params: p };
        let mut u = project_sphere(&RadialFn::from_fn(grid, |r| (-r * r / 4.0).exp()).unwrap(), 1.0).unwrap();
        let mut e = energy(&u, &p).unwrap();
        let one = MinimizeOptions { max_iter: 1, ..opts_fast() };
        for _ in 0..30 {
            let d = descend(&obj, u.clone(), 1.0, &one, &|_| Ok(true), None).unwrap();
            let e2 = energy(&d.u, &p).unwrap();
            assert!(e2 <= e);
            assert!((d.u.mass() - 1.0).abs() < 1e-10);
            e = e2;
            u = d.u;
        }
    }

    #[test]
    fn rho_hat_lower_bounds_hold() {
        let p = ProblemParams::new(1, 3.0, 7.0, 2.0, 1.0).unwrap();
        let est = estimate_rho_hat(&p, 200, 1).unwrap();
        assert!(est.rho_hat > 0.0);
        assert!(est.min_energy_ratio >= 1.0 / 6.0 && est.min_q_ratio >= 0.5);
    }

    #[test]
    fn gn_ratio_invariances() {
        let g = Arc::new(RadialGrid::uniform(1, 30.0, 4097).unwrap());
        let u = RadialFn::from_fn(g, |r| 1.0 / r.cosh()).unwrap();
        let base = gn_log_ratio(&u, 4.0, 2.0).unwrap();
        assert!((gn_log_ratio(&u.scaled(3.7), 4.0, 2.0).unwrap() - base).abs() < 1e-10);
        let v = crate::scaling::theta_scale(&u, 1.3).unwrap();
        assert!((gn_log_ratio(&v, 4.0, 2.0).unwrap() - base).abs() < 1e-3);
    }

    #[test]
    fn local_rejects_wrong_regime() {
        let p = ProblemParams::new(1, 3.0, 4.5, 1.0, 1.0).unwrap();
        assert!(matches!(local_minimize(&p, 1.0, &opts_fast()), Err(Error::Regime(_))));
        let _ = energy_report;
    }
}
