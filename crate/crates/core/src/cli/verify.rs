//! Property suite behind `qlap verify`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::functionals::{energy, first_variation, Norms};
use crate::minimize::{global_minimize, random_profiles, GridSpec, MinimizeOptions};
use crate::params::{decay_iteration, liouville_certificate, ProblemParams};
use crate::radial::{RadialFn, RadialGrid};
use crate::scaling::{theta_scale, Fiber};
use crate::shoot::{find_ground_state, integrate_fixed, shoot, GroundStateOptions, ShootConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Check { name: name.into(), passed, detail }
}

fn gaussian(dim: usize, r_max: f64, n: usize) -> Result<RadialFn> {
    RadialFn::from_fn(Arc::new(RadialGrid::uniform(dim, r_max, n)?), |r| (-r * r).exp())
}

pub fn run_suite(quick: bool) -> Vec<Check> {
    let n = if quick { 512 } else { 1024 };
    let mut out = vec![
        check("first_variation", || {
            let grid = Arc::new(RadialGrid::uniform(3, 10.0, n)?);
            let params = ProblemParams::new(3, 3.0, 4.0, 2.0, 1.0)?;
            let us = random_profiles(&grid, 6, 1)?;
            let hs = random_profiles(&grid, 6, 2)?;
            let mut worst: f64 = 0.0;
            for (u, h) in us.iter().zip(&hs) {
                let g = first_variation(u, &params)?;
                let exact: f64 = g.values().iter().zip(h.values()).map(|(a, b)| a * b).sum();
                let eps = 1e-5;
                let plus = energy(&u.with_values(add(u, h, eps))?, &params)?;
                let minus = energy(&u.with_values(add(u, h, -eps))?, &params)?;
                let fd = (plus - minus) / (2.0 * eps);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
            }
            Ok((worst < 1e-6, format!("max relative error {worst:.2e}")))
        }),
        check("dilation_identities", || {
            let u = gaussian(3, 16.0, 4 * n)?;
            let params = ProblemParams::new(3, 3.0, 4.0, 1.0, 1.0)?;
            let base = Norms::of(&u, &params)?;
            let mut worst: f64 = 0.0;
            for theta in [0.5, 1.5, 3.0] {
                let s = Norms::of(&theta_scale(&u, theta)?, &params)?;
                let fiber = Fiber::new(base, &params);
                let pred = fiber.norms_at(theta);
                for (a, b) in [(s.grad2, pred.grad2), (s.gradq, pred.gradq), (s.lp, pred.lp), (s.mass, pred.mass)] {
                    worst = worst.max((a - b).abs() / b.abs());
                }
            }
            Ok((worst < 1e-4, format!("max relative deviation {worst:.2e}")))
        }),
        check("fiber_closed_form", || {
            let u = gaussian(3, 12.0, n)?;
            let params = ProblemParams::new(3, 3.0, 4.0, 2.0, 1.0)?;
            let fiber = Fiber::of(&u, &params)?;
            let (theta, value) = fiber.argmin()?;
            let closed = fiber.psi_min_closed()?;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=20000 {
                let t = (-6.0 + 12.0 * k as f64 / 20000.0).exp();
                let v = fiber.psi(t);
                if v < best.0 {
                    best = (v, t);
                }
            }
            let dt = (best.1 - theta).abs() / theta;
            let dv = (closed - value).abs() / value.abs().max(1.0);
            Ok((dt < 1e-3 && dv < 1e-10, format!("argmin gap {dt:.2e}, closed-form gap {dv:.2e}")))
        }),
        check("decay_iteration", || {
            let t = decay_iteration(5, 3.5)?;
            let ok = t.sequence == [1.5, 1.75, 2.375, 3.9375] && t.steps == 3;
            Ok((ok, format!("{:?} in {} steps", t.sequence, t.steps)))
        }),
        check("first_integral", || {
            let one = ProblemParams::new(1, 3.0, 4.5, 1.0, 1.0)?;
            let three = ProblemParams::new(3, 3.0, 4.0, 1.0, 1.0)?;
            let cfg = ShootConfig { lambda: 1.0, u0: 1.2, r_max: 20.0, ..Default::default() };
            let d1 = shoot(&cfg, &one)?.f_drift;
            let d3 = shoot(&cfg, &three)?.f_drift;
            Ok((d1 < 1e-8 && d3 < 1e-8, format!("drift N=1 {d1:.2e}, N=3 {d3:.2e}")))
        }),
        check("rk4_order", || {
            let params = ProblemParams::new(2, 4.0, 4.0, 1.0, 1.0)?;
            let cfg = ShootConfig { lambda: 0.5, u0: 0.8, r_max: 3.0, ..Default::default() };
            let exact = integrate_fixed(&cfg, &params, 8192)?;
            let err = |s| -> Result<f64> {
                let (u, v) = integrate_fixed(&cfg, &params, s)?;
                Ok((u - exact.0).abs() + (v - exact.1).abs())
            };
            let ratio = err(64)? / err(128)?;
            Ok((ratio >= 8.0, format!("error ratio on step halving {ratio:.2}")))
        }),
        check("ground_state_amplitude", || {
            let params = ProblemParams::new(1, 3.0, 4.5, 1.0, 1.0)?;
            let gs = find_ground_state(&params, 1.0, &GroundStateOptions::default())?;
            let expect = (4.5f64 / 2.0).powf(1.0 / 2.5);
            let gap = (gs.result.u0 - expect).abs() / expect;
            Ok((gap < 1e-8, format!("u(0) = {} (closed form {expect}), gap {gap:.2e}", gs.result.u0)))
        }),
        check("zero_mass_decay", || {
            let params = ProblemParams::new(5, 4.0, 4.0, 1.0, 1.0)?;
            let gs = find_ground_state(&params, 0.0, &GroundStateOptions::default())?;
            let slope = gs.result.decay.and_then(|d| d.slope()).unwrap_or(f64::NAN);
            Ok(((-3.3..=-2.7).contains(&slope), format!("tail slope {slope:.4}")))
        }),
        check("liouville_nonexistence", || {
            let params = ProblemParams::new(3, 3.0, 4.0, 1.0, 1.0)?;
            let found = find_ground_state(&params, 0.0, &GroundStateOptions::default()).is_ok();
            let cert = liouville_certificate(3, 4.0, 3.0).is_certified();
            Ok((!found && cert, format!("solution found: {found}, certified: {cert}")))
        }),
    ];
    out.push(check("minimizer_certificates", || {
        let params = ProblemParams::new(1, 3.0, 4.5, 50.0, 1.0)?;
        let opts = MinimizeOptions {
            restarts: if quick { 1 } else { 4 },
            grid: GridSpec { n: if quick { 1025 } else { 2049 }, ..GridSpec::default() },
            ..Default::default()
        };
        let r = global_minimize(&params, &opts)?;
        let (q, p) = (r.report.q_residual(), r.report.pohozaev_residual());
        let ok = r.converged && r.energy < 0.0 && r.lambda > 0.0 && q < 1e-3 && p < 1e-3;
        Ok((ok, format!("E = {:.6}, lambda = {:.4}, |Q|/K = {q:.1e}, |P| = {p:.1e}", r.energy, r.lambda)))
    }));
    out
}

fn add(u: &RadialFn, h: &RadialFn, eps: f64) -> Vec<f64> {
    u.values().iter().zip(h.values()).map(|(a, b)| a + eps * b).collect()
}
