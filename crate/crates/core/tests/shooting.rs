use qlap_core::params::ProblemParams;
use qlap_core::shoot::{
    find_ground_state, flux, partial_mass, shoot, Classification, GroundStateOptions, L2Mass, ShootConfig,
};

fn params(dim: usize, q: f64, p: f64) -> ProblemParams {
    ProblemParams::new(dim, q, p, 1.0, 1.0).unwrap()
}

/// Composite Simpson on `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn flux_balance_at_zero_multiplier() {
    let pr = params(3, 3.0, 4.0);
    let cfg = ShootConfig { lambda: 0.0, u0: 0.8, r_max: 6.0, ..Default::default() };
    let res = shoot(&cfg, &pr).unwrap();
    let traj = &res.profile;
    let (a, b) = (traj.r[0], 0.9 * traj.end());
    let state = |r: f64| traj.eval(r).expect("inside trajectory");
    let source = simpson(
        |r| {
            let (u, _) = state(r);
            -r * r * u.abs().powf(pr.p - 2.0) * u
        },
        a,
        b,
        40000,
    );
    let change = flux(b, state(b).1, &pr) - flux(a, state(a).1, &pr);
    let scale = traj.r.iter().zip(&traj.v).map(|(&r, &v)| flux(r, v, &pr).abs()).fold(0.0, f64::max);
    assert!((change - source).abs() < 1e-6 * scale, "flux change {change}, source integral {source}");
}

#[test]
fn classification_is_stable_under_tolerance_change() {
    let pr = params(3, 3.0, 4.0);
    for (u0, lambda) in [(0.2, 1.0), (1.0, 1.0), (4.0, 1.0), (0.5, 0.0), (8.0, 0.0)] {
        let base = ShootConfig { lambda, u0, r_max: 25.0, ..Default::default() };
        let loose = ShootConfig { tol_step: 1.1 * base.tol_step, ..base };
        let (x, y) = (shoot(&base, &pr).unwrap(), shoot(&loose, &pr).unwrap());
        match (x.classification, y.classification) {
            (Classification::Crossing(r1), Classification::Crossing(r2)) => {
                assert!((r1 - r2).abs() < 1e-6 * r1, "u0={u0}: crossing at {r1} vs {r2}");
            }
            (a, b) => assert_eq!(
                std::mem::discriminant(&a),
                std::mem::discriminant(&b),
                "u0={u0}, lambda={lambda}: {a:?} vs {b:?}"
            ),
        }
    }
}

#[test]
fn ground_state_mass_is_cauchy() {
    let gs = find_ground_state(&params(1, 3.0, 4.5), 1.0, &GroundStateOptions::default()).unwrap();
    let res = &gs.result;
    let Some(L2Mass::Finite(total)) = res.l2_mass else { panic!("{:?}", res.l2_mass) };
    let partial: Vec<f64> = (1..=40).map(|k| partial_mass(res, k as f64).unwrap()).collect();
    assert!(partial.windows(2).all(|w| w[1] >= w[0]));
    let steps: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps[10..].windows(2).all(|w| w[1] <= w[0]));
    assert!((partial[39] - total).abs() < 1e-10 * total);
}

#[test]
fn three_dimensional_ground_state_certificates() {
    let gs = find_ground_state(&params(3, 3.0, 4.0), 1.0, &GroundStateOptions::default()).unwrap();
    let res = &gs.result;
    assert!(matches!(res.classification, Classification::Decaying));
    assert!((res.eval(0.0) - res.u0).abs() < 1e-12 * res.u0);
    let (lo, hi) = gs.bracket;
    assert!(lo <= res.u0 && res.u0 <= hi && (hi - lo) < 1e-9 * hi);
    // positive and radially decreasing on the resolved range
    let u: Vec<f64> = (0..400).map(|k| res.eval(k as f64 * res.resolved / 400.0)).collect();
    assert!(u.iter().all(|&x| x > 0.0));
    assert!(u.windows(2).all(|w| w[1] <= w[0]));
    assert!(res.pohozaev_residual.unwrap() < 1e-3);
    let lam = res.mapped_multiplier.unwrap();
    assert!((lam - 1.0).abs() < 1e-2, "mapped multiplier {lam}");
    assert!(matches!(res.l2_mass, Some(L2Mass::Finite(_))));
}

#[test]
fn zero_mass_profile_decays_like_fundamental_solution() {
    let gs = find_ground_state(&params(5, 4.0, 4.0), 0.0, &GroundStateOptions::default()).unwrap();
    let slope = gs.result.decay.and_then(|d| d.slope()).unwrap();
    assert!((slope + 3.0).abs() < 0.05, "slope {slope}");
    assert!(gs.result.f_drift < 1e-8);
}
