use std::sync::Arc;

use proptest::prelude::*;

use qlap_core::functionals::{energy, Norms};
use qlap_core::minimize::project_sphere;
use qlap_core::params::{classify_regime, ProblemParams, RegimeKind};
use qlap_core::radial::{lp_norm_pow, rearrange_decreasing, superlevel_measure, RadialFn, RadialGrid};
use qlap_core::scaling::{d_mass_exponent, theta_scale, Fiber};

fn bump(dim: usize, n: usize, width: f64, center: f64) -> RadialFn {
    let grid = Arc::new(RadialGrid::uniform(dim, 20.0, n).unwrap());
    RadialFn::from_fn(grid, |r| (-((r - center) / width).powi(2)).exp()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dilation_keeps_mass(dim in 1usize..=3, width in 0.7f64..2.0, theta in 0.5f64..3.0) {
        let u = bump(dim, 4096, width, 0.0);
        let v = theta_scale(&u, theta).unwrap();
        prop_assert!(rel(v.mass(), u.mass()) < 1e-6);
    }

    #[test]
    fn projection_hits_the_sphere(dim in 1usize..=4, m in 0.01f64..50.0, center in 0.0f64..4.0) {
        let u = bump(dim, 1024, 1.0, center);
        let v = project_sphere(&u, m).unwrap();
        prop_assert!(rel(v.mass(), m) < 1e-12);
    }

    #[test]
    fn fiber_energy_matches_resampling(theta in 0.6f64..2.0, alpha in 0.5f64..5.0) {
        let pr = ProblemParams::new(3, 3.0, 4.0, alpha, 1.0).unwrap();
        let u = bump(3, 4096, 1.0, 0.0);
        let fiber = Fiber::of(&u, &pr).unwrap();
        let direct = energy(&theta_scale(&u, theta).unwrap(), &pr).unwrap();
        let predicted = fiber.energy(theta);
        prop_assert!((direct - predicted).abs() < 1e-4 * (1.0 + direct.abs()));
    }

    #[test]
    fn multiplier_turns_pohozaev_into_minus_q(
        dim in 1usize..=5,
        q in 2.2f64..5.0,
        p in 2.2f64..8.0,
        alpha in 0.1f64..10.0,
        grad2 in 0.1f64..10.0,
        gradq in 0.1f64..10.0,
        lp in 0.1f64..10.0,
        mass in 0.1f64..10.0,
    ) {
        let pr = ProblemParams::new(dim, q, p, alpha, mass).unwrap();
        let norms = Norms { grad2, gradq, lp, mass };
        let lambda = norms.lagrange_multiplier(&pr).unwrap();
        let (pz, qf) = (norms.pohozaev(&pr, lambda), norms.q_functional(&pr));
        prop_assert!((pz + qf).abs() < 1e-10 * (1.0 + pz.abs() + qf.abs()));
    }

    #[test]
    fn quotient_obeys_amplitude_law(dim in 1usize..=3, c in 0.3f64..3.0) {
        // amplitude c multiplies the mass by c², so J(c u) = c^{2e} J(u)
        let (q, p) = (3.0, if dim == 1 { 7.0 } else { 2.0 + 4.0 / dim as f64 + 0.5 });
        let pr = ProblemParams::new(dim, q, p, 1.0, 1.0).unwrap();
        let u = bump(dim, 1024, 1.0, 0.0);
        let j = Norms::of(&u, &pr).unwrap().quotient_j(&pr).unwrap();
        let jc = Norms::of(&u.scaled(c), &pr).unwrap().quotient_j(&pr).unwrap();
        let e = d_mass_exponent(&pr);
        prop_assert!(rel(jc, c.powf(2.0 * e) * j) < 1e-10);
    }

    #[test]
    fn rearrangement_preserves_norms(
        dim in 1usize..=3,
        centers in proptest::collection::vec(0.0f64..6.0, 1..4),
    ) {
        let grid = Arc::new(RadialGrid::uniform(dim, 12.0, 2048).unwrap());
        let u = RadialFn::from_fn(grid, |r| {
            centers.iter().enumerate().map(|(i, c)| (1.0 + i as f64) * (-(r - c).powi(2)).exp()).sum()
        }).unwrap();
        let star = rearrange_decreasing(&u);
        // equimeasurable up to one cell of measure
        let cell = u.grid().weights().iter().cloned().fold(0.0, f64::max);
        let peak = u.max_abs();
        prop_assert_eq!(star.max_abs(), peak);
        for k in 0..50 {
            let t = peak * k as f64 / 50.0;
            let gap = (superlevel_measure(&star, t) - superlevel_measure(&u, t)).abs();
            prop_assert!(gap <= cell * (1.0 + 1e-12), "level {}: gap {} vs cell {}", t, gap, cell);
        }
        for s in [2.0, 3.0, 4.5] {
            let gap = (lp_norm_pow(&star, s).unwrap() - lp_norm_pow(&u, s).unwrap()).abs();
            prop_assert!(gap <= cell * peak.powf(s));
        }
        prop_assert!(star.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn regime_follows_critical_exponents(dim in 1usize..=6, q in 2.1f64..6.0, t in 0.02f64..0.98) {
        let n = dim as f64;
        let (p2, pq) = (2.0 + 4.0 / n, q * (1.0 + 2.0 / n));
        let inside = ProblemParams::new(dim, q, p2 + t * (pq - p2), 1.0, 1.0).unwrap();
        prop_assert_eq!(classify_regime(&inside).kind, RegimeKind::Intermediate);
        let below = ProblemParams::new(dim, q, 2.0 + t * (p2 - 2.0), 1.0, 1.0).unwrap();
        prop_assert_eq!(classify_regime(&below).kind, RegimeKind::Subcritical);
        let above = ProblemParams::new(dim, q, pq * (1.0 + t), 1.0, 1.0).unwrap();
        prop_assert_eq!(classify_regime(&above).kind, RegimeKind::Supercritical);
    }
}
