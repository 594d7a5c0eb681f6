use std::collections::BTreeMap;

use kccstab::flow::{
    find_limit_cycle, integrate, integrate_deviation, integrate_fixed, CycleClass, CycleOptions, DeviationMode,
    FnSystem, IntegratorOptions,
};
use kccstab::kcc::deviation_curvature;
use kccstab::models::{model_with, ModelName};
use kccstab::sode::{reduce_planar, Eliminate, VectorField2};
use proptest::prelude::*;

fn exp_error(n: usize) -> f64 {
    let mut sys = FnSystem::new(1, |_t: f64, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[0];
        Ok(())
    });
    let end = integrate_fixed(&mut sys, &[1.0], (0.0, 1.0), n).unwrap();
    (end[0] - 1f64.exp()).abs()
}

#[test]
fn fixed_step_error_drops_faster_than_fourth_order() {
    for n in [2, 4, 8] {
        let (coarse, fine) = (exp_error(n), exp_error(2 * n));
        assert!(coarse / fine > 16.0, "n={n}: {coarse:e} / {fine:e}");
    }
}

#[test]
fn adaptive_oscillator_stays_within_tolerance() {
    let mut sys = FnSystem::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
        Ok(())
    });
    for tol in [1e-6, 1e-9, 1e-12] {
        let opts = IntegratorOptions::with_tolerances(tol, tol);
        let tr = integrate(&mut sys, &[1.0, 0.0], (0.0, 10.0), &opts).unwrap();
        for (t, x) in tr.t.iter().zip(&tr.states) {
            assert!((x[0] - t.cos()).abs() <= 1e3 * tol, "tol {tol} t {t}");
            assert!((x[1] + t.sin()).abs() <= 1e3 * tol, "tol {tol} t {t}");
        }
        // dense output between steps
        for k in 0..100 {
            let t = 0.1 * k as f64 + 0.037;
            let x = tr.sample(t).unwrap();
            assert!((x[0] - t.cos()).abs() <= 1e3 * tol, "tol {tol} sample {t}");
        }
    }
}

#[test]
fn brusselator_cycle_multipliers_agree() {
    for (a, db) in [(0.5, 0.3), (1.0, 0.5), (1.0, 1.5), (1.5, 0.8), (2.0, 1.0)] {
        let b = 1.0 + a + db;
        let m = model_with(ModelName::Brusselator, &[("a", a), ("b", b)]).unwrap();
        let seed = [1.5, b / a];
        let r = find_limit_cycle(&m.field, seed, None, &CycleOptions::default())
            .unwrap_or_else(|e| panic!("a={a} b={b}: {e}"));
        assert_eq!(r.class, CycleClass::StableCycle, "a={a} b={b}: {r:?}");
        assert!(r.multiplier.abs() < 1.0);
        assert!((r.multiplier - r.multiplier_secant).abs() <= 1e-3, "a={a} b={b}: {r:?}");
        assert!(r.period > 0.0 && r.closure < 1e-6, "a={a} b={b}: {r:?}");
    }
}

#[test]
fn no_cycle_below_hopf() {
    let m = model_with(ModelName::Brusselator, &[("a", 1.0), ("b", 1.5)]).unwrap();
    let r = find_limit_cycle(&m.field, [1.5, 1.5], None, &CycleOptions::default());
    assert!(r.is_err(), "{r:?}");
}

/// Random quadratic system with a regular fixed point at the origin.
fn system() -> impl Strategy<Value = (VectorField2, [[f64; 2]; 2])> {
    (prop::array::uniform4(-2.0f64..2.0), prop::array::uniform4(-1.0f64..1.0)).prop_filter_map(
        "regular origin",
        |(l, q)| {
            let j = [[l[0], l[1]], [l[2], l[3]]];
            let det = l[0] * l[3] - l[1] * l[2];
            let tr = l[0] + l[3];
            let delta = tr * tr - 4.0 * det;
            if l[2].abs() < 0.2 || det.abs() < 0.1 || delta.abs() < 0.1 {
                return None;
            }
            let f = format!("({:?})*u + ({:?})*v + ({:?})*u^2 + ({:?})*v^2", l[0], l[1], q[0], q[1]);
            let g = format!("({:?})*u + ({:?})*v + ({:?})*u*v + ({:?})*v^2", l[2], l[3], q[2], q[3]);
            Some((VectorField2::parse(&f, &g, BTreeMap::new()).ok()?, j))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn raw_deviation_follows_the_linearisation((vf, j) in system()) {
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let delta = tr * tr - 4.0 * det;
        let s = reduce_planar(&vf, Eliminate::U, 0.0);
        let opts = IntegratorOptions::with_tolerances(1e-11, 1e-13);
        let t_end = 1.5;
        let d = integrate_deviation(&s, &[0.0], &[0.0], &[1.0], DeviationMode::RawVariational, (0.0, t_end), &opts).unwrap();
        // ξ'' − tr ξ' + det ξ = 0, ξ(0) = 0, ξ'(0) = 1
        let exact = if delta > 0.0 {
            let r = delta.sqrt();
            (0.5 * tr * t_end).exp() * (0.5 * r * t_end).sinh() / (0.5 * r)
        } else {
            let w = (-delta).sqrt();
            (0.5 * tr * t_end).exp() * (0.5 * w * t_end).sin() / (0.5 * w)
        };
        let got = d.xi.last().unwrap()[0];
        prop_assert!((got - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "{} vs {}", got, exact);
    }

    #[test]
    fn covariant_growth_follows_sign_of_p((vf, _j) in system()) {
        let s = reduce_planar(&vf, Eliminate::U, 0.0);
        let p = deviation_curvature(&s, &[0.0], &[0.0]).unwrap()[0][0];
        let opts = IntegratorOptions::with_tolerances(1e-11, 1e-13);
        let t_end = 3.0;
        let d = integrate_deviation(&s, &[0.0], &[0.0], &[1.0], DeviationMode::Covariant, (0.0, t_end), &opts).unwrap();
        let coords = d.xi_coordinates.as_ref().unwrap();
        for (t, psi) in d.t.iter().zip(&d.xi) {
            if p > 0.0 {
                let want = (p.sqrt() * t).sinh() / p.sqrt();
                prop_assert!((psi[0] - want).abs() <= 1e-7 * (1.0 + want), "t={} ψ={} want {}", t, psi[0], want);
            } else {
                prop_assert!(psi[0].abs() <= (1.0 + 1e-7) / (-p).sqrt() + 1e-9, "t={} ψ={} P={}", t, psi[0], p);
            }
        }
        prop_assert_eq!(coords.len(), d.xi.len());
    }
}
