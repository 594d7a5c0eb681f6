use kccstab::kcc::JacobiClass;
use kccstab::linstab::LinearClass;
use kccstab::models::ModelName;
use kccstab::sweep::{run_sweep, sweep_row, to_csv, ParamRange, RegionRow, SweepSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(model: ModelName, ranges: &[(&str, f64, f64, f64)]) -> SweepSpec {
    let ranges = ranges
        .iter()
        .map(|&(n, lo, hi, step)| ParamRange::new(n, lo, hi, step).unwrap())
        .collect();
    SweepSpec::new(model, ranges)
}

fn near_boundary(r: &RegionRow) -> bool {
    r.flags.iter().any(|f| f == "near_boundary" || f == "singular")
}

/// Parameter values where the class pair differs from the previous row.
fn transitions(rows: &[RegionRow]) -> Vec<f64> {
    let mut out = vec![];
    let mut prev: Option<(LinearClass, JacobiClass)> = None;
    for r in rows {
        let (Some(l), Some(j)) = (r.linear_class, r.jacobi_class) else {
            continue;
        };
        if near_boundary(r) {
            continue;
        }
        if prev.is_some_and(|p| p != (l, j)) {
            out.push(r.params[0].1);
        }
        prev = Some((l, j));
    }
    out
}

#[test]
fn rows_do_not_depend_on_evaluation_order() {
    let s = spec(ModelName::Brane, &[("gamma", -1.0, 1.5, 0.05)]);
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), s.len());
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    for i in order {
        assert_eq!(sweep_row(&s, i), rows[i], "row {i}");
    }
    // and repeated runs serialise identically
    assert_eq!(to_csv(&s, &rows), to_csv(&s, &run_sweep(&s).unwrap()));
}

#[test]
fn class_pairs_follow_the_region_correspondence() {
    let sweeps = [
        spec(ModelName::Brusselator, &[("a", 0.1, 5.0, 0.1), ("b", 0.1, 5.0, 0.1)]),
        spec(ModelName::Brane, &[("gamma", -3.0, 3.0, 0.01)]),
        spec(ModelName::Sphere, &[("gamma", 1.01, 2.0, 0.01)]),
        spec(ModelName::DarkEnergy, &[("lambda", 1.8, 3.0, 0.01)]),
    ];
    for s in &sweeps {
        for r in run_sweep(s).unwrap() {
            let (Some(det), Some(delta), Some(l), Some(j)) = (r.det, r.discriminant, r.linear_class, r.jacobi_class)
            else {
                continue;
            };
            if near_boundary(&r) {
                continue;
            }
            let want_j = if delta < 0.0 { JacobiClass::JacobiStable } else { JacobiClass::JacobiUnstable };
            assert_eq!(j, want_j, "{:?} {:?}", s.model, r);
            if det < 0.0 {
                assert_eq!(l, LinearClass::Saddle, "{:?}", r);
            } else if delta < 0.0 {
                assert!(matches!(l, LinearClass::StableFocus | LinearClass::UnstableFocus), "{r:?}");
            } else {
                assert!(matches!(l, LinearClass::StableNode | LinearClass::UnstableNode), "{r:?}");
            }
        }
    }
}

#[test]
fn brusselator_raster_regions() {
    let s = spec(ModelName::Brusselator, &[("a", 0.1, 5.0, 0.1), ("b", 0.1, 5.0, 0.1)]);
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 50 * 50);
    let mut seen = std::collections::BTreeSet::new();
    for r in rows.iter().filter(|r| !near_boundary(r)) {
        let (a, b) = (r.params[0].1, r.params[1].1);
        let tr = b - 1.0 - a;
        let delta = tr * tr - 4.0 * a;
        let want = match (tr > 0.0, delta > 0.0) {
            (true, true) => (LinearClass::UnstableNode, JacobiClass::JacobiUnstable),
            (true, false) => (LinearClass::UnstableFocus, JacobiClass::JacobiStable),
            (false, false) => (LinearClass::StableFocus, JacobiClass::JacobiStable),
            (false, true) => (LinearClass::StableNode, JacobiClass::JacobiUnstable),
        };
        assert_eq!((r.linear_class.unwrap(), r.jacobi_class.unwrap()), want, "a={a} b={b}");
        seen.insert(want.0.as_str());
    }
    assert_eq!(seen.len(), 4);
}

#[test]
fn brane_class_boundaries() {
    let step = 0.01;
    let s = spec(ModelName::Brane, &[("gamma", -3.0, 3.0, step)]);
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 601);
    let t = transitions(&rows);
    let boundary = 0.674_865;
    for want in [-0.5, boundary, 1.0] {
        assert!(
            t.iter().any(|x| (x - want).abs() <= step + 1e-9),
            "no class change near {want}: {t:?}"
        );
    }
    assert_eq!(t.len(), 3, "{t:?}");
}

#[test]
fn dark_energy_focus_transition() {
    let step = 0.001;
    let s = spec(ModelName::DarkEnergy, &[("lambda", 3f64.sqrt(), 3.6f64.sqrt(), step)]);
    let rows = run_sweep(&s).unwrap();
    let t = transitions(&rows);
    assert_eq!(t.len(), 1, "{t:?}");
    let l = t[0];
    // one step in λ is 2λ·step in λ²
    assert!((l * l - 24.0 / 7.0).abs() <= 2.0 * l * step + 1e-9, "λ² = {}", l * l);
    let before = rows.iter().find(|r| r.params[0].1 < l - step && r.linear_class.is_some() && !near_boundary(r)).unwrap();
    let after = rows.iter().rev().find(|r| r.linear_class.is_some()).unwrap();
    assert_eq!(before.linear_class, Some(LinearClass::StableNode));
    assert_eq!(after.linear_class, Some(LinearClass::StableFocus));
    assert_eq!(after.jacobi_class, Some(JacobiClass::JacobiStable));
}

#[test]
fn invalid_rows_are_flagged_not_fatal() {
    let s = spec(ModelName::Sphere, &[("gamma", 0.5, 1.5, 0.25)]);
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].flags.iter().any(|f| f == "invalid_parameter"));
    assert!(rows[4].linear_class.is_some());
}
