//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use kccstab::flow::{find_limit_cycle, integrate, integrate_deviation, CycleClass, CycleOptions, DeviationMode, IntegratorOptions};
use kccstab::kcc::{classify_jacobi, default_jacobi_tolerance, deviation_curvature, theorem_check, JacobiClass};
use kccstab::linstab::{analyze_point, eigen2, LinearClass, Matrix2};
use kccstab::models::{
    brusselator_regions, lane_emden_profile, lyapunov_hessian_eigen, model_with, sphere_mass_radius_bound,
    BrusselatorRegion, Model, ModelName,
};
use kccstab::sode::{reduce_planar, Eliminate, VectorField2};
use kccstab::sweep::{evaluate_row, find_threshold, Quantity, ThresholdSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// random planar systems

struct Sample {
    field: VectorField2,
    jacobian: Matrix2,
}

fn random_poly(rng: &mut ChaCha8Rng, lin: [f64; 2]) -> String {
    let mut terms = vec![format!("({:?})*u", lin[0]), format!("({:?})*v", lin[1])];
    for deg in 2..=3 {
        for i in 0..=deg {
            if rng.random_bool(0.5) {
                let c: f64 = rng.random_range(-2.0..2.0);
                terms.push(format!("({c:?})*u^{i}*v^{}", deg - i));
            }
        }
    }
    terms.join(" + ")
}

/// 100 cubic systems with a hyperbolic fixed point at the origin and
/// `|g_u| > 0.1`, coefficients uniform in `[−2, 2]`.
fn random_sample(seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(100);
    while out.len() < 100 {
        let j: Matrix2 = [
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        ];
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() <= 0.1 || (det > 0.0 && tr.abs() <= 0.1) || j[1][0].abs() <= 0.1 {
            continue;
        }
        let f = random_poly(&mut rng, j[0]);
        let g = random_poly(&mut rng, j[1]);
        out.push(Sample {
            field: VectorField2::parse(&f, &g, BTreeMap::new()).expect("generated system parses"),
            jacobian: j,
        });
    }
    out
}

const SAMPLE_SEED: u64 = 20_240_601;

fn theorem_suite() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (k, s) in random_sample(SAMPLE_SEED).iter().enumerate() {
        let j = s.jacobian;
        let tr = j[0][0] + j[1][1];
        let delta = tr * tr - 4.0 * (j[0][0] * j[1][1] - j[0][1] * j[1][0]);
        let chk = theorem_check(&s.field, [0.0, 0.0], Eliminate::U).map_err(err)?;
        let scaled = chk.residual / (1.0 + delta.abs());
        ensure!(scaled <= 1e-6, "system {k}: |4P − Δ| = {:e}, Δ = {delta}", chk.residual);
        ensure!(close(chk.rhs, delta, 1e-12), "system {k}: Δ mismatch {} vs {delta}", chk.rhs);
        worst = worst.max(scaled);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("100 systems, max |4P−Δ|/(1+|Δ|) = {worst:.1e}, {secs:.2} s"))
}

fn corollary_suite() -> Outcome {
    let mut complex = 0;
    for (k, s) in random_sample(SAMPLE_SEED).iter().enumerate() {
        let spray = reduce_planar(&s.field, Eliminate::U, 0.0);
        let p = deviation_curvature(&spray, &[0.0], &[0.0]).map_err(err)?;
        let stable = classify_jacobi(&p, default_jacobi_tolerance(&p)).class == JacobiClass::JacobiStable;
        let is_complex = eigen2(&s.jacobian).iter().any(|e| e.im != 0.0);
        ensure!(stable == is_complex, "system {k}: Jacobi stable {stable}, complex {is_complex}");
        complex += usize::from(is_complex);
    }
    Ok(format!("0 mismatches over 100 systems ({complex} with complex eigenvalues)"))
}

fn brusselator() -> Outcome {
    let probes = [
        (1.0, 5.0, BrusselatorRegion::A, LinearClass::UnstableNode, JacobiClass::JacobiUnstable),
        (1.0, 2.5, BrusselatorRegion::B, LinearClass::UnstableFocus, JacobiClass::JacobiStable),
        (4.0, 4.0, BrusselatorRegion::C, LinearClass::StableFocus, JacobiClass::JacobiStable),
        (4.0, 0.5, BrusselatorRegion::D, LinearClass::StableNode, JacobiClass::JacobiUnstable),
    ];
    for (a, b, region, lin, jac) in probes {
        let r = brusselator_regions(a, b).map_err(err)?;
        ensure!(r.region == region, "({a}, {b}): region {:?}, want {region:?}", r.region);
        let params: BTreeMap<String, f64> = [("a".to_string(), a), ("b".to_string(), b)].into();
        let row = evaluate_row(ModelName::Brusselator, &params, None);
        ensure!(
            row.linear_class == Some(lin) && row.jacobi_class == Some(jac),
            "({a}, {b}): pipeline gives {:?}/{:?}",
            row.linear_class,
            row.jacobi_class
        );
    }
    let m = model_with(ModelName::Brusselator, &[("a", 1.0), ("b", 2.5)]).map_err(err)?;
    let c = find_limit_cycle(&m.field, [1.5, 2.0], None, &CycleOptions::default()).map_err(err)?;
    ensure!(c.class == CycleClass::StableCycle && c.multiplier.abs() < 1.0, "cycle {c:?}");
    let gap = (c.multiplier - c.multiplier_secant).abs();
    ensure!(gap <= 1e-3, "multiplier estimators differ by {gap:e}");
    Ok(format!(
        "regions A–D reproduced; cycle T = {:.4}, M = {:.6} (secant {:.6})",
        c.period, c.multiplier, c.multiplier_secant
    ))
}

fn lane_emden() -> Outcome {
    for n in [2.0, 3.0, 4.0, 5.0, 6.0, 7.0] {
        let m = model_with(ModelName::LaneEmden, &[("n", n)]).map_err(err)?;
        let p = m.p11_generic([0.0, 0.0]).map_err(err)?;
        ensure!((p - 0.25).abs() <= 1e-10, "n={n}: P(X0) = {p}");
    }
    let m = model_with(ModelName::LaneEmden, &[("n", 5.0)]).map_err(err)?;
    let xn = m
        .fixed_points(24)
        .points
        .into_iter()
        .map(|f| f.point)
        .find(|p| p[0] > 0.1)
        .ok_or("X_n not found at n = 5")?;
    ensure!((xn[0] - 0.25f64.powf(0.25)).abs() <= 1e-10, "X_n = {xn:?}");
    let pn = m.p11_generic(xn).map_err(err)?;
    ensure!((pn + 1.0).abs() <= 1e-8, "P(X_n) = {pn}");

    let root = (26.0 + 640f64.sqrt()) / 18.0;
    let spec = ThresholdSpec::new(ModelName::LaneEmden, "n").at("Xin");
    let found = find_threshold(&spec, Quantity::P11, (2.0, 2.99)).map_err(err)?;
    ensure!((found - root).abs() <= 1e-3, "X_in sign change at {found}, want {root}");

    let prof = lane_emden_profile(3.0, 10.0).map_err(err)?;
    let mut worst: f64 = 0.0;
    for i in 0..prof.xi.len() {
        worst = worst.max((prof.p11[i] - (0.25 - 3.0 * prof.milne_u[i] * prof.milne_v[i])).abs());
    }
    ensure!(worst <= 1e-9, "profile identity off by {worst:e}");

    // the n = 5 closed form has to solve the equation before it can serve as oracle
    let theta = |x: f64| (1.0 + x * x / 3.0).powf(-0.5);
    let mut residual: f64 = 0.0;
    for k in 1..=300 {
        let x = 0.01 * k as f64;
        let s = 1.0 + x * x / 3.0;
        let d1 = -(x / 3.0) * s.powf(-1.5);
        let d2 = -s.powf(-1.5) / 3.0 + (x * x / 3.0) * s.powf(-2.5);
        residual = residual.max((d2 + 2.0 * d1 / x + theta(x).powi(5)).abs());
    }
    ensure!(residual < 1e-12, "closed form residual {residual:e}");
    let prof5 = lane_emden_profile(5.0, 3.0).map_err(err)?;
    let mut dev: f64 = 0.0;
    for (x, t) in prof5.xi.iter().zip(&prof5.theta) {
        dev = dev.max((t - theta(*x)).abs());
    }
    let end = *prof5.xi.last().unwrap();
    ensure!((end - 3.0).abs() < 1e-12, "n=5 profile stops at {end}");
    ensure!(dev <= 1e-8, "n=5 profile deviates by {dev:e}");
    Ok(format!(
        "P(X0)=1/4, P(X5)={pn:.10}, X_in root {found:.6}, identity {worst:.1e}, n=5 dev {dev:.1e}"
    ))
}

fn sphere() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let g = 1.0 + k as f64 / 50.0;
        let m = model_with(ModelName::Sphere, &[("gamma", g)]).map_err(err)?;
        let u1 = 2.0 * (g - 1.0) / (g * g + 4.0 * g - 4.0);
        let p = m
            .fixed_points(24)
            .points
            .into_iter()
            .map(|f| f.point)
            .find(|p| (p[0] - u1).abs() < 1e-8 && (p[1] - u1).abs() < 1e-8)
            .ok_or(format!("γ={g}: (u1, v1) not found"))?;
        let got = m.p11_generic(p).map_err(err)?;
        let want = (g * g - 44.0 * g + 36.0) / (4.0 * g * g);
        ensure!(close(got, want, 1e-8), "γ={g}: P = {got}, want {want}");
        let lin = analyze_point(&m.field, p).map_err(err)?;
        ensure!(lin.discriminant < 0.0, "γ={g}: Δ = {}", lin.discriminant);
        worst = worst.max((got - want).abs());
    }
    let bound = sphere_mass_radius_bound(2.0).map_err(err)?;
    ensure!((bound - 9.0 / 16.0).abs() <= 1e-12, "bound at γ=2 is {bound}");
    Ok(format!("50 γ-points, max |ΔP| = {worst:.1e}, Δ < 0, bound(2) = {bound}"))
}

fn brane_p11(g: f64) -> f64 {
    (8.0 * g.powi(3) + 66.0 * g - 47.0) / (4.0 * (2.0 + g).powi(2) * (1.0 + 2.0 * g))
}

fn brane_point(m: &Model, g: f64) -> Result<[f64; 2], String> {
    let x = 3.0 * (1.0 - g) / (g * g + g + 7.0);
    m.fixed_points(24)
        .points
        .into_iter()
        .map(|f| f.point)
        .find(|p| (p[0] - x).abs() < 1e-8 && (p[1] - x).abs() < 1e-8)
        .ok_or(format!("γ={g}: X_γ not found"))
}

fn brane() -> Outcome {
    let mut count = 0;
    for k in 0..=120 {
        let g = -3.0 + 0.05 * k as f64;
        if (g + 0.5).abs() < 0.01 || (g + 2.0).abs() < 0.01 {
            continue;
        }
        let m = model_with(ModelName::Brane, &[("gamma", g)]).map_err(err)?;
        let p = brane_point(&m, g)?;
        let got = m.p11_generic(p).map_err(err)?;
        ensure!(close(got, brane_p11(g), 1e-8), "γ={g}: P = {got}, want {}", brane_p11(g));
        count += 1;
    }
    let spec = ThresholdSpec::new(ModelName::Brane, "gamma").at("Xg");
    let boundary = find_threshold(&spec, Quantity::P11, (0.5, 0.8)).map_err(err)?;
    ensure!((boundary - 0.674865).abs() <= 1e-3, "boundary at {boundary}");
    let table = [
        (-1.0, LinearClass::Saddle, JacobiClass::JacobiUnstable),
        (0.0, LinearClass::StableFocus, JacobiClass::JacobiStable),
        (0.8, LinearClass::StableNode, JacobiClass::JacobiUnstable),
        (2.0, LinearClass::Saddle, JacobiClass::JacobiUnstable),
    ];
    for (g, lin, jac) in table {
        let params: BTreeMap<String, f64> = [("gamma".to_string(), g)].into();
        let row = evaluate_row(ModelName::Brane, &params, Some("Xg"));
        ensure!(
            row.linear_class == Some(lin) && row.jacobi_class == Some(jac),
            "γ={g}: {:?}/{:?}",
            row.linear_class,
            row.jacobi_class
        );
    }
    // γ = −2: μ = μ₀/r², q = q₀/r + μ₀(1/r − 1/r²), r = eᵗ
    let mut m = model_with(ModelName::Brane, &[("gamma", -2.0)]).map_err(err)?;
    let (q0, mu0) = (0.5, 0.2);
    let opts = IntegratorOptions::with_tolerances(1e-11, 1e-13);
    let tr = integrate(&mut m.field, &[q0, mu0], (0.0, 3.0), &opts).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (t, s) in tr.t.iter().zip(&tr.states) {
        let r = t.exp();
        let mu = mu0 / (r * r);
        let q = q0 / r + mu0 * (1.0 / r - 1.0 / (r * r));
        worst = worst.max(((s[0] - q) / q).abs()).max(((s[1] - mu) / mu).abs());
    }
    ensure!(worst <= 1e-6, "γ=−2 trajectory relative error {worst:e}");
    Ok(format!(
        "{count} γ-points, boundary {boundary:.6}, Table 2 rows match, γ=−2 rel. err {worst:.1e}"
    ))
}

fn dark_energy() -> Outcome {
    let s15 = 1.5f64.sqrt();
    for l in [0.8, 1.5, 2.0, 2.3] {
        let m = model_with(ModelName::DarkEnergy, &[("lambda", l)]).map_err(err)?;
        let found: Vec<[f64; 2]> = m.fixed_points(24).points.into_iter().map(|f| f.point).collect();
        let mut expect = vec![
            ("A", [0.0, 0.0], 81.0 / 16.0),
            ("B+", [1.0, 0.0], 1.5 * (l - s15).powi(2)),
            ("B-", [-1.0, 0.0], 1.5 * (l + s15).powi(2)),
        ];
        if l * l > 3.0 {
            expect.push(("C", [s15 / l, s15 / l], 4.5 * (-7.0 / 8.0 + 3.0 / (l * l))));
        }
        if l * l < 6.0 {
            expect.push(("D", [l / 6f64.sqrt(), (1.0 - l * l / 6.0).sqrt()], (l / 2.0).powi(4)));
        }
        for (name, at, want) in expect {
            let p = *found
                .iter()
                .find(|p| (p[0] - at[0]).abs() < 1e-8 && (p[1] - at[1]).abs() < 1e-8)
                .ok_or(format!("λ={l}: {name} not found"))?;
            let got = m.p11_generic(p).map_err(err)?;
            ensure!(close(got, want, 1e-8), "λ={l} {name}: P = {got}, want {want}");
            let x = l * l;
            let mu = match name {
                "C" => {
                    let r = (3.0 / x) * (x * x - 18.0 * x + 90.0).sqrt();
                    Some([-3.0 - 9.0 / x + r, -3.0 - 9.0 / x - r])
                }
                "D" => {
                    let r = (36.0 + 6.0 * x - x * x).sqrt();
                    Some([-18.0 + 4.0 * x + r, -18.0 + 4.0 * x - r])
                }
                _ => None,
            };
            if let Some(mu) = mu {
                let got = lyapunov_hessian_eigen(&m.field, p).map_err(err)?;
                for i in 0..2 {
                    ensure!(close(got[i], mu[i], 1e-8), "λ={l} {name}: μ = {got:?}, want {mu:?}");
                }
            }
        }
    }

    let thresholds = [
        ("D", Quantity::Det, (1.5, 2.0), 3.0),
        ("C", Quantity::Lyapunov, (1.75, 1.85), 27.0 / 8.0),
        ("C", Quantity::P11, (1.75, 1.95), 24.0 / 7.0),
        ("D", Quantity::Lyapunov, (1.5, 1.72), 48.0 / 17.0),
        ("B+", Quantity::Det, (2.2, 2.7), 6.0),
    ];
    let mut located = vec![];
    for (point, q, bracket, want) in thresholds {
        let spec = ThresholdSpec::new(ModelName::DarkEnergy, "lambda").at(point);
        let l = find_threshold(&spec, q, bracket).map_err(err)?;
        ensure!((l * l - want).abs() <= 1e-6, "{point} {q:?}: λ² = {}, want {want}", l * l);
        located.push(format!("{:.7}", l * l));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = IntegratorOptions::with_tolerances(1e-10, 1e-12);
    let mut excursion = f64::NEG_INFINITY;
    for _ in 0..20 {
        let l: f64 = rng.random_range(0.5..3.0);
        let mut m = model_with(ModelName::DarkEnergy, &[("lambda", l)]).map_err(err)?;
        let r: f64 = rng.random_range(0.0..0.99);
        let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let tr = integrate(&mut m.field, &[r * th.cos(), r * th.sin()], (0.0, 30.0), &opts).map_err(err)?;
        ensure!(tr.truncated.is_none(), "trajectory truncated: {:?}", tr.truncated);
        for s in &tr.states {
            excursion = excursion.max(s[0].hypot(s[1]) - 1.0);
        }
    }
    ensure!(excursion <= 1e-6, "left the unit disk by {excursion:e}");
    Ok(format!("P, μ± match; thresholds λ² = [{}]; max excursion {excursion:.1e}", located.join(", ")))
}

fn deviation() -> Outcome {
    let m = model_with(ModelName::Brusselator, &[("a", 4.0), ("b", 0.5)]).map_err(err)?;
    let (x, y) = m.spray_coordinates([1.0, 0.125]).map_err(err)?;
    let opts = IntegratorOptions::with_tolerances(1e-10, 1e-12);
    let run = |mode| integrate_deviation(&m.spray, &[x], &[y], &[1.0], mode, (0.0, 5.0), &opts).map_err(err);
    let raw = run(DeviationMode::RawVariational)?;
    let cov = run(DeviationMode::Covariant)?;
    let (rn, cn) = (raw.norms(), cov.norms());
    let peak = rn.iter().copied().fold(0.0, f64::max);
    let raw_end = *rn.last().unwrap();
    ensure!(raw_end < 1e-2 * peak, "raw |ξ(5)| = {raw_end:e}, peak {peak:e}");
    let imax = rn.iter().position(|v| *v == peak).unwrap();
    ensure!(rn[imax..].windows(2).all(|w| w[1] <= w[0]), "raw |ξ| not decaying after its peak");
    ensure!(cn.windows(2).all(|w| w[1] >= w[0]), "covariant |ξ| not increasing");
    let cov_end = *cn.last().unwrap();
    ensure!(cov_end > 10.0, "covariant |ξ(5)| = {cov_end}");
    Ok(format!("raw |ξ(5)| = {raw_end:.2e} (peak {peak:.3}), covariant |ξ(5)| = {cov_end:.2}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("theorem", theorem_suite),
        ("corollary", corollary_suite),
        ("brusselator", brusselator),
        ("lane-emden", lane_emden),
        ("sphere", sphere),
        ("brane", brane),
        ("dark-energy", dark_energy),
        ("deviation", deviation),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} ({secs:.2} s): {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.2} s): {e}", i + 1);
            }
        }
    }
    println!("{} of 8 criteria passed in {:.1} s", 8 - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
