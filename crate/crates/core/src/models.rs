//! Built-in models with closed-form reference values.
//!
//! | name | parameters | state |
//! |---|---|---|
//! | `brusselator` | `a`, `b` | concentrations `(u, v)` |
//! | `lane-emden` | `n`, `B` | `(w, dw/dt)` with `t = −ln ξ` |
//! | `sphere` | `gamma` | relativistic fluid sphere `(u, v)` |
//! | `brane` | `gamma` | brane vacuum, dark radiation `(u, v)` |
//! | `dark-energy` | `lambda` | scalar-field fractions `(u, v)` |
//!
//! Every model carries its planar field, a closed-form semispray in `x = u`,
//! `y = du/dt`, and the reference values the generic pipeline is checked
//! against.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate, FnSystem, IntegratorOptions};
use crate::kcc::{deviation_curvature, JacobiClass};
use crate::linstab::{find_fixed_points_seeded, FixedPointSet, LinearClass, SearchBox};
use crate::sode::{reduce_planar, Eliminate, Semispray, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Brusselator,
    LaneEmden,
    Sphere,
    Brane,
    DarkEnergy,
}

impl ModelName {
    pub const ALL: [ModelName; 5] = [
        ModelName::Brusselator,
        ModelName::LaneEmden,
        ModelName::Sphere,
        ModelName::Brane,
        ModelName::DarkEnergy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Brusselator => "brusselator",
            ModelName::LaneEmden => "lane-emden",
            ModelName::Sphere => "sphere",
            ModelName::Brane => "brane",
            ModelName::DarkEnergy => "dark-energy",
        }
    }

    /// Parameter keys with defaults (`None` = required).
    pub fn parameters(self) -> &'static [(&'static str, Option<f64>)] {
        match self {
            ModelName::Brusselator => &[("a", None), ("b", None)],
            ModelName::LaneEmden => &[("n", None), ("B", Some(1.0))],
            ModelName::Sphere => &[("gamma", None)],
            ModelName::Brane => &[("gamma", None)],
            ModelName::DarkEnergy => &[("lambda", None)],
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Input(format!(
                    "unknown model `{s}` (expected one of brusselator, lane-emden, sphere, brane, dark-energy)"
                ))
            })
    }
}

/// Closed-form data at one critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefPoint {
    pub label: String,
    pub point: [f64; 2],
    /// `false` when the point is complex or outside its existence range;
    /// the remaining values are then formal.
    pub exists: bool,
    pub trace: Option<f64>,
    pub det: Option<f64>,
    pub discriminant: Option<f64>,
    pub p11: Option<f64>,
    pub linear_class: Option<LinearClass>,
    pub jacobi_class: Option<JacobiClass>,
    /// Eigenvalues `μ±` of the Hessian of `dV/dt` for the Lyapunov
    /// function `V = (u − u*)² + 2(v − v*)²`.
    pub lyapunov: Option<[f64; 2]>,
}

impl RefPoint {
    fn new(label: &str, point: [f64; 2]) -> Self {
        Self {
            label: label.to_string(),
            point,
            exists: true,
            trace: None,
            det: None,
            discriminant: None,
            p11: None,
            linear_class: None,
            jacobi_class: None,
            lyapunov: None,
        }
    }

    fn linear(mut self, trace: f64, det: f64) -> Self {
        self.trace = Some(trace);
        self.det = Some(det);
        self.discriminant = Some(trace * trace - 4.0 * det);
        self
    }

    fn p11(mut self, p: f64) -> Self {
        self.p11 = Some(p);
        self.jacobi_class = Some(jacobi_of(p));
        self
    }

    fn class(mut self, c: LinearClass) -> Self {
        self.linear_class = Some(c);
        self
    }

    fn exists(mut self, e: bool) -> Self {
        self.exists = e;
        self
    }
}

fn jacobi_of(p: f64) -> JacobiClass {
    let eps = 1e-8 * (1.0 + p.abs());
    if p.abs() <= eps {
        JacobiClass::Marginal
    } else if p < 0.0 {
        JacobiClass::JacobiStable
    } else {
        JacobiClass::JacobiUnstable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub name: String,
    pub parameter: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub points: Vec<RefPoint>,
    pub thresholds: Vec<Threshold>,
    pub flags: Vec<String>,
}

impl ReferenceValues {
    pub fn point(&self, label: &str) -> Option<&RefPoint> {
        self.points.iter().find(|p| p.label == label)
    }
}

fn threshold(name: &str, parameter: &str, value: f64) -> Threshold {
    Threshold {
        name: name.into(),
        parameter: parameter.into(),
        value,
    }
}

/// A model instance: planar field, semispray and reference values.
#[derive(Clone)]
pub struct Model {
    pub name: ModelName,
    pub params: BTreeMap<String, f64>,
    /// Field in the model's own variables.
    pub field: VectorField2,
    /// Field from which the semispray is obtained by eliminating its second
    /// variable. Equals `field` except for `dark-energy`, where the second
    /// variable is `w = v²`.
    pub spray_field: VectorField2,
    /// Closed-form semispray in `x = u`, `y = du/dt`.
    pub spray: Semispray,
    pub reference: ReferenceValues,
    pub search_box: SearchBox,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Model {
    /// Image of a state in the variables of [`Model::spray_field`].
    pub fn to_spray_field(&self, p: [f64; 2]) -> [f64; 2] {
        match self.name {
            ModelName::DarkEnergy => [p[0], p[1] * p[1]],
            _ => p,
        }
    }

    /// Semispray coordinates `(x, y) = (u, du/dt)` of a state.
    pub fn spray_coordinates(&self, p: [f64; 2]) -> Result<(f64, f64)> {
        let [f, _] = self.field.eval(p[0], p[1])?;
        Ok((p[0], f))
    }

    /// The semispray obtained numerically by eliminating the second
    /// variable of [`Model::spray_field`] near `anchor` (a state in the
    /// model's own variables).
    pub fn reduced_spray(&self, anchor: [f64; 2]) -> Semispray {
        let a = self.to_spray_field(anchor);
        reduce_planar(&self.spray_field, Eliminate::V, a[1])
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    /// `P¹₁` of the closed-form semispray at a state.
    pub fn p11(&self, p: [f64; 2]) -> Result<f64> {
        let (x, y) = self.spray_coordinates(p)?;
        Ok(deviation_curvature(&self.spray, &[x], &[y])?[0][0])
    }

    /// `P¹₁` through numeric elimination, independent of the closed form.
    pub fn p11_generic(&self, p: [f64; 2]) -> Result<f64> {
        let s = self.reduced_spray(p);
        let (x, y) = self.spray_coordinates(p)?;
        Ok(deviation_curvature(&s, &[x], &[y])?[0][0])
    }

    /// Fixed points of [`Model::field`] inside the model's search box.
    pub fn fixed_points(&self, grid: usize) -> FixedPointSet {
        let extra: Vec<[f64; 2]> = match self.name {
            // equilibria lie on u = v and may crowd the pole at u = 1
            ModelName::Brane => (1..=8).map(|k| 1.0 - 10f64.powi(-k)).map(|u| [u, u]).collect(),
            _ => vec![],
        };
        find_fixed_points_seeded(&self.field, &self.search_box, grid, &extra)
    }
}

fn invalid(name: &str, value: f64, reason: &str) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        value,
        reason: reason.into(),
    }
}

/// Fills defaults and rejects unknown or missing keys.
pub fn resolve_params(name: ModelName, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let spec = name.parameters();
    for k in given.keys() {
        if !spec.iter().any(|(s, _)| s == k) {
            let keys: Vec<&str> = spec.iter().map(|(s, _)| *s).collect();
            return Err(Error::Input(format!(
                "model {name} has no parameter `{k}` (expected {})",
                keys.join(", ")
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (k, default) in spec {
        let v = match (given.get(*k), default) {
            (Some(v), _) => *v,
            (None, Some(d)) => *d,
            (None, None) => {
                return Err(Error::Input(format!("model {name} requires parameter `{k}`")))
            }
        };
        if !v.is_finite() {
            return Err(invalid(k, v, "must be finite"));
        }
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

/// Builds a model, validating parameters against their ranges.
pub fn model(name: ModelName, params: &BTreeMap<String, f64>) -> Result<Model> {
    let p = resolve_params(name, params)?;
    match name {
        ModelName::Brusselator => brusselator(p),
        ModelName::LaneEmden => lane_emden(p),
        ModelName::Sphere => sphere(p),
        ModelName::Brane => brane(p),
        ModelName::DarkEnergy => dark_energy(p),
    }
}

/// Shorthand for `model(name, params)` with a slice of pairs.
pub fn model_with(name: ModelName, params: &[(&str, f64)]) -> Result<Model> {
    let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    model(name, &map)
}

fn guard(f: impl Fn(f64, f64) -> bool + Send + Sync + 'static) -> crate::sode::DomainGuard {
    Arc::new(move |x: &[f64], y: &[f64]| f(x[0], y[0]))
}

// ---------------------------------------------------------------------------
// Brusselator

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BrusselatorRegion {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region: BrusselatorRegion,
    pub trace: f64,
    pub discriminant: f64,
    /// Within `1e-6·(1 + |q|)` of `b = a + 1` or `b = (√a ± 1)²`.
    pub boundary: bool,
}

impl BrusselatorRegion {
    pub fn linear_class(self) -> LinearClass {
        match self {
            BrusselatorRegion::A => LinearClass::UnstableNode,
            BrusselatorRegion::B => LinearClass::UnstableFocus,
            BrusselatorRegion::C => LinearClass::StableFocus,
            BrusselatorRegion::D => LinearClass::StableNode,
        }
    }

    pub fn jacobi_class(self) -> JacobiClass {
        match self {
            BrusselatorRegion::A | BrusselatorRegion::D => JacobiClass::JacobiUnstable,
            BrusselatorRegion::B | BrusselatorRegion::C => JacobiClass::JacobiStable,
        }
    }
}

/// Region of the `(a, b)` plane from the signs of `tr = b − 1 − a` and
/// `Δ = tr² − 4a`.
pub fn brusselator_regions(a: f64, b: f64) -> Result<RegionReport> {
    if !(a > 0.0) {
        return Err(invalid("a", a, "must be positive"));
    }
    if !(b > 0.0) {
        return Err(invalid("b", b, "must be positive"));
    }
    let tr = b - 1.0 - a;
    let disc = tr * tr - 4.0 * a;
    let region = match (tr > 0.0, disc > 0.0) {
        (true, true) => BrusselatorRegion::A,
        (true, false) => BrusselatorRegion::B,
        (false, false) => BrusselatorRegion::C,
        (false, true) => BrusselatorRegion::D,
    };
    let near = |q: f64, scale: f64| q.abs() <= 1e-6 * (1.0 + scale.abs());
    let boundary = near(tr, b) || near(disc, tr * tr);
    Ok(RegionReport {
        region,
        trace: tr,
        discriminant: disc,
        boundary,
    })
}

fn brusselator(p: BTreeMap<String, f64>) -> Result<Model> {
    let (a, b) = (p["a"], p["b"]);
    let region = brusselator_regions(a, b)?;
    let field = VectorField2::parse("1-(b+1)*u+a*u^2*v", "b*u-a*u^2*v", p.clone())?;
    let spray = Semispray::parse(
        &["-(1/2)*((2*(y1-1+(b+1)*x1)/x1-(b+1))*y1 + a*x1^2*(1-x1-y1))"],
        &p,
    )?
    .with_guard(guard(|x, _| x != 0.0));
    let tr = b - 1.0 - a;
    let s = RefPoint::new("S", [1.0, b / a])
        .linear(tr, a)
        .p11((tr * tr - 4.0 * a) / 4.0)
        .class(region.region.linear_class());
    let mut reference = ReferenceValues {
        points: vec![s],
        thresholds: vec![
            threshold("hopf", "b", a + 1.0),
            threshold("node_focus_lower", "b", (a.sqrt() - 1.0).powi(2)),
            threshold("node_focus_upper", "b", (a.sqrt() + 1.0).powi(2)),
        ],
        flags: vec![],
    };
    if region.boundary {
        reference.flags.push("near_region_boundary".into());
    }
    let vmax = 3.0f64.max(2.0 * b / a);
    Ok(Model {
        name: ModelName::Brusselator,
        params: p,
        spray_field: field.clone(),
        field,
        spray,
        reference,
        search_box: SearchBox::new((0.01, 3.0), (-0.5, vmax)),
    })
}

// ---------------------------------------------------------------------------
// Lane-Emden

fn lane_emden(p: BTreeMap<String, f64>) -> Result<Model> {
    let (n, bb) = (p["n"], p["B"]);
    if !(n > 1.0) {
        return Err(invalid("n", n, "polytropic index must exceed 1"));
    }
    if !(bb > 0.0) {
        return Err(invalid("B", bb, "must be positive"));
    }
    let g_src = "(1/2)*((5-n)/(n-1)*y1 + 2*(3-n)/(n-1)^2*x1 + B^(n-1)*x1^n)";
    let field = VectorField2::parse(
        "v",
        "-((5-n)/(n-1)*v + 2*(3-n)/(n-1)^2*u + B^(n-1)*u^n)",
        p.clone(),
    )?;
    let integer = n.fract() == 0.0;
    let spray = Semispray::parse(&[g_src], &p)?.with_guard(guard(move |x, _| integer || x >= 0.0));
    let nm1 = n - 1.0;
    let tr0 = -(5.0 - n) / nm1;
    let det0 = 2.0 * (3.0 - n) / (nm1 * nm1);
    let mut points = vec![RefPoint::new("X0", [0.0, 0.0])
        .linear(tr0, det0)
        .p11(0.25)];
    // nontrivial root of x^{n−1} = 2(n − 3)/((n − 1)² B^{n−1}), real for n > 3
    let c = 2.0 * (n - 3.0) / (nm1 * nm1);
    let xn = c.abs().powf(1.0 / nm1) / bb;
    let p_n = (-7.0 * n * n + 22.0 * n + 1.0) / (4.0 * nm1 * nm1);
    let p_in = (9.0 * n * n - 26.0 * n + 1.0) / (4.0 * nm1 * nm1);
    if n > 3.0 {
        let t = 2.0 * (n - 3.0) / nm1;
        points.push(RefPoint::new("Xn", [xn, 0.0]).linear(-(5.0 - n) / nm1, t).p11(p_n));
    } else if n < 3.0 {
        // magnitude of the complex root, where P is still real
        points.push(RefPoint::new("Xin", [xn, 0.0]).exists(false).p11(p_in));
    }
    let reference = ReferenceValues {
        points,
        thresholds: vec![
            threshold("p11_xin_zero", "n", (26.0 + 640f64.sqrt()) / 18.0),
            threshold("p11_xn_zero", "n", (22.0 + 512f64.sqrt()) / 14.0),
        ],
        flags: vec![],
    };
    let umax = 1.5 * xn.max(1.0);
    Ok(Model {
        name: ModelName::LaneEmden,
        params: p,
        spray_field: field.clone(),
        field,
        spray,
        reference,
        search_box: SearchBox::new((-0.5, umax), (-1.0, 1.0)),
    })
}

/// Lane-Emden profile samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneEmdenProfile {
    pub n: f64,
    pub xi: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// `1/4 − n ξ² θ^{n−1}`
    pub p11: Vec<f64>,
    /// Milne `u = −ξθⁿ/θ'`
    pub milne_u: Vec<f64>,
    /// Milne `v = −ξθ'/θ`
    pub milne_v: Vec<f64>,
    /// First zero of `θ` when reached before `xi_max`.
    pub surface: Option<f64>,
}

/// Integrates `θ'' + 2θ'/ξ + θⁿ = 0`, `θ(0) = 1`, `θ'(0) = 0` up to
/// `xi_max` or the surface `θ = 0`, from a series start at small `ξ`.
pub fn lane_emden_profile(n: f64, xi_max: f64) -> Result<LaneEmdenProfile> {
    if !(n > 1.0) {
        return Err(invalid("n", n, "polytropic index must exceed 1"));
    }
    if !(xi_max > 0.0) {
        return Err(invalid("xi_max", xi_max, "must be positive"));
    }
    let xi0 = 1e-3f64.min(xi_max / 2.0);
    let th0 = 1.0 - xi0 * xi0 / 6.0 + n * xi0.powi(4) / 120.0;
    let dth0 = -xi0 / 3.0 + n * xi0.powi(3) / 30.0;
    let mut sys = FnSystem::with_domain(
        2,
        move |xi: f64, s: &[f64], ds: &mut [f64]| {
            if s[0] <= 0.0 {
                return Err(Error::Domain("surface reached".into()));
            }
            ds[0] = s[1];
            ds[1] = -s[0].powf(n) - 2.0 * s[1] / xi;
            Ok(())
        },
        |s: &[f64]| s[0] > 0.0,
    );
    let opts = IntegratorOptions::with_tolerances(1e-12, 1e-14);
    let tr = integrate(&mut sys, &[th0, dth0], (xi0, xi_max), &opts)?;
    let mut prof = LaneEmdenProfile {
        n,
        xi: vec![0.0],
        theta: vec![1.0],
        dtheta: vec![0.0],
        p11: vec![0.25],
        milne_u: vec![3.0],
        milne_v: vec![0.0],
        surface: None,
    };
    for (xi, s) in tr.t.iter().zip(&tr.states) {
        let (th, dth) = (s[0], s[1]);
        prof.xi.push(*xi);
        prof.theta.push(th);
        prof.dtheta.push(dth);
        prof.p11.push(0.25 - n * xi * xi * th.powf(n - 1.0));
        prof.milne_u.push(-xi * th.powf(n) / dth);
        prof.milne_v.push(-xi * dth / th);
    }
    if tr.truncated.is_some() {
        // linear extrapolation from the last sample to θ = 0
        let k = prof.xi.len() - 1;
        prof.surface = Some(prof.xi[k] - prof.theta[k] / prof.dtheta[k]);
    }
    Ok(prof)
}

/// Jacobi stability of a polytrope layer, `E_i/|E_g| < 6n ρ/ρ̄`.
pub fn polytrope_jacobi_condition(n: f64, rho_ratio: f64, energy_ratio: f64) -> Result<bool> {
    for (k, v) in [("n", n), ("rho_ratio", rho_ratio), ("energy_ratio", energy_ratio)] {
        if !(v > 0.0) {
            return Err(invalid(k, v, "must be positive"));
        }
    }
    Ok(1.0 / energy_ratio < 6.0 * n * rho_ratio)
}

// ---------------------------------------------------------------------------
// relativistic sphere

fn check_sphere_gamma(g: f64) -> Result<()> {
    if !(g > 1.0 && g <= 2.0) {
        return Err(invalid("gamma", g, "must lie in (1, 2]"));
    }
    Ok(())
}

fn sphere(mut p: BTreeMap<String, f64>) -> Result<Model> {
    let g = p["gamma"];
    check_sphere_gamma(g)?;
    let c = (g * g + 4.0 * g - 4.0) / (g - 1.0);
    let mut fp = p.clone();
    fp.insert("c".into(), c);
    let field = VectorField2::parse(
        "v-u",
        "v*(2-c*u-gamma*(v-u))/(1-2*u)",
        fp.clone(),
    )?;
    let spray = Semispray::parse(&["(1/2)*(y1-(x1+y1)*(2-c*x1-gamma*y1)/(1-2*x1))"], &fp)?
        .with_guard(guard(|x, _| x != 0.5));
    let u1 = 2.0 * (g - 1.0) / (g * g + 4.0 * g - 4.0);
    let tr = -(3.0 * g - 2.0) / g;
    let det = 2.0 * (g * g + 4.0 * g - 4.0) / (g * g);
    let s1 = RefPoint::new("S1", [u1, u1])
        .linear(tr, det)
        .p11((g * g - 44.0 * g + 36.0) / (4.0 * g * g))
        .class(LinearClass::StableFocus);
    let o = RefPoint::new("O", [0.0, 0.0])
        .linear(1.0, -2.0)
        .p11(9.0 / 4.0)
        .class(LinearClass::Saddle);
    p.remove("c");
    Ok(Model {
        name: ModelName::Sphere,
        params: p,
        spray_field: field.clone(),
        field,
        spray,
        reference: ReferenceValues {
            points: vec![o, s1],
            thresholds: vec![],
            flags: vec![],
        },
        search_box: SearchBox::new((-0.25, 0.49), (-0.25, 1.0)),
    })
}

/// Radicand of the mass-radius bound, `4(11γ−9)²/(7γ−6)² − 9 + k ρr²`.
pub fn sphere_radicand(gamma: f64, rho_r2: f64) -> f64 {
    let g = gamma;
    let q = 7.0 * g - 6.0;
    8.0 * std::f64::consts::PI * g * (2.0 * g - 1.0) / (g - 1.0) * rho_r2
        + 4.0 * (11.0 * g - 9.0).powi(2) / (q * q)
        - 9.0
}

fn sphere_rhs(gamma: f64, rho_r2: f64) -> Result<f64> {
    check_sphere_gamma(gamma)?;
    let g = gamma;
    let q = 7.0 * g - 6.0;
    let rad = sphere_radicand(g, rho_r2);
    if rad < 0.0 {
        return Err(invalid("gamma", g, "mass-radius radicand is negative"));
    }
    Ok(2.0 * (g - 1.0) * (11.0 * g - 9.0) / (q * q) + (g - 1.0) / q * rad.sqrt())
}

/// Upper bound on `M/R` from Jacobi stability at the stellar surface.
pub fn sphere_mass_radius_bound(gamma: f64) -> Result<f64> {
    sphere_rhs(gamma, 0.0)
}

/// Jacobi stability condition inside the star at a layer with given
/// `m/r` and `ρr²`. A negative radicand means the condition cannot hold.
pub fn sphere_jacobi_condition(m_over_r: f64, rho_r2: f64, gamma: f64) -> Result<bool> {
    if !(m_over_r > 0.0 && m_over_r < 0.5) {
        return Err(Error::Precondition(format!(
            "m/r = {m_over_r} must lie in (0, 1/2)"
        )));
    }
    if !(rho_r2 >= 0.0) {
        return Err(invalid("rho_r2", rho_r2, "must be non-negative"));
    }
    check_sphere_gamma(gamma)?;
    if sphere_radicand(gamma, rho_r2) < 0.0 {
        return Ok(false);
    }
    Ok(m_over_r < sphere_rhs(gamma, rho_r2)?)
}

// ---------------------------------------------------------------------------
// brane vacuum

/// Root of `8γ³ + 66γ − 47` where `P¹₁(X_γ)` changes sign.
pub fn brane_jacobi_boundary() -> f64 {
    // single real root; Newton from the cubic's neighbourhood
    let mut g: f64 = 0.67;
    for _ in 0..50 {
        let f = 8.0 * g.powi(3) + 66.0 * g - 47.0;
        let d = 24.0 * g * g + 66.0;
        g -= f / d;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraneReferences {
    pub x_gamma: f64,
    /// Eigenvalues `r±` of the linearisation at `X_γ`.
    pub r_plus: Complex,
    pub r_minus: Complex,
    pub p11: f64,
    pub linear_class: LinearClass,
    pub jacobi_class: JacobiClass,
}

/// Classification at `X_γ` by parameter range.
pub fn brane_table_row(gamma: f64) -> (LinearClass, JacobiClass) {
    let g1 = brane_jacobi_boundary();
    if gamma < -0.5 || gamma > 1.0 {
        (LinearClass::Saddle, JacobiClass::JacobiUnstable)
    } else if gamma < g1 {
        (LinearClass::StableFocus, JacobiClass::JacobiStable)
    } else {
        (LinearClass::StableNode, JacobiClass::JacobiUnstable)
    }
}

fn check_brane_gamma(g: f64) -> Result<()> {
    if g == -0.5 {
        return Err(invalid("gamma", g, "the field is undefined at gamma = -1/2"));
    }
    Ok(())
}

pub fn brane_references(gamma: f64) -> Result<BraneReferences> {
    let g = gamma;
    check_brane_gamma(g)?;
    if g == -2.0 {
        return Err(invalid("gamma", g, "X_gamma lies on the singular line u = 1"));
    }
    let x_gamma = 3.0 * (1.0 - g) / (g * g + g + 7.0);
    let rad = 16.0 * g.powi(4) + 8.0 * g.powi(3) + 132.0 * g * g - 28.0 * g - 47.0;
    let den = 4.0 * g * g + 10.0 * g + 4.0;
    let re = (-3.0 - 6.0 * g) / den;
    let (r_plus, r_minus) = if rad >= 0.0 {
        let s = rad.sqrt() / den;
        (Complex { re: re + s, im: 0.0 }, Complex { re: re - s, im: 0.0 })
    } else {
        let s = (-rad).sqrt() / den;
        (Complex { re, im: s }, Complex { re, im: -s })
    };
    let p11 = (8.0 * g.powi(3) + 66.0 * g - 47.0) / (4.0 * (2.0 + g).powi(2) * (1.0 + 2.0 * g));
    let (linear_class, jacobi_class) = brane_table_row(g);
    Ok(BraneReferences {
        x_gamma,
        r_plus,
        r_minus,
        p11,
        linear_class,
        jacobi_class,
    })
}

fn brane(p: BTreeMap<String, f64>) -> Result<Model> {
    let g = p["gamma"];
    check_brane_gamma(g)?;
    let field = VectorField2::parse(
        "v-u",
        "2*(1-gamma)/(1+2*gamma)*v-(gamma+2)/(1+2*gamma)*v*(u+(1+2*gamma)*v/3)/(1-u)",
        p.clone(),
    )?;
    let spray = Semispray::parse(
        &["(6*(gamma-1)*x1 + 2*(gamma^2+gamma+7)*x1^2 + 3*(4*gamma-1)*y1 \
           + (4*gamma^2+gamma+13)*x1*y1 + (2*gamma^2+5*gamma+2)*y1^2)\
           /(6*(1+2*gamma)*(1-x1))"],
        &p,
    )?
    .with_guard(guard(|x, _| x != 1.0));
    let r2 = 2.0 * (1.0 - g) / (1.0 + 2.0 * g);
    let x0_class = if r2 > 0.0 {
        LinearClass::Saddle
    } else if r2 == -1.0 {
        LinearClass::DegenerateNode
    } else {
        LinearClass::StableNode
    };
    let mut points = vec![RefPoint::new("X0", [0.0, 0.0])
        .linear(r2 - 1.0, -r2)
        .p11((r2 + 1.0).powi(2) / 4.0)
        .class(x0_class)];
    let mut flags = vec![];
    // X_γ approaches the singular line u = 1 as γ → −2
    let mut umax: f64 = 0.999;
    if g == -2.0 {
        flags.push("special_gamma_minus_2".into());
    } else {
        let r = brane_references(g)?;
        let tr = r.r_plus.re + r.r_minus.re;
        let det = r.r_plus.re * r.r_minus.re - r.r_plus.im * r.r_minus.im;
        umax = umax.max(0.5 * (1.0 + r.x_gamma));
        points.push(
            RefPoint::new("Xg", [r.x_gamma, r.x_gamma])
                .linear(tr, det)
                .p11(r.p11)
                .class(r.linear_class),
        );
    }
    if g == 1.0 {
        flags.push("critical_points_coincide".into());
    }
    Ok(Model {
        name: ModelName::Brane,
        params: p,
        spray_field: field.clone(),
        field,
        spray,
        reference: ReferenceValues {
            points,
            thresholds: vec![
                threshold("saddle_lower", "gamma", -0.5),
                threshold("jacobi", "gamma", brane_jacobi_boundary()),
                threshold("saddle_upper", "gamma", 1.0),
            ],
            flags,
        },
        search_box: SearchBox::new((-1.5, umax), (-1.5, 1.5)),
    })
}

/// Exactly solvable brane vacua.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BraneSpecialCase {
    /// `2U + P = 0` (`gamma = −2`): `v = Q e^{−2t}`, `u = U₀e^{−t} − Q e^{−2t}`.
    TwoUPlusP { q: f64, u0: f64 },
    /// `U + 2P = 0` (`gamma = −1/2`): `u = v = 2/3`.
    UPlusTwoP,
    /// `gamma = −2` with data `(μ₀, q₀)` at `r = 1`, in the radial coordinate.
    GammaMinus2 { mu0: f64, q0: f64 },
}

impl BraneSpecialCase {
    /// `(u, v)` at `t = ln r`.
    pub fn state_at(&self, t: f64) -> [f64; 2] {
        match *self {
            BraneSpecialCase::TwoUPlusP { q, u0 } => {
                [u0 * (-t).exp() - q * (-2.0 * t).exp(), q * (-2.0 * t).exp()]
            }
            BraneSpecialCase::UPlusTwoP => [2.0 / 3.0, 2.0 / 3.0],
            BraneSpecialCase::GammaMinus2 { mu0, q0 } => {
                let r = t.exp();
                [q0 / r + mu0 * (1.0 / r - 1.0 / (r * r)), mu0 / (r * r)]
            }
        }
    }

    /// Radial form `(q, μ)` at radius `r`.
    pub fn at_radius(&self, r: f64) -> [f64; 2] {
        self.state_at(r.ln())
    }
}

/// Closed-form solution for one of the exactly solvable cases.
pub fn brane_special_solutions(case: BraneSpecialCase) -> BraneSpecialCase {
    case
}

/// Closed-form trajectory of the `gamma = −2` brane system from `(u₀, v₀)`.
pub fn brane_gamma_minus_2(u0: f64, v0: f64) -> BraneSpecialCase {
    BraneSpecialCase::TwoUPlusP { q: v0, u0: u0 + v0 }
}

// ---------------------------------------------------------------------------
// dark energy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkEnergyReferences {
    pub points: Vec<RefPoint>,
    pub thresholds: Vec<Threshold>,
}

/// Critical points `A`, `B±`, `C`, `D` with existence, `P¹₁`, linear
/// classes and Lyapunov eigenvalues.
pub fn dark_energy_references(lambda: f64) -> DarkEnergyReferences {
    let l = lambda;
    let l2 = l * l;
    let s15 = 1.5f64.sqrt();
    let a = RefPoint::new("A", [0.0, 0.0])
        .p11(1.5f64.powi(4))
        .class(LinearClass::Saddle);
    let bp = RefPoint::new("B+", [1.0, 0.0])
        .p11(1.5 * (l - s15).powi(2))
        .class(if l < 6f64.sqrt() {
            LinearClass::UnstableNode
        } else {
            LinearClass::Saddle
        });
    let bm = RefPoint::new("B-", [-1.0, 0.0])
        .p11(1.5 * (l + s15).powi(2))
        .class(if l > -(6f64.sqrt()) {
            LinearClass::UnstableNode
        } else {
            LinearClass::Saddle
        });
    let mut c = RefPoint::new("C", [s15 / l, s15 / l])
        .exists(l2 > 3.0)
        .p11(4.5 * (-7.0 / 8.0 + 3.0 / l2))
        .class(if l2 < 24.0 / 7.0 {
            LinearClass::StableNode
        } else {
            LinearClass::StableFocus
        });
    let rc = l2 * l2 - 18.0 * l2 + 90.0;
    c.lyapunov = Some([
        -3.0 - 9.0 / l2 + 3.0 / l2 * rc.sqrt(),
        -3.0 - 9.0 / l2 - 3.0 / l2 * rc.sqrt(),
    ]);
    let dv = (1.0 - l2 / 6.0).max(0.0).sqrt();
    let mut d = RefPoint::new("D", [l / 6f64.sqrt(), dv])
        .exists(l2 < 6.0)
        .p11((l / 2.0).powi(4))
        .class(if l2 < 3.0 {
            LinearClass::StableNode
        } else {
            LinearClass::Saddle
        });
    let rd = 36.0 + 6.0 * l2 - l2 * l2;
    d.lyapunov = Some([-18.0 + 4.0 * l2 + rd.sqrt(), -18.0 + 4.0 * l2 - rd.sqrt()]);
    DarkEnergyReferences {
        points: vec![a, bp, bm, c, d],
        thresholds: vec![
            threshold("c_exists", "lambda^2", 3.0),
            threshold("c_lyapunov", "lambda^2", 27.0 / 8.0),
            threshold("c_jacobi", "lambda^2", 24.0 / 7.0),
            threshold("d_lyapunov", "lambda^2", 48.0 / 17.0),
            threshold("d_exists", "lambda^2", 6.0),
        ],
    }
}

fn dark_energy(p: BTreeMap<String, f64>) -> Result<Model> {
    let l = p["lambda"];
    let field = VectorField2::parse(
        "-3*u+lambda*sqrt(1.5)*v^2+1.5*u*(1+u^2-v^2)",
        "-lambda*sqrt(1.5)*u*v+1.5*v*(1+u^2-v^2)",
        p.clone(),
    )?;
    // same system in (u, w = v²)
    let spray_field = VectorField2::parse(
        "-3*u+lambda*sqrt(1.5)*v+1.5*u*(1-v+u^2)",
        "2*v*(-lambda*sqrt(1.5)*u+1.5*(1+u^2-v))",
        p.clone(),
    )?;
    let spray = Semispray::parse(
        &["3/(4*(sqrt(6)*lambda-3*x1))*(6*(3*x1^2-3*x1^4+3*x1*y1+y1^2) \
           + lambda*sqrt(6)*(-3*x1-3*x1^3+6*x1^5-y1-7*x1^2*y1) \
           + lambda^2*(6*x1^2-6*x1^4+4*x1*y1))"],
        &p,
    )?
    .with_guard(guard(move |x, _| 6f64.sqrt() * l - 3.0 * x != 0.0));
    let refs = dark_energy_references(l);
    Ok(Model {
        name: ModelName::DarkEnergy,
        params: p,
        field,
        spray_field,
        spray,
        reference: ReferenceValues {
            points: refs.points,
            thresholds: refs.thresholds,
            flags: vec![],
        },
        search_box: SearchBox::new((-1.2, 1.2), (-1.2, 1.2)),
    })
}

/// Eigenvalues (descending) of the Hessian of `dV/dt` at `p` for
/// `V = (u − u*)² + 2(v − v*)²` centred on `p`.
pub fn lyapunov_hessian_eigen(vf: &VectorField2, p: [f64; 2]) -> Result<[f64; 2]> {
    use crate::autodiff::{Jet, Taylor2};
    let u = Taylor2::seed_variable(0, p[0], 2);
    let v = Taylor2::seed_variable(1, p[1], 2);
    let (f, g) = vf.eval_jet(&u, &v)?;
    let du = u.sub(&Taylor2::constant(p[0], 2))?;
    let dv = v.sub(&Taylor2::constant(p[1], 2))?;
    let vdot = du.scale(2.0).mul(&f)?.add(&dv.scale(4.0).mul(&g)?)?;
    let (a, b, c) = (vdot.dd(0, 0), vdot.dd(0, 1), vdot.dd(1, 1));
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    Ok([m + r, m - r])
}
