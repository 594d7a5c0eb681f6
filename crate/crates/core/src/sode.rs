//! Second-order systems `ẍ^i + 2 G^i(x, ẋ) = 0` and planar first-order
//! fields they can be derived from.
//!
//! A [`Semispray`] is either given directly by expressions for `G^i` in the
//! variables `x1..xn, y1..yn`, or obtained from a [`VectorField2`] by
//! eliminating one of its two state variables through the implicit
//! function theorem ([`reduce_planar`]).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Dual, Jet, Taylor2};
use crate::error::{Error, Result};
use crate::expr::{parse, CompiledExpr, ExprAst};

/// Planar autonomous field `u̇ = f(u, v)`, `v̇ = g(u, v)`.
#[derive(Clone)]
pub struct VectorField2 {
    names: [String; 2],
    sources: [ExprAst; 2],
    params: BTreeMap<String, f64>,
    f: CompiledExpr,
    g: CompiledExpr,
}

impl fmt::Debug for VectorField2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField2")
            .field("names", &self.names)
            .field("f", &self.sources[0].to_string())
            .field("g", &self.sources[1].to_string())
            .field("params", &self.params)
            .finish()
    }
}

impl VectorField2 {
    /// Field over state variables named `u` and `v`.
    pub fn new(f: ExprAst, g: ExprAst, params: BTreeMap<String, f64>) -> Result<Self> {
        Self::with_names(f, g, params, ["u", "v"])
    }

    pub fn with_names(
        f: ExprAst,
        g: ExprAst,
        params: BTreeMap<String, f64>,
        names: [&str; 2],
    ) -> Result<Self> {
        let table = params.clone().into_iter().collect();
        let cf = CompiledExpr::new(&f, &names, &table)?;
        let cg = CompiledExpr::new(&g, &names, &table)?;
        Ok(Self {
            names: [names[0].to_string(), names[1].to_string()],
            sources: [f, g],
            params,
            f: cf,
            g: cg,
        })
    }

    /// Parses both components.
    pub fn parse(f: &str, g: &str, params: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(parse(f)?, parse(g)?, params)
    }

    pub fn names(&self) -> [&str; 2] {
        [&self.names[0], &self.names[1]]
    }

    pub fn sources(&self) -> &[ExprAst; 2] {
        &self.sources
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Evaluates both components on any jet type.
    pub fn eval_jet<T: Jet>(&self, u: &T, v: &T) -> Result<(T, T)> {
        let vars = [u.clone(), v.clone()];
        Ok((self.f.eval(&vars)?, self.g.eval(&vars)?))
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<[f64; 2]> {
        let (a, b) = self.eval_jet(&u, &v)?;
        Ok([a, b])
    }

    /// Field value and the jet-exact Jacobian `[[f_u, f_v], [g_u, g_v]]`.
    pub fn jacobian(&self, u: f64, v: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let (f, g) = self.jets(u, v)?;
        Ok(([f.value(), g.value()], [[f.d(0), f.d(1)], [g.d(0), g.d(1)]]))
    }

    /// Both components as second-order jets over the seeds `(u, v)`.
    pub fn jets(&self, u: f64, v: f64) -> Result<(Taylor2, Taylor2)> {
        let uj = Taylor2::seed_variable(0, u, 2);
        let vj = Taylor2::seed_variable(1, v, 2);
        self.eval_jet(&uj, &vj)
    }

    /// `f_u + g_v`.
    pub fn divergence(&self, u: f64, v: f64) -> Result<f64> {
        let (_, j) = self.jacobian(u, v)?;
        Ok(j[0][0] + j[1][1])
    }
}

/// Which state variable of a [`VectorField2`] is eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eliminate {
    U,
    V,
}

impl Eliminate {
    fn symbol(self) -> char {
        match self {
            Eliminate::U => 'u',
            Eliminate::V => 'v',
        }
    }
}

/// Settings for the implicit solve `h(e, x) = y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSolver {
    pub tol: f64,
    pub max_iter: usize,
    /// Fallback bisection interval for the eliminated variable.
    pub bracket: Option<(f64, f64)>,
}

impl Default for ImplicitSolver {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 50,
            bracket: None,
        }
    }
}

/// Planar field reduced to a one-dimensional semispray.
///
/// The retained variable becomes `x`, its time derivative `y`, and the
/// eliminated one is recovered from `h(e, x) = y` where `h` is the
/// right-hand side of the retained equation.
#[derive(Debug, Clone)]
pub struct EliminationReduction {
    pub source: VectorField2,
    pub eliminated: Eliminate,
    pub solver: ImplicitSolver,
    /// Starting guess for the eliminated variable when no warm start exists.
    pub anchor: f64,
}

/// Per-caller mutable state for semispray evaluation (Newton warm start).
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalContext {
    pub warm_start: Option<f64>,
}

impl EliminationReduction {
    pub fn new(source: VectorField2, eliminated: Eliminate, anchor: f64) -> Self {
        Self {
            source,
            eliminated,
            solver: ImplicitSolver::default(),
            anchor,
        }
    }

    /// `(retained equation rhs, eliminated equation rhs)` at `(e, x)`.
    fn parts<T: Jet>(&self, e: &T, x: &T) -> Result<(T, T)> {
        match self.eliminated {
            Eliminate::U => {
                let (f, g) = self.source.eval_jet(e, x)?;
                Ok((g, f))
            }
            Eliminate::V => self.source.eval_jet(x, e),
        }
    }

    fn h_and_slope(&self, e: f64, x: f64) -> Result<(f64, f64)> {
        let (h, _) = self.parts(&Dual::variable(e), &Dual::fixed(x))?;
        Ok((h.re, h.eps))
    }

    fn singular_guard(&self, h: f64, h_e: f64) -> Result<()> {
        if !(h_e.abs() >= 1e-10 * (1.0 + h.abs())) {
            return Err(Error::SingularElimination {
                variable: self.eliminated.symbol(),
                derivative: h_e,
            });
        }
        Ok(())
    }

    /// Solves `h(e, x) = y` for the eliminated variable.
    pub fn solve(&self, x: f64, y: f64, ctx: &mut EvalContext) -> Result<f64> {
        let start = ctx.warm_start.unwrap_or(self.anchor);
        let root = match self.newton(x, y, start) {
            Ok(e) => e,
            Err(err) => match self.solver.bracket {
                Some((lo, hi)) => self.bisect(x, y, lo, hi).ok_or(err)?,
                None => return Err(err),
            },
        };
        let (h, h_e) = self.h_and_slope(root, x)?;
        self.singular_guard(h, h_e)?;
        ctx.warm_start = Some(root);
        Ok(root)
    }

    fn newton(&self, x: f64, y: f64, start: f64) -> Result<f64> {
        let tol = self.solver.tol;
        let mut e = start;
        let (h, mut slope) = self.h_and_slope(e, x)?;
        let mut resid = h - y;
        for _ in 0..self.solver.max_iter {
            if resid == 0.0 {
                return Ok(e);
            }
            self.singular_guard(h, slope)?;
            let step = resid / slope;
            // damped: halve until the residual shrinks
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial = e - lambda * step;
                if let Ok((ht, st)) = self.h_and_slope(trial, x) {
                    let rt = ht - y;
                    if rt.abs() < resid.abs() || rt.abs() <= tol * (1.0 + y.abs()) {
                        accepted = Some((trial, rt, st));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some((next, rt, st)) = accepted else {
                // no decrease possible: converged to rounding or stuck
                if resid.abs() <= 1e-10 * (1.0 + y.abs()) {
                    return Ok(e);
                }
                return Err(Error::NewtonDivergence(format!(
                    "implicit solve stalled at {e} with residual {resid:e}"
                )));
            };
            let moved = (next - e).abs();
            e = next;
            resid = rt;
            slope = st;
            if moved <= tol * (1.0 + e.abs()) {
                return Ok(e);
            }
        }
        if resid.abs() <= 1e-10 * (1.0 + y.abs()) {
            return Ok(e);
        }
        Err(Error::NewtonDivergence(format!(
            "implicit solve did not converge from {start} (residual {resid:e})"
        )))
    }

    fn bisect(&self, x: f64, y: f64, mut lo: f64, mut hi: f64) -> Option<f64> {
        let phi = |e: f64| self.h_and_slope(e, x).ok().map(|(h, _)| h - y);
        let mut flo = phi(lo)?;
        let fhi = phi(hi)?;
        if flo * fhi > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = phi(mid)?;
            if fm == 0.0 || (hi - lo) <= 1e-15 * (1.0 + mid.abs()) {
                return Some(mid);
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Maps a planar state to semispray coordinates `(x, y)`.
    pub fn lift(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let [f, g] = self.source.eval(u, v)?;
        Ok(match self.eliminated {
            Eliminate::U => (v, g),
            Eliminate::V => (u, f),
        })
    }

    /// Recovers the planar state from semispray coordinates.
    pub fn lower(&self, x: f64, y: f64, ctx: &mut EvalContext) -> Result<(f64, f64)> {
        let e = self.solve(x, y, ctx)?;
        Ok(match self.eliminated {
            Eliminate::U => (e, x),
            Eliminate::V => (x, e),
        })
    }

    /// `G¹` with first and second derivatives over the seeds `(x, y)`.
    fn jet(&self, x: f64, y: f64, ctx: &mut EvalContext) -> Result<Taylor2> {
        let e0 = self.solve(x, y, ctx)?;
        // derivatives of h over (e, x)
        let (h, _) = self.parts(
            &Taylor2::seed_variable(0, e0, 2),
            &Taylor2::seed_variable(1, x, 2),
        )?;
        let (he, hx) = (h.d(0), h.d(1));
        let (hee, hex, hxx) = (h.dd(0, 0), h.dd(0, 1), h.dd(1, 1));
        // implicit solution e(x, y) of h(e, x) = y
        let ex = -hx / he;
        let ey = 1.0 / he;
        let exx = -(hee * ex * ex + 2.0 * hex * ex + hxx) / he;
        let exy = -(hee * ex * ey + hex * ey) / he;
        let eyy = -(hee * ey * ey) / he;
        let e_jet = Taylor2::from_parts(e0, &[ex, ey], &[exx, exy, exy, eyy]);
        let x_jet = Taylor2::seed_variable(0, x, 2);
        let y_jet = Taylor2::seed_variable(1, y, 2);

        let (h_e, other) = self.parts(&Dual::variable(e_jet), &Dual::fixed(x_jet))?;
        let (h_x, _) = self.parts(&Dual::fixed(e_jet), &Dual::variable(x_jet))?;
        // ẍ = h_e ė + h_x ẋ
        let accel = h_e.eps.mul(&other.re)?.add(&h_x.eps.mul(&y_jet)?)?;
        Ok(accel.scale(-0.5))
    }

    fn value(&self, x: f64, y: f64, ctx: &mut EvalContext) -> Result<f64> {
        let e = self.solve(x, y, ctx)?;
        let (h_e, other) = self.parts(&Dual::variable(e), &Dual::fixed(x))?;
        let (h_x, _) = self.parts(&Dual::fixed(e), &Dual::variable(x))?;
        Ok(-0.5 * (h_e.eps * other.re + h_x.eps * y))
    }
}

/// Predicate returning `true` where the semispray is regular.
pub type DomainGuard = Arc<dyn Fn(&[f64], &[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Expr {
        sources: Vec<ExprAst>,
        compiled: Vec<CompiledExpr>,
    },
    Reduced(Box<EliminationReduction>),
}

/// System `ẍ^i + 2 G^i(x, y) = 0` with `y = ẋ`.
#[derive(Clone)]
pub struct Semispray {
    n: usize,
    kind: Kind,
    guard: Option<DomainGuard>,
}

impl fmt::Debug for Semispray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Semispray");
        d.field("n", &self.n);
        match &self.kind {
            Kind::Expr { sources, .. } => {
                let s: Vec<String> = sources.iter().map(|e| e.to_string()).collect();
                d.field("G", &s)
            }
            Kind::Reduced(r) => d.field("reduction", r),
        };
        d.field("guarded", &self.guard.is_some()).finish()
    }
}

/// `G^i` with derivatives over the `2n` seeds `(x1..xn, y1..yn)`.
#[derive(Debug, Clone)]
pub struct SemisprayJet {
    n: usize,
    jets: Vec<Taylor2>,
}

impl SemisprayJet {
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn jets(&self) -> &[Taylor2] {
        &self.jets
    }
    /// `G^i`
    pub fn g(&self, i: usize) -> f64 {
        self.jets[i].value()
    }
    /// `∂G^i/∂x^j`
    pub fn dg_dx(&self, i: usize, j: usize) -> f64 {
        self.jets[i].d(j)
    }
    /// `∂G^i/∂y^j`, the nonlinear connection `N^i_j`.
    pub fn dg_dy(&self, i: usize, j: usize) -> f64 {
        self.jets[i].d(self.n + j)
    }
    /// `∂²G^i/∂y^j∂y^l`, the Berwald connection `G^i_jl`.
    pub fn d2g_dydy(&self, i: usize, j: usize, l: usize) -> f64 {
        self.jets[i].dd(self.n + j, self.n + l)
    }
    /// `∂²G^i/∂y^j∂x^l` = `∂N^i_j/∂x^l`.
    pub fn d2g_dydx(&self, i: usize, j: usize, l: usize) -> f64 {
        self.jets[i].dd(self.n + j, l)
    }
    pub fn d2g_dxdx(&self, i: usize, j: usize, l: usize) -> f64 {
        self.jets[i].dd(j, l)
    }
}

impl Semispray {
    /// Semispray from expressions for `G^1..G^n` over `x1..xn, y1..yn`.
    pub fn from_exprs(exprs: Vec<ExprAst>, params: &BTreeMap<String, f64>) -> Result<Self> {
        let n = exprs.len();
        if n == 0 || 2 * n > crate::autodiff::MAX_SEEDS {
            return Err(Error::Input(format!("unsupported semispray dimension {n}")));
        }
        let names: Vec<String> = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=n).map(|i| format!("y{i}")))
            .collect();
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        let table = params.clone().into_iter().collect();
        let compiled = exprs
            .iter()
            .map(|e| CompiledExpr::new(e, &vars, &table))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            kind: Kind::Expr {
                sources: exprs,
                compiled,
            },
            guard: None,
        })
    }

    /// Parses `G^i` sources and builds the semispray.
    pub fn parse(sources: &[&str], params: &BTreeMap<String, f64>) -> Result<Self> {
        let exprs = sources.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        Self::from_exprs(exprs, params)
    }

    pub fn with_guard(mut self, guard: DomainGuard) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn reduction(&self) -> Option<&EliminationReduction> {
        match &self.kind {
            Kind::Reduced(r) => Some(r),
            Kind::Expr { .. } => None,
        }
    }

    /// `true` if the domain guard accepts `(x, y)`.
    pub fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        self.guard.as_ref().is_none_or(|g| g(x, y))
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::Input(format!(
                "state has dimension ({}, {}), semispray expects {}",
                x.len(),
                y.len(),
                self.n
            )));
        }
        if !self.in_domain(x, y) {
            return Err(Error::Domain(format!(
                "({x:?}, {y:?}) lies on a singular set of the semispray"
            )));
        }
        Ok(())
    }

    /// Jet-exact `G`, `∂G/∂x`, `∂G/∂y` and second derivatives at `(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<SemisprayJet> {
        self.value_ctx(x, y, &mut EvalContext::default())
    }

    pub fn value_ctx(&self, x: &[f64], y: &[f64], ctx: &mut EvalContext) -> Result<SemisprayJet> {
        self.check(x, y)?;
        let jets = match &self.kind {
            Kind::Expr { compiled, .. } => {
                let m = 2 * self.n;
                let seeds: Vec<Taylor2> = x
                    .iter()
                    .chain(y)
                    .enumerate()
                    .map(|(k, &v)| Taylor2::seed_variable(k, v, m))
                    .collect();
                compiled
                    .iter()
                    .map(|c| c.eval(&seeds))
                    .collect::<Result<Vec<_>>>()?
            }
            Kind::Reduced(r) => vec![r.jet(x[0], y[0], ctx)?],
        };
        Ok(SemisprayJet { n: self.n, jets })
    }

    /// `G^i(x, y)` only.
    pub fn accel_ctx(&self, x: &[f64], y: &[f64], ctx: &mut EvalContext) -> Result<Vec<f64>> {
        self.check(x, y)?;
        match &self.kind {
            Kind::Expr { compiled, .. } => {
                let vars: Vec<f64> = x.iter().chain(y).copied().collect();
                compiled.iter().map(|c| c.eval_f64(&vars)).collect()
            }
            Kind::Reduced(r) => Ok(vec![r.value(x[0], y[0], ctx)?]),
        }
    }
}

/// Eliminates one variable of a planar field, giving a 1-D semispray in the
/// retained variable. `anchor` seeds the implicit solve for the eliminated
/// variable (typically its value at a fixed point of interest).
pub fn reduce_planar(vf: &VectorField2, eliminate: Eliminate, anchor: f64) -> Semispray {
    reduce_with(EliminationReduction::new(vf.clone(), eliminate, anchor))
}

pub fn reduce_with(reduction: EliminationReduction) -> Semispray {
    Semispray {
        n: 1,
        kind: Kind::Reduced(Box::new(reduction)),
        guard: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn lane_emden_semispray_vanishes_at_origin() {
        let s = Semispray::parse(
            &["(1/2)*((5-n)/(n-1)*y1 + 2*(3-n)/(n-1)^2*x1 + B^(n-1)*x1^n)"],
            &params(&[("n", 5.0), ("B", 1.0)]),
        )
        .unwrap();
        let j = s.value(&[0.0], &[0.0]).unwrap();
        assert_eq!(j.g(0), 0.0);
        assert_eq!(j.dg_dy(0, 0), 0.0);
        assert_eq!(j.dg_dx(0, 0), -0.125);
    }

    #[test]
    fn trivial_semisprays() {
        let free = Semispray::parse(&["0"], &params(&[])).unwrap();
        let j = free.value(&[0.3], &[1.7]).unwrap();
        assert_eq!((j.g(0), j.dg_dx(0, 0), j.dg_dy(0, 0)), (0.0, 0.0, 0.0));
        let harm = Semispray::parse(&["x1"], &params(&[])).unwrap();
        assert_eq!(harm.value(&[1.0], &[0.0]).unwrap().g(0), 1.0);
        assert!(matches!(
            Semispray::parse(&["x1*k"], &params(&[])),
            Err(Error::UnboundIdentifier(_))
        ));
    }

    #[test]
    fn brusselator_elimination_recovers_u() {
        let vf = VectorField2::parse(
            "1-(b+1)*u+a*u^2*v",
            "b*u-a*u^2*v",
            params(&[("a", 4.0), ("b", 0.5)]),
        )
        .unwrap();
        let r = EliminationReduction::new(vf, Eliminate::U, 0.9);
        let u = r.solve(0.125, 0.0, &mut EvalContext::default()).unwrap();
        // bisection oracle for b u - a u^2 x = 0 on [0.5, 1.5]
        let (mut lo, mut hi) = (0.5f64, 1.5f64);
        let g = |u: f64| 0.5 * u - 4.0 * u * u * 0.125;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((u - 1.0).abs() < 1e-12 && (u - lo).abs() < 1e-12);
    }

    #[test]
    fn linear_elimination_matches_hand_algebra() {
        // f = v - u, g = -u; eliminate u: x = v, y = -u, u = -y
        // ẍ = g_u f + g_v y = -(v - u) = -(x + y), so G = (x + y)/2
        let vf = VectorField2::parse("v-u", "-u", params(&[])).unwrap();
        let s = reduce_planar(&vf, Eliminate::U, 0.0);
        let j = s.value(&[0.0], &[0.0]).unwrap();
        assert_eq!(j.g(0), 0.0);
        assert!((j.dg_dx(0, 0) - 0.5).abs() < 1e-15);
        assert!((j.dg_dy(0, 0) - 0.5).abs() < 1e-15);
        let j = s.value(&[0.3], &[-0.2]).unwrap();
        assert!((j.g(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn elimination_needs_dependence_on_eliminated_variable() {
        let vf = VectorField2::parse("u", "v", params(&[])).unwrap();
        let s = reduce_planar(&vf, Eliminate::U, 0.0);
        assert!(matches!(
            s.value(&[0.0], &[0.0]),
            Err(Error::SingularElimination { variable: 'u', .. })
        ));
    }

    #[test]
    fn bracket_fallback_when_newton_fails() {
        // h(u) = u^3 - 2u + 2 from 0 cycles under Newton
        let vf = VectorField2::parse("v", "u^3-2*u+2+0*v", params(&[])).unwrap();
        let mut r = EliminationReduction::new(vf, Eliminate::U, 0.0);
        r.solver.bracket = Some((-3.0, -1.0));
        let u = r.solve(0.0, 0.0, &mut EvalContext::default()).unwrap();
        assert!((u.powi(3) - 2.0 * u + 2.0).abs() < 1e-12);
    }

    #[test]
    fn guard_rejects_singular_points() {
        let s = Semispray::parse(&["1/(1-2*x1)"], &params(&[]))
            .unwrap()
            .with_guard(Arc::new(|x, _| (1.0 - 2.0 * x[0]).abs() > 1e-12));
        assert!(matches!(s.value(&[0.5], &[0.0]), Err(Error::Domain(_))));
        assert!(s.value(&[0.25], &[0.0]).is_ok());
    }
}
