//! Trajectories, deviation vectors and planar limit cycles.
//!
//! Integration uses the Dormand–Prince 5(4) pair with per-step error
//! control and cubic Hermite interpolation between accepted steps.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linstab::{find_fixed_points, SearchBox};
use crate::sode::{EvalContext, Semispray, VectorField2};

/// First-order autonomous system `ẋ = F(x)` of fixed dimension.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
    /// `false` on the singular set of the system.
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

impl OdeSystem for VectorField2 {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&mut self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let [f, g] = self.eval(x[0], x[1])?;
        dx[0] = f;
        dx[1] = g;
        Ok(())
    }
}

/// Semispray as the first-order system `ẋ = y`, `ẏ = −2G(x, y)`.
pub struct SemisprayFlow<'a> {
    pub spray: &'a Semispray,
    ctx: EvalContext,
}

impl<'a> SemisprayFlow<'a> {
    pub fn new(spray: &'a Semispray) -> Self {
        Self {
            spray,
            ctx: EvalContext::default(),
        }
    }
}

impl OdeSystem for SemisprayFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.spray.dim()
    }
    fn rhs(&mut self, _t: f64, s: &[f64], ds: &mut [f64]) -> Result<()> {
        let n = self.spray.dim();
        let (x, y) = s.split_at(n);
        let g = self.spray.accel_ctx(x, y, &mut self.ctx)?;
        ds[..n].copy_from_slice(y);
        for i in 0..n {
            ds[n + i] = -2.0 * g[i];
        }
        Ok(())
    }
    fn in_domain(&self, s: &[f64]) -> bool {
        let n = self.spray.dim();
        self.spray.in_domain(&s[..n], &s[n..])
    }
}

/// System given by a closure, with an optional domain predicate.
pub struct FnSystem<F, D = fn(&[f64]) -> bool> {
    dim: usize,
    f: F,
    domain: Option<D>,
}

impl<F> FnSystem<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, domain: None }
    }
}

impl<F, D> FnSystem<F, D>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    D: Fn(&[f64]) -> bool,
{
    pub fn with_domain(dim: usize, f: F, domain: D) -> Self {
        Self {
            dim,
            f,
            domain: Some(domain),
        }
    }
}

impl<F, D> OdeSystem for FnSystem<F, D>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    D: Fn(&[f64]) -> bool,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&mut self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.f)(t, x, dx)
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h0: None,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest scaled error estimate among accepted steps (≤ 1).
    pub max_error: f64,
}

/// Why an integration stopped before the end of its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `F(x)` at each stored state, used for interpolation.
    pub derivs: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
    pub truncated: Option<Truncation>,
}

/// Cubic Hermite interpolation on `[t0, t1]`.
pub fn hermite(t0: f64, x0: &[f64], f0: &[f64], t1: f64, x1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i])
        .collect()
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("trajectory has at least the initial state")
    }

    /// State at time `t` by Hermite interpolation; `None` outside the span.
    pub fn sample(&self, t: f64) -> Option<Vec<f64>> {
        let (a, b) = (self.t[0], self.t_end());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if t < lo || t > hi {
            return None;
        }
        if self.len() == 1 {
            return Some(self.states[0].clone());
        }
        let forward = b >= a;
        let k = self
            .t
            .partition_point(|&s| if forward { s < t } else { s > t })
            .clamp(1, self.len() - 1);
        Some(hermite(
            self.t[k - 1],
            &self.states[k - 1],
            &self.derivs[k - 1],
            self.t[k],
            &self.states[k],
            &self.derivs[k],
            t,
        ))
    }

    /// CSV with header `t,<names>`.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, x) in self.t.iter().zip(&self.states) {
            out.push_str(&fmt_num(*t));
            for v in x {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Round-trippable fixed-width scientific notation (17 significant digits).
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights equal the last row of A; these are b5 − b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Workspace {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            k: vec![vec![0.0; d]; 7],
            tmp: vec![0.0; d],
        }
    }
}

/// One Dormand–Prince step from `(t, x)` with `k[0] = F(x)` already set.
/// Returns the new state; `k[6]` holds `F` at the new state.
fn dp_step<S: OdeSystem + ?Sized>(
    sys: &mut S,
    ws: &mut Workspace,
    t: f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let d = x.len();
    for s in 1..7 {
        for i in 0..d {
            let mut acc = 0.0;
            for (j, a) in A[s][..s].iter().enumerate() {
                acc += a * ws.k[j][i];
            }
            ws.tmp[i] = x[i] + h * acc;
        }
        if s == 6 && !sys.in_domain(&ws.tmp) {
            return Err(Error::Domain("step left the domain".into()));
        }
        sys.rhs(t + C[s] * h, &ws.tmp, &mut ws.k[s])?;
    }
    Ok(ws.tmp.clone())
}

fn error_norm(ws: &Workspace, x: &[f64], xn: &[f64], h: f64, opts: &IntegratorOptions) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut e = 0.0;
        for (s, w) in E.iter().enumerate() {
            e += w * ws.k[s][i];
        }
        let sc = opts.atol + opts.rtol * x[i].abs().max(xn[i].abs());
        acc += (h * e / sc).powi(2);
    }
    (acc / d as f64).sqrt()
}

/// Data handed to the step observer.
pub struct StepInfo<'a> {
    pub t0: f64,
    pub x0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub x1: &'a [f64],
    pub f1: &'a [f64],
}

struct DriveOutcome {
    stats: IntegratorStats,
    truncated: Option<Truncation>,
}

fn is_domain_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Domain(_) | Error::SingularElimination { .. } | Error::NewtonDivergence(_)
    )
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &mut S,
    x0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &IntegratorOptions,
) -> f64 {
    if let Some(h) = opts.h0 {
        return h.abs().min(span.abs());
    }
    let d = x0.len() as f64;
    let norm = |v: &[f64]| {
        (v.iter()
            .zip(x0)
            .map(|(a, x)| (a / (opts.atol + opts.rtol * x.abs())).powi(2))
            .sum::<f64>()
            / d)
            .sqrt()
    };
    let d0 = norm(x0);
    let d1 = norm(f0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs()).min(opts.h_max);
    // second-derivative estimate via one Euler step
    let x1: Vec<f64> = x0
        .iter()
        .zip(f0)
        .map(|(x, f)| x + h * span.signum() * f)
        .collect();
    let mut f1 = vec![0.0; x0.len()];
    if sys.rhs(0.0, &x1, &mut f1).is_ok() {
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff) / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (1e-6f64).max(h * 1e-3)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        h = (100.0 * h).min(h1);
    }
    h.min(span.abs()).min(opts.h_max).max(1e-12 * span.abs())
}

/// Core adaptive loop. `observe` is called after each accepted step and
/// returns `false` to stop early.
fn drive<S, F>(
    sys: &mut S,
    x0: &[f64],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    mut observe: F,
) -> Result<DriveOutcome>
where
    S: OdeSystem + ?Sized,
    F: FnMut(&StepInfo) -> bool,
{
    let d = sys.dim();
    if x0.len() != d {
        return Err(Error::Input(format!(
            "initial state has dimension {}, system expects {d}",
            x0.len()
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::Input("tolerances must be positive".into()));
    }
    if !sys.in_domain(x0) {
        return Err(Error::Domain(format!("initial state {x0:?} is outside the domain")));
    }
    let mut stats = IntegratorStats::default();
    let mut ws = Workspace::new(d);
    let mut x = x0.to_vec();
    let mut t = t0;
    sys.rhs(t, &x, &mut ws.k[0])?;
    stats.evaluations += 1;
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(DriveOutcome {
            stats,
            truncated: None,
        });
    }
    let dir = span.signum();
    let mut h = initial_step(sys, &x, &ws.k[0].clone(), span, opts);
    let mut truncated = None;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::NotConverged(format!(
                "step budget {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = dir * step;
        let trial = dp_step(sys, &mut ws, t, &x, hs);
        stats.evaluations += 6;
        let xn = match trial {
            Ok(xn) => xn,
            Err(e) if is_domain_failure(&e) => {
                stats.rejected += 1;
                h = step * 0.25;
                if h < h_min {
                    truncated = Some(Truncation {
                        t,
                        reason: e.to_string(),
                    });
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = error_norm(&ws, &x, &xn, hs, opts);
        if !err.is_finite() || err > 1.0 {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.25
            };
            h = step * fac;
            if h < h_min {
                return Err(Error::StepSizeUnderflow { t });
            }
            continue;
        }
        stats.steps += 1;
        stats.max_error = stats.max_error.max(err);
        let tn = if last { t1 } else { t + hs };
        let proceed = observe(&StepInfo {
            t0: t,
            x0: &x,
            f0: &ws.k[0],
            t1: tn,
            x1: &xn,
            f1: &ws.k[6],
        });
        t = tn;
        x = xn;
        let f_new = std::mem::take(&mut ws.k[6]);
        ws.k[6] = std::mem::replace(&mut ws.k[0], f_new);
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (step * fac).min(opts.h_max);
        if !proceed {
            break;
        }
    }
    Ok(DriveOutcome { stats, truncated })
}

/// Adaptive integration of `sys` from `x0` over `span` (which may run
/// backwards). Leaving the domain truncates the trajectory and sets
/// [`Trajectory::truncated`].
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &mut S,
    x0: &[f64],
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let mut f0 = vec![0.0; x0.len()];
    if x0.len() == sys.dim() && sys.in_domain(x0) {
        sys.rhs(span.0, x0, &mut f0)?;
    }
    let mut t = vec![span.0];
    let mut states = vec![x0.to_vec()];
    let mut derivs = vec![f0];
    let out = drive(sys, x0, span.0, span.1, opts, |s| {
        t.push(s.t1);
        states.push(s.x1.to_vec());
        derivs.push(s.f1.to_vec());
        true
    })?;
    Ok(Trajectory {
        t,
        states,
        derivs,
        stats: out.stats,
        truncated: out.truncated,
    })
}

/// End state only, without storing the path.
pub fn integrate_to<S: OdeSystem + ?Sized>(
    sys: &mut S,
    x0: &[f64],
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Vec<f64>> {
    let mut end = x0.to_vec();
    let out = drive(sys, x0, span.0, span.1, opts, |s| {
        end.copy_from_slice(s.x1);
        true
    })?;
    if let Some(tr) = out.truncated {
        return Err(Error::Domain(format!("integration truncated at t = {}: {}", tr.t, tr.reason)));
    }
    Ok(end)
}

/// Fixed-step Dormand–Prince (fifth-order solution) with `n` equal steps.
pub fn integrate_fixed<S: OdeSystem + ?Sized>(
    sys: &mut S,
    x0: &[f64],
    span: (f64, f64),
    n: usize,
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(x0.len());
    let h = (span.1 - span.0) / n.max(1) as f64;
    let mut x = x0.to_vec();
    let mut t = span.0;
    for _ in 0..n.max(1) {
        sys.rhs(t, &x, &mut ws.k[0])?;
        x = dp_step(sys, &mut ws, t, &x, h)?;
        t += h;
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// deviation vectors

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    /// `ξ̈ + 2N ξ̇ + 2 ∂G/∂x ξ = 0`.
    RawVariational,
    /// `D²ξ/dt² = P ξ` written in a frame parallel along the base curve,
    /// `ξ = Φψ` with `Φ̇ = −NΦ`, `ψ̈ = Φ⁻¹PΦ ψ`.
    Covariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTrack {
    pub mode: DeviationMode,
    pub n: usize,
    pub t: Vec<f64>,
    /// Base state `(x, y)` at each time.
    pub base: Vec<Vec<f64>>,
    /// Raw mode: `ξ`. Covariant mode: frame components `ψ`.
    pub xi: Vec<Vec<f64>>,
    /// Time derivative of [`DeviationTrack::xi`].
    pub dxi: Vec<Vec<f64>>,
    /// Covariant mode only: `Φψ`, the same deviation in coordinates.
    pub xi_coordinates: Option<Vec<Vec<f64>>>,
    pub stats: IntegratorStats,
    pub truncated: Option<Truncation>,
}

impl DeviationTrack {
    pub fn norms(&self) -> Vec<f64> {
        self.xi
            .iter()
            .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
            .collect()
    }

    /// CSV with header `t,<state>,xi1..,dxi1..`.
    pub fn to_csv(&self, state_names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in state_names {
            let _ = write!(out, ",{n}");
        }
        for i in 1..=self.n {
            let _ = write!(out, ",xi{i}");
        }
        for i in 1..=self.n {
            let _ = write!(out, ",dxi{i}");
        }
        out.push('\n');
        for k in 0..self.t.len() {
            out.push_str(&fmt_num(self.t[k]));
            for v in self.base[k].iter().chain(&self.xi[k]).chain(&self.dxi[k]) {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

struct DeviationSystem<'a> {
    spray: &'a Semispray,
    mode: DeviationMode,
    ctx: EvalContext,
}

impl OdeSystem for DeviationSystem<'_> {
    fn dim(&self) -> usize {
        let n = self.spray.dim();
        match self.mode {
            DeviationMode::RawVariational => 4 * n,
            DeviationMode::Covariant => 4 * n + n * n,
        }
    }

    fn rhs(&mut self, _t: f64, s: &[f64], ds: &mut [f64]) -> Result<()> {
        let n = self.spray.dim();
        let (x, rest) = s.split_at(n);
        let (y, rest) = rest.split_at(n);
        let (xi, rest) = rest.split_at(n);
        let (dxi, frame) = rest.split_at(n);
        let jet = self.spray.value_ctx(x, y, &mut self.ctx)?;
        ds[..n].copy_from_slice(y);
        for i in 0..n {
            ds[n + i] = -2.0 * jet.g(i);
            ds[2 * n + i] = dxi[i];
        }
        match self.mode {
            DeviationMode::RawVariational => {
                for i in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += 2.0 * jet.dg_dy(i, k) * dxi[k] + 2.0 * jet.dg_dx(i, k) * xi[k];
                    }
                    ds[3 * n + i] = -acc;
                }
            }
            DeviationMode::Covariant => {
                let p = crate::kcc::deviation_curvature_ctx(self.spray, x, y, &mut self.ctx)?;
                let phi = DMatrix::from_row_slice(n, n, frame);
                let pm = DMatrix::from_fn(n, n, |i, k| p[i][k]);
                let nm = DMatrix::from_fn(n, n, |i, k| jet.dg_dy(i, k));
                let phi_inv = phi.clone().try_inverse().ok_or_else(|| {
                    Error::Domain("parallel frame became singular".into())
                })?;
                let psi = nalgebra::DVector::from_column_slice(xi);
                let acc = &phi_inv * &pm * &phi * psi;
                ds[3 * n..4 * n].copy_from_slice(acc.as_slice());
                let dphi = -(&nm * &phi);
                for i in 0..n {
                    for k in 0..n {
                        ds[4 * n + i * n + k] = dphi[(i, k)];
                    }
                }
            }
        }
        Ok(())
    }

    fn in_domain(&self, s: &[f64]) -> bool {
        let n = self.spray.dim();
        self.spray.in_domain(&s[..n], &s[n..2 * n])
    }
}

/// Integrates the base curve from `(x0, y0)` together with a deviation
/// vector started at `ξ(0) = 0`, `ξ̇(0) = W/‖W‖`.
pub fn integrate_deviation(
    spray: &Semispray,
    x0: &[f64],
    y0: &[f64],
    w: &[f64],
    mode: DeviationMode,
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<DeviationTrack> {
    let n = spray.dim();
    if x0.len() != n || y0.len() != n || w.len() != n {
        return Err(Error::Input(format!("deviation inputs must all have dimension {n}")));
    }
    let wn = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(wn > 0.0 && wn.is_finite()) {
        return Err(Error::Input("initial deviation velocity must be nonzero".into()));
    }
    let mut s0: Vec<f64> = x0.iter().chain(y0).copied().collect();
    s0.extend(std::iter::repeat_n(0.0, n));
    s0.extend(w.iter().map(|a| a / wn));
    if mode == DeviationMode::Covariant {
        for i in 0..n {
            for k in 0..n {
                s0.push(if i == k { 1.0 } else { 0.0 });
            }
        }
    }
    let mut sys = DeviationSystem {
        spray,
        mode,
        ctx: EvalContext::default(),
    };
    let tr = integrate(&mut sys, &s0, span, opts)?;
    let mut out = DeviationTrack {
        mode,
        n,
        t: tr.t.clone(),
        base: Vec::with_capacity(tr.len()),
        xi: Vec::with_capacity(tr.len()),
        dxi: Vec::with_capacity(tr.len()),
        xi_coordinates: None,
        stats: tr.stats,
        truncated: tr.truncated.clone(),
    };
    let mut coords = Vec::new();
    for s in &tr.states {
        out.base.push(s[..2 * n].to_vec());
        out.xi.push(s[2 * n..3 * n].to_vec());
        out.dxi.push(s[3 * n..4 * n].to_vec());
        if mode == DeviationMode::Covariant {
            let phi = DMatrix::from_row_slice(n, n, &s[4 * n..]);
            let v = phi * nalgebra::DVector::from_column_slice(&s[2 * n..3 * n]);
            coords.push(v.as_slice().to_vec());
        }
    }
    if mode == DeviationMode::Covariant {
        out.xi_coordinates = Some(coords);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// limit cycles

/// Ray from `anchor` along `direction` on the line `n·(p − anchor) = 0`,
/// crossed in the direction of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub anchor: [f64; 2],
    /// Unit normal.
    pub normal: [f64; 2],
    /// Unit direction of the counted ray, perpendicular to `normal`.
    pub direction: [f64; 2],
}

impl Section {
    pub fn new(anchor: [f64; 2], normal: [f64; 2]) -> Result<Self> {
        let len = normal[0].hypot(normal[1]);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Input("section normal must be nonzero".into()));
        }
        let normal = [normal[0] / len, normal[1] / len];
        Ok(Self {
            anchor,
            normal,
            direction: [normal[1], -normal[0]],
        })
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.normal[0] * (p[0] - self.anchor[0]) + self.normal[1] * (p[1] - self.anchor[1])
    }

    /// Unit direction of the counted ray; `n` rotated by −90° unless built
    /// with [`Section::through`].
    pub fn tangent(&self) -> [f64; 2] {
        self.direction
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        let d = self.tangent();
        [self.anchor[0] + s * d[0], self.anchor[1] + s * d[1]]
    }

    pub fn coordinate(&self, p: &[f64]) -> f64 {
        let d = self.tangent();
        d[0] * (p[0] - self.anchor[0]) + d[1] * (p[1] - self.anchor[1])
    }

    /// Section through `anchor` and `seed`, oriented along the flow at `seed`.
    pub fn through(vf: &VectorField2, anchor: [f64; 2], seed: [f64; 2]) -> Result<Self> {
        let d = [seed[0] - anchor[0], seed[1] - anchor[1]];
        if d[0].hypot(d[1]) == 0.0 {
            return Err(Error::Input("seed coincides with the section anchor".into()));
        }
        let [f, g] = vf.eval(seed[0], seed[1])?;
        let mut sec = Self::new(anchor, [-d[1], d[0]])?;
        if sec.normal[0] * f + sec.normal[1] * g < 0.0 {
            sec = Self::new(anchor, [d[1], -d[0]])?;
            sec.direction = [-sec.direction[0], -sec.direction[1]];
        }
        Ok(sec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleClass {
    StableCycle,
    UnstableCycle,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleReport {
    pub section: Section,
    /// Fixed point of the return map.
    pub point: [f64; 2],
    pub period: f64,
    /// `exp(∫ div F dt)` over one period.
    pub multiplier: f64,
    /// Central-difference slope of the return map.
    pub multiplier_secant: f64,
    pub class: CycleClass,
    /// Distance between the point and its image after one period.
    pub closure: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    pub integrator: IntegratorOptions,
    /// Longest time allowed for a single return.
    pub horizon: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `|M − 1|` below which the cycle is reported marginal.
    pub marginal_tol: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            horizon: 1e3,
            tol: 1e-8,
            max_iter: 500,
            marginal_tol: 1e-6,
        }
    }
}

/// First crossing of the section in the positive direction after leaving `p`.
/// Returns `(section coordinate, return time)`.
pub fn return_map(
    vf: &VectorField2,
    section: &Section,
    s: f64,
    opts: &CycleOptions,
) -> Result<(f64, f64)> {
    let p0 = section.point(s);
    let mut sys = vf.clone();
    let mut hit: Option<(f64, Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>)> = None;
    let mut left = false;
    let out = drive(&mut sys, &p0, 0.0, opts.horizon, &opts.integrator, |st| {
        let a = section.value(st.x0);
        let b = section.value(st.x1);
        if b < 0.0 {
            left = true;
        }
        if left && a < 0.0 && b >= 0.0 && section.coordinate(st.x1) > 0.0 {
            hit = Some((st.t0, st.x0.to_vec(), st.f0.to_vec(), st.t1, st.x1.to_vec(), st.f1.to_vec()));
            return false;
        }
        true
    })?;
    let Some((ta, xa, fa, tb, xb, fb)) = hit else {
        if let Some(tr) = out.truncated {
            return Err(Error::Domain(format!("orbit left the domain at t = {}", tr.t)));
        }
        return Err(Error::NoReturn {
            horizon: opts.horizon,
        });
    };
    // bracket the crossing on the Hermite interpolant
    let sig = |t: f64| section.value(&hermite(ta, &xa, &fa, tb, &xb, &fb, t));
    let (mut lo, mut hi) = (ta, tb);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sig(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tc = 0.5 * (lo + hi);
    // polish against the integrator itself
    for _ in 0..3 {
        let pc = integrate_to(&mut sys, &xa, (ta, tc), &opts.integrator)?;
        let [f, g] = vf.eval(pc[0], pc[1])?;
        let rate = section.normal[0] * f + section.normal[1] * g;
        if rate <= 0.0 {
            break;
        }
        let dt = -section.value(&pc) / rate;
        tc += dt;
        if dt.abs() <= 1e-14 * (1.0 + tc.abs()) {
            break;
        }
    }
    let pc = integrate_to(&mut sys, &xa, (ta, tc), &opts.integrator)?;
    Ok((section.coordinate(&pc), tc))
}

/// `exp(∫₀ᵀ div F dt)` by three-point Gauss–Legendre quadrature on each
/// stored step of `cycle`.
pub fn multiplier_divergence(vf: &VectorField2, cycle: &Trajectory, period: f64) -> Result<f64> {
    let nodes = [
        (-(0.6f64).sqrt(), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        ((0.6f64).sqrt(), 5.0 / 9.0),
    ];
    let t_end = cycle.t[0] + period;
    let mut integral = 0.0;
    for k in 1..cycle.len() {
        let (a, b) = (cycle.t[k - 1], cycle.t[k].min(t_end));
        if b <= a {
            break;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (z, w) in nodes {
            let t = mid + half * z;
            let p = hermite(
                cycle.t[k - 1],
                &cycle.states[k - 1],
                &cycle.derivs[k - 1],
                cycle.t[k],
                &cycle.states[k],
                &cycle.derivs[k],
                t,
            );
            integral += w * half * vf.divergence(p[0], p[1])?;
        }
    }
    Ok(integral.exp())
}

fn nearest_fixed_point(vf: &VectorField2, seed: [f64; 2]) -> Result<[f64; 2]> {
    let r = 2.0 * (1.0 + seed[0].hypot(seed[1]));
    let bx = SearchBox::new((seed[0] - r, seed[0] + r), (seed[1] - r, seed[1] + r));
    let set = find_fixed_points(vf, &bx, 16);
    set.points
        .iter()
        .map(|p| p.point)
        .min_by(|a, b| {
            let da = (a[0] - seed[0]).hypot(a[1] - seed[1]);
            let db = (b[0] - seed[0]).hypot(b[1] - seed[1]);
            da.total_cmp(&db)
        })
        .ok_or_else(|| {
            Error::NotConverged("no fixed point near the seed to anchor a section".into())
        })
}

/// Locates a periodic orbit through the return map of `section` (default:
/// the line from the nearest fixed point through `seed`).
pub fn find_limit_cycle(
    vf: &VectorField2,
    seed: [f64; 2],
    section: Option<Section>,
    opts: &CycleOptions,
) -> Result<LimitCycleReport> {
    let section = match section {
        Some(s) => s,
        None => Section::through(vf, nearest_fixed_point(vf, seed)?, seed)?,
    };
    let scale = 1.0 + section.coordinate(&seed).abs();
    let mut s = section.coordinate(&seed);
    let mut iterations = 0;
    // plain iteration of the return map brings s near the attracting cycle
    let mut prev: Option<(f64, f64)> = None;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let (next, _) = return_map(vf, &section, s, opts)?;
        let phi = next - s;
        if phi.abs() <= opts.tol * scale {
            converged = true;
            break;
        }
        // switch to secant once the residual is small or iteration is slow
        if let Some((sp, php)) = prev {
            if php != phi && (phi.abs() < 1e-3 * scale || iterations > 20) {
                let cand = s - phi * (s - sp) / (phi - php);
                if cand.is_finite() && cand > 0.0 {
                    prev = Some((s, phi));
                    s = cand;
                    continue;
                }
            }
        }
        prev = Some((s, phi));
        s = next;
    }
    if !converged {
        return Err(Error::NotConverged(format!(
            "return map did not settle after {iterations} iterations"
        )));
    }
    if s.abs() <= 1e-6 * scale {
        return Err(Error::NotConverged(
            "orbit collapses onto the section anchor".into(),
        ));
    }
    let (_, period) = return_map(vf, &section, s, opts)?;
    let p = section.point(s);
    let mut sys = vf.clone();
    let cycle = integrate(&mut sys, &p, (0.0, period), &opts.integrator)?;
    let end = cycle.last();
    let closure = (end[0] - p[0]).hypot(end[1] - p[1]);
    let multiplier = multiplier_divergence(vf, &cycle, period)?;
    let delta = 1e-4 * scale;
    let (sp, _) = return_map(vf, &section, s + delta, opts)?;
    let (sm, _) = return_map(vf, &section, s - delta, opts)?;
    let multiplier_secant = (sp - sm) / (2.0 * delta);
    let class = if (multiplier - 1.0).abs() <= opts.marginal_tol {
        CycleClass::Marginal
    } else if multiplier.abs() < 1.0 {
        CycleClass::StableCycle
    } else {
        CycleClass::UnstableCycle
    };
    Ok(LimitCycleReport {
        section,
        point: p,
        period,
        multiplier,
        multiplier_secant,
        class,
        closure,
        iterations,
    })
}
