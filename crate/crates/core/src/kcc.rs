//! KCC invariants of a semispray and Jacobi stability.
//!
//! With `N^i_j = ∂G^i/∂y^j` and `G^i_jl = ∂N^i_j/∂y^l`:
//!
//! * first invariant `ε^i = 2G^i − N^i_j y^j`
//! * deviation curvature
//!   `P^i_j = −2∂G^i/∂x^j − 2G^l G^i_jl + y^l ∂N^i_j/∂x^l + N^i_l N^l_j`
//! * torsion `P^i_jk = (∂P^i_j/∂y^k − ∂P^i_k/∂y^j)/3`, its derivative
//!   `P^i_jkl = ∂P^i_jk/∂y^l` and the Douglas-type tensor
//!   `D^i_jkl = ∂G^i_jk/∂y^l`.
//!
//! The first two are exact up to rounding since they only need second
//! derivatives of `G`. The last three are central differences.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sode::{reduce_planar, Eliminate, EvalContext, Semispray, SemisprayJet, VectorField2};

/// Dense tensor with every index running over `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub n: usize,
    pub rank: usize,
    /// Row-major: the last index varies fastest.
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Self {
            n,
            rank,
            data: vec![0.0; n.pow(rank as u32)],
        }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank, "tensor index has wrong rank");
        idx.iter().fold(0, |acc, &i| {
            assert!(i < self.n, "tensor index out of range");
            acc * self.n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = self.offset(idx);
        self.data[k] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// All multi-indices in storage order.
    fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.data.len()).map(move |mut k| {
            let mut idx = vec![0; self.rank];
            for slot in idx.iter_mut().rev() {
                *slot = k % self.n;
                k /= self.n;
            }
            idx
        })
    }
}

pub type Matrix = Vec<Vec<f64>>;

/// How a set of invariants was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Jet,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherInvariants {
    /// `P^i_jk`
    pub third: Tensor,
    /// `P^i_jkl`
    pub fourth: Tensor,
    /// `D^i_jkl`
    pub fifth: Tensor,
    pub step: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KccInvariants {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `N^i_j`
    pub connection: Matrix,
    /// `G^i_jl`
    pub berwald: Tensor,
    /// `ε^i`
    pub epsilon: Vec<f64>,
    /// `P^i_j`
    pub deviation: Matrix,
    pub method: Method,
    pub higher: Option<HigherInvariants>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobiClass {
    JacobiStable,
    JacobiUnstable,
    Marginal,
}

impl JacobiClass {
    pub fn as_str(self) -> &'static str {
        match self {
            JacobiClass::JacobiStable => "jacobi_stable",
            JacobiClass::JacobiUnstable => "jacobi_unstable",
            JacobiClass::Marginal => "marginal",
        }
    }
}

impl std::fmt::Display for JacobiClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiReport {
    pub deviation: Matrix,
    /// Real parts of the eigenvalues of `P`, ascending.
    pub eigen_re: Vec<f64>,
    pub class: JacobiClass,
    pub tolerance: f64,
}

fn ctx_value(s: &Semispray, x: &[f64], y: &[f64], ctx: &mut EvalContext) -> Result<SemisprayJet> {
    s.value_ctx(x, y, ctx)
}

fn epsilon_from(j: &SemisprayJet, y: &[f64]) -> Vec<f64> {
    let n = j.dim();
    (0..n)
        .map(|i| 2.0 * j.g(i) - (0..n).map(|k| j.dg_dy(i, k) * y[k]).sum::<f64>())
        .collect()
}

fn connection_from(j: &SemisprayJet) -> Matrix {
    let n = j.dim();
    (0..n)
        .map(|i| (0..n).map(|k| j.dg_dy(i, k)).collect())
        .collect()
}

fn berwald_from(j: &SemisprayJet) -> Tensor {
    let n = j.dim();
    let mut t = Tensor::zeros(n, 3);
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                t.set(&[i, a, b], j.d2g_dydy(i, a, b));
            }
        }
    }
    t
}

fn deviation_from(j: &SemisprayJet, y: &[f64]) -> Matrix {
    let n = j.dim();
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        for (k, pik) in row.iter_mut().enumerate() {
            let mut acc = -2.0 * j.dg_dx(i, k);
            for l in 0..n {
                acc -= 2.0 * j.g(l) * j.d2g_dydy(i, k, l);
                acc += y[l] * j.d2g_dydx(i, k, l);
                acc += j.dg_dy(i, l) * j.dg_dy(l, k);
            }
            *pik = acc;
        }
    }
    p
}

/// First KCC invariant `ε^i = 2G^i − N^i_j y^j`.
pub fn first_invariant(s: &Semispray, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(epsilon_from(&s.value(x, y)?, y))
}

/// Deviation curvature tensor `P^i_j`.
pub fn deviation_curvature(s: &Semispray, x: &[f64], y: &[f64]) -> Result<Matrix> {
    deviation_curvature_ctx(s, x, y, &mut EvalContext::default())
}

pub fn deviation_curvature_ctx(
    s: &Semispray,
    x: &[f64],
    y: &[f64],
    ctx: &mut EvalContext,
) -> Result<Matrix> {
    Ok(deviation_from(&ctx_value(s, x, y, ctx)?, y))
}

/// Frobenius norm.
pub fn matrix_norm(p: &Matrix) -> f64 {
    p.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Default marginal tolerance `1e-8·(1 + ‖P‖)`.
pub fn default_jacobi_tolerance(p: &Matrix) -> f64 {
    1e-8 * (1.0 + matrix_norm(p))
}

/// Jacobi stable iff every eigenvalue of `P` has real part below `−eps`.
pub fn classify_jacobi(p: &Matrix, eps: f64) -> JacobiReport {
    let n = p.len();
    let mut eigen_re: Vec<f64> = if n == 1 {
        vec![p[0][0]]
    } else {
        let m = DMatrix::from_fn(n, n, |i, k| p[i][k]);
        m.complex_eigenvalues().iter().map(|z| z.re).collect()
    };
    eigen_re.sort_by(f64::total_cmp);
    let class = if eigen_re.iter().any(|r| r.abs() <= eps || r.is_nan()) {
        JacobiClass::Marginal
    } else if eigen_re.iter().all(|&r| r < -eps) {
        JacobiClass::JacobiStable
    } else {
        JacobiClass::JacobiUnstable
    };
    JacobiReport {
        deviation: p.clone(),
        eigen_re,
        class,
        tolerance: eps,
    }
}

/// Jacobi classification of the semispray at `(x, y)` with the default tolerance.
pub fn jacobi_at(s: &Semispray, x: &[f64], y: &[f64]) -> Result<JacobiReport> {
    let p = deviation_curvature(s, x, y)?;
    let eps = default_jacobi_tolerance(&p);
    Ok(classify_jacobi(&p, eps))
}

/// Default finite-difference step `1e-4·(1 + ‖y‖)`.
pub fn default_fd_step(y: &[f64]) -> f64 {
    1e-4 * (1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn shifted(y: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut z = y.to_vec();
    z[k] += h;
    z
}

/// `P^i_jk` at `(x, y)` by central differences of `P` in `y`.
fn torsion(s: &Semispray, x: &[f64], y: &[f64], h: f64, ctx: &mut EvalContext) -> Result<Tensor> {
    let n = s.dim();
    // dp[k][i][j] = ∂P^i_j/∂y^k
    let mut dp = Vec::with_capacity(n);
    for k in 0..n {
        let plus = deviation_curvature_ctx(s, x, &shifted(y, k, h), ctx)?;
        let minus = deviation_curvature_ctx(s, x, &shifted(y, k, -h), ctx)?;
        let d: Matrix = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| a.iter().zip(b).map(|(p, m)| (p - m) / (2.0 * h)).collect())
            .collect();
        dp.push(d);
    }
    let mut t = Tensor::zeros(n, 3);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t.set(&[i, j, k], (dp[k][i][j] - dp[j][i][k]) / 3.0);
            }
        }
    }
    Ok(t)
}

/// Invariants three to five by central differences with step `h`
/// (default [`default_fd_step`]).
pub fn higher_invariants(
    s: &Semispray,
    x: &[f64],
    y: &[f64],
    step: Option<f64>,
) -> Result<HigherInvariants> {
    let n = s.dim();
    let h = step.unwrap_or_else(|| default_fd_step(y));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("finite-difference step must be positive, got {h}")));
    }
    let mut ctx = EvalContext::default();
    let third = torsion(s, x, y, h, &mut ctx)?;
    let mut fourth = Tensor::zeros(n, 4);
    let mut fifth = Tensor::zeros(n, 4);
    for l in 0..n {
        let yp = shifted(y, l, h);
        let ym = shifted(y, l, -h);
        let tp = torsion(s, x, &yp, h, &mut ctx)?;
        let tm = torsion(s, x, &ym, h, &mut ctx)?;
        let bp = berwald_from(&ctx_value(s, x, &yp, &mut ctx)?);
        let bm = berwald_from(&ctx_value(s, x, &ym, &mut ctx)?);
        for idx in third.indices().collect::<Vec<_>>() {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            fourth.set(&[i, j, k, l], (tp.get(&idx) - tm.get(&idx)) / (2.0 * h));
            fifth.set(&[i, j, k, l], (bp.get(&idx) - bm.get(&idx)) / (2.0 * h));
        }
    }
    Ok(HigherInvariants {
        third,
        fourth,
        fifth,
        step: h,
        method: Method::FiniteDifference,
    })
}

/// All invariants at `(x, y)`; the finite-difference ones only on request.
pub fn kcc_invariants(s: &Semispray, x: &[f64], y: &[f64], higher: bool) -> Result<KccInvariants> {
    let j = s.value(x, y)?;
    Ok(KccInvariants {
        x: x.to_vec(),
        y: y.to_vec(),
        connection: connection_from(&j),
        berwald: berwald_from(&j),
        epsilon: epsilon_from(&j, y),
        deviation: deviation_from(&j, y),
        method: Method::Jet,
        higher: if higher {
            Some(higher_invariants(s, x, y, None)?)
        } else {
            None
        },
    })
}

/// Comparison of `4P¹₁` from the reduced semispray with the Jacobian
/// discriminant at a planar fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub eliminated: Eliminate,
    /// `4·P¹₁`
    pub lhs: f64,
    /// `tr² − 4·det`
    pub rhs: f64,
    pub residual: f64,
}

/// Reduces `vf` at its fixed point `p` by eliminating `eliminate` and
/// compares `4P¹₁` with the discriminant of the Jacobian.
pub fn theorem_check(vf: &VectorField2, p: [f64; 2], eliminate: Eliminate) -> Result<TheoremCheck> {
    let (_, jac) = vf.jacobian(p[0], p[1])?;
    let tr = jac[0][0] + jac[1][1];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let rhs = tr * tr - 4.0 * det;
    let (anchor, x) = match eliminate {
        Eliminate::U => (p[0], p[1]),
        Eliminate::V => (p[1], p[0]),
    };
    let s = reduce_planar(vf, eliminate, anchor);
    let y = s
        .reduction()
        .map(|r| r.lift(p[0], p[1]))
        .transpose()?
        .map_or(0.0, |(_, y)| y);
    let lhs = 4.0 * deviation_curvature(&s, &[x], &[y])?[0][0];
    Ok(TheoremCheck {
        eliminated: eliminate,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Picks the elimination with the larger implicit-function derivative
/// (`g_u` for `u`, `f_v` for `v`).
pub fn preferred_elimination(vf: &VectorField2, p: [f64; 2]) -> Result<Eliminate> {
    let (_, j) = vf.jacobian(p[0], p[1])?;
    let (gu, fv) = (j[1][0], j[0][1]);
    if gu == 0.0 && fv == 0.0 {
        return Err(Error::SingularElimination {
            variable: 'u',
            derivative: 0.0,
        });
    }
    Ok(if gu.abs() >= fv.abs() {
        Eliminate::U
    } else {
        Eliminate::V
    })
}
