//! Fixed points of planar fields and their classification by the
//! eigenvalues of the Jacobian.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sode::VectorField2;

pub type Matrix2 = [[f64; 2]; 2];

/// Linear type of a planar fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearClass {
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
    Saddle,
    Center,
    StarNode,
    DegenerateNode,
    NonHyperbolic,
}

impl LinearClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LinearClass::StableNode => "stable_node",
            LinearClass::UnstableNode => "unstable_node",
            LinearClass::StableFocus => "stable_focus",
            LinearClass::UnstableFocus => "unstable_focus",
            LinearClass::Saddle => "saddle",
            LinearClass::Center => "center",
            LinearClass::StarNode => "star_node",
            LinearClass::DegenerateNode => "degenerate_node",
            LinearClass::NonHyperbolic => "non_hyperbolic",
        }
    }
}

impl std::fmt::Display for LinearClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complex number as `(re, im)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    pub point: [f64; 2],
    pub jacobian: Matrix2,
    pub trace: f64,
    pub det: f64,
    /// `trace² − 4·det`
    pub discriminant: f64,
    pub eigenvalues: [Eigenvalue; 2],
    pub class: LinearClass,
    /// `Some(true)` if every eigenvalue has negative real part,
    /// `Some(false)` if one is positive, `None` when marginal.
    pub stable: Option<bool>,
    /// Tolerance used for the hyperbolicity decisions.
    pub tolerance: f64,
}

fn frobenius(j: &Matrix2) -> f64 {
    j.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Default hyperbolicity tolerance `1e-8·‖J‖`.
pub fn default_tolerance(j: &Matrix2) -> f64 {
    1e-8 * frobenius(j)
}

/// Roots of `λ² − tr·λ + det = 0`.
pub fn eigen2(j: &Matrix2) -> [Eigenvalue; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation: take the larger-magnitude root first
        let big = 0.5 * (tr + if tr >= 0.0 { s } else { -s });
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if big >= small { (small, big) } else { (big, small) };
        [Eigenvalue { re: a, im: 0.0 }, Eigenvalue { re: b, im: 0.0 }]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [
            Eigenvalue { re: 0.5 * tr, im: -im },
            Eigenvalue { re: 0.5 * tr, im },
        ]
    }
}

/// Classifies the fixed point with Jacobian `j`. `eps` decides when a
/// determinant, discriminant or real part counts as zero.
pub fn classify_linear(j: &Matrix2, eps: f64) -> LinearReport {
    classify_at([f64::NAN; 2], j, eps)
}

pub fn classify_at(point: [f64; 2], j: &Matrix2, eps: f64) -> LinearReport {
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let discriminant = trace * trace - 4.0 * det;
    let eigenvalues = eigen2(j);
    let half_tr = 0.5 * trace;
    let class = if det < -eps {
        LinearClass::Saddle
    } else if det.abs() <= eps {
        LinearClass::NonHyperbolic
    } else if discriminant < -eps {
        if half_tr.abs() <= eps {
            LinearClass::Center
        } else if trace < 0.0 {
            LinearClass::StableFocus
        } else {
            LinearClass::UnstableFocus
        }
    } else if discriminant > eps {
        if trace < 0.0 {
            LinearClass::StableNode
        } else {
            LinearClass::UnstableNode
        }
    } else if half_tr.abs() <= eps {
        LinearClass::NonHyperbolic
    } else if j[0][1].abs() <= eps && j[1][0].abs() <= eps && (j[0][0] - j[1][1]).abs() <= eps {
        LinearClass::StarNode
    } else {
        LinearClass::DegenerateNode
    };
    let stable = match class {
        LinearClass::Saddle => Some(false),
        LinearClass::Center | LinearClass::NonHyperbolic => {
            let max_re = eigenvalues[0].re.max(eigenvalues[1].re);
            if max_re > eps {
                Some(false)
            } else {
                None
            }
        }
        _ => Some(trace < 0.0),
    };
    LinearReport {
        point,
        jacobian: *j,
        trace,
        det,
        discriminant,
        eigenvalues,
        class,
        stable,
        tolerance: eps,
    }
}

/// Classifies the fixed point `p` of `vf` with the default tolerance.
pub fn analyze_point(vf: &VectorField2, p: [f64; 2]) -> Result<LinearReport> {
    let (_, j) = vf.jacobian(p[0], p[1])?;
    Ok(classify_at(p, &j, default_tolerance(&j)))
}

/// Axis-aligned search rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl SearchBox {
    pub fn new(u: (f64, f64), v: (f64, f64)) -> Self {
        Self { u, v }
    }

    pub fn diameter(&self) -> f64 {
        (self.u.1 - self.u.0).hypot(self.v.1 - self.v.0)
    }

    fn contains(&self, p: [f64; 2], slack: f64) -> bool {
        p[0] >= self.u.0 - slack
            && p[0] <= self.u.1 + slack
            && p[1] >= self.v.0 - slack
            && p[1] <= self.v.1 + slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    /// Jacobian numerically singular at the root.
    pub singular: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<FixedPoint>,
    /// Set when a root has a singular Jacobian, e.g. a continuum of equilibria.
    pub degenerate: bool,
}

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-12;
/// Acceptance threshold for a converged root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Newton iteration with a backtracking line search on `‖F‖`.
pub fn newton_fixed_point(vf: &VectorField2, start: [f64; 2]) -> Option<FixedPoint> {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let mut p = start;
    let (mut f, mut j) = vf.jacobian(p[0], p[1]).ok()?;
    let mut r = norm(f);
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER && r > NEWTON_RESIDUAL_TOL {
        iterations += 1;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let du = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dv = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let q = [p[0] - lambda * du, p[1] - lambda * dv];
            if let Ok((fq, jq)) = vf.jacobian(q[0], q[1]) {
                let rq = norm(fq);
                if rq.is_finite() && rq < r {
                    p = q;
                    f = fq;
                    j = jq;
                    r = rq;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !(r <= ROOT_RESIDUAL_TOL) {
        return None;
    }
    let scale = 1.0 + frobenius(&j).powi(2);
    // Newton is only linear at a double root; doubled steps are quadratic there
    for _ in 0..NEWTON_MAX_ITER {
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() <= 1e-3 * scale) || det == 0.0 || r == 0.0 {
            break;
        }
        let du = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dv = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let q = [p[0] - 2.0 * du, p[1] - 2.0 * dv];
        match vf.jacobian(q[0], q[1]) {
            Ok((fq, jq)) if norm(fq) < r => {
                p = q;
                f = fq;
                j = jq;
                r = norm(fq);
                iterations += 1;
            }
            _ => break,
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    Some(FixedPoint {
        point: p,
        residual: r,
        iterations,
        singular: det.abs() <= 1e-12 * scale,
    })
}

/// Newton roots seeded from the centres of a `grid × grid` partition of
/// `bx`, deduplicated within `1e-6·diam(bx)`.
pub fn find_fixed_points(vf: &VectorField2, bx: &SearchBox, grid: usize) -> FixedPointSet {
    find_fixed_points_seeded(vf, bx, grid, &[])
}

/// [`find_fixed_points`] with additional Newton seeds.
pub fn find_fixed_points_seeded(
    vf: &VectorField2,
    bx: &SearchBox,
    grid: usize,
    extra: &[[f64; 2]],
) -> FixedPointSet {
    let grid = grid.max(2);
    let du = (bx.u.1 - bx.u.0) / grid as f64;
    let dv = (bx.v.1 - bx.v.0) / grid as f64;
    let mut seeds: Vec<[f64; 2]> = (0..grid)
        .flat_map(|i| {
            (0..grid).map(move |k| {
                [
                    bx.u.0 + (i as f64 + 0.5) * du,
                    bx.v.0 + (k as f64 + 0.5) * dv,
                ]
            })
        })
        .collect();
    seeds.extend_from_slice(extra);
    let diam = bx.diameter();
    let roots: Vec<FixedPoint> = seeds
        .par_iter()
        .filter_map(|s| newton_fixed_point(vf, *s))
        .filter(|fp| bx.contains(fp.point, 1e-9 * diam))
        .collect();
    let radius = 1e-6 * diam;
    let mut out: Vec<FixedPoint> = Vec::new();
    for fp in roots {
        let dup = out.iter_mut().find(|q| {
            (q.point[0] - fp.point[0]).hypot(q.point[1] - fp.point[1]) <= radius
        });
        match dup {
            Some(q) if fp.residual < q.residual => *q = fp,
            Some(_) => {}
            None => out.push(fp),
        }
    }
    out.sort_by(|a, b| {
        a.point[0]
            .total_cmp(&b.point[0])
            .then(a.point[1].total_cmp(&b.point[1]))
    });
    let degenerate = out.iter().any(|p| p.singular);
    FixedPointSet {
        points: out,
        degenerate,
    }
}
