//! Parameter sweeps over the built-in models and threshold location.
//!
//! A sweep evaluates one named critical point per grid node and reports its
//! linear and Jacobi classification. Rows are computed in parallel and
//! merged by grid index, so output does not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::fmt_num;
use crate::kcc::{classify_jacobi, default_jacobi_tolerance, JacobiClass};
use crate::linstab::{analyze_point, newton_fixed_point, LinearClass};
use crate::models::{lyapunov_hessian_eigen, model, sphere_radicand, Model, ModelName, Threshold};

/// `lo:hi:step` range of one swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn new(name: &str, lo: f64, hi: f64, step: f64) -> Result<Self> {
        let r = Self {
            name: name.to_string(),
            lo,
            hi,
            step,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err(Error::Input(format!("range for {} must be finite", self.name)));
        }
        if !(self.step > 0.0) {
            return Err(Error::Input(format!("range step for {} must be positive", self.name)));
        }
        if !(self.lo < self.hi) {
            return Err(Error::Input(format!("range for {} needs lo < hi", self.name)));
        }
        Ok(())
    }

    /// Number of grid nodes, endpoints included when `hi − lo` is a whole
    /// number of steps.
    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

impl FromStr for ParamRange {
    type Err = Error;
    /// Parses `name=lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("range `{s}` must look like name=lo:hi:step"));
        let (name, rest) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 || name.trim().is_empty() {
            return Err(bad());
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        ParamRange::new(name.trim(), num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub model: ModelName,
    /// One range for a line sweep, two for a raster (first varies slowest).
    pub ranges: Vec<ParamRange>,
    pub fixed: BTreeMap<String, f64>,
    /// Critical point label; the model default when `None`.
    pub point: Option<String>,
}

impl SweepSpec {
    pub fn new(model: ModelName, ranges: Vec<ParamRange>) -> Self {
        Self {
            model,
            ranges,
            fixed: BTreeMap::new(),
            point: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() || self.ranges.len() > 2 {
            return Err(Error::Input("a sweep takes one or two ranges".into()));
        }
        let keys: Vec<&str> = self.model.parameters().iter().map(|(k, _)| *k).collect();
        for (i, r) in self.ranges.iter().enumerate() {
            r.validate()?;
            if !keys.contains(&r.name.as_str()) {
                return Err(Error::Input(format!(
                    "model {} has no parameter `{}` (expected {})",
                    self.model,
                    r.name,
                    keys.join(", ")
                )));
            }
            if self.ranges[..i].iter().any(|q| q.name == r.name) || self.fixed.contains_key(&r.name) {
                return Err(Error::Input(format!("parameter `{}` given twice", r.name)));
            }
        }
        for k in self.fixed.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(Error::Input(format!("model {} has no parameter `{k}`", self.model)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(ParamRange::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter values at grid index `i`.
    pub fn grid_point(&self, i: usize) -> Vec<(String, f64)> {
        let mut rem = i;
        let mut out = vec![(String::new(), 0.0); self.ranges.len()];
        for (k, r) in self.ranges.iter().enumerate().rev() {
            let n = r.len();
            out[k] = (r.name.clone(), r.value(rem % n));
            rem /= n;
        }
        out
    }
}

/// Classification of one critical point at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub params: Vec<(String, f64)>,
    pub point: String,
    pub fixed_point: Option<[f64; 2]>,
    pub trace: Option<f64>,
    pub det: Option<f64>,
    pub discriminant: Option<f64>,
    pub p11: Option<f64>,
    pub linear_class: Option<LinearClass>,
    pub jacobi_class: Option<JacobiClass>,
    pub flags: Vec<String>,
}

/// Point reported by default for each model.
pub fn default_point(m: &Model) -> &'static str {
    match m.name {
        ModelName::Brusselator => "S",
        ModelName::LaneEmden => {
            if m.reference.point("Xn").is_some() {
                "Xn"
            } else if m.reference.point("Xin").is_some() {
                "Xin"
            } else {
                "X0"
            }
        }
        ModelName::Sphere => "S1",
        ModelName::Brane => "Xg",
        ModelName::DarkEnergy => "C",
    }
}

fn near_zero(q: f64) -> bool {
    q.abs() <= 1e-6 * (1.0 + q.abs())
}

/// Location of a reference point, polished by Newton when it is a real
/// equilibrium. Returns the point and whether it is an equilibrium.
fn locate(m: &Model, label: &str, flags: &mut Vec<String>) -> Result<([f64; 2], bool)> {
    let r = m
        .reference
        .point(label)
        .ok_or_else(|| Error::Input(format!("model {} has no point `{label}` here", m.name)))?;
    if !r.exists {
        flags.push("nonexistent".into());
        return Ok((r.point, false));
    }
    let scale = 1.0 + r.point[0].abs().max(r.point[1].abs());
    match newton_fixed_point(&m.field, r.point) {
        Some(fp) if (fp.point[0] - r.point[0]).hypot(fp.point[1] - r.point[1]) <= 1e-6 * scale => {
            if fp.singular {
                flags.push("singular".into());
            }
            Ok((fp.point, true))
        }
        _ => {
            flags.push("newton_failed".into());
            Ok((r.point, true))
        }
    }
}

/// Evaluates one row. Failures become flags.
pub fn evaluate_row(name: ModelName, params: &BTreeMap<String, f64>, point: Option<&str>) -> RegionRow {
    let mut row = RegionRow {
        params: params.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        point: point.unwrap_or("").to_string(),
        fixed_point: None,
        trace: None,
        det: None,
        discriminant: None,
        p11: None,
        linear_class: None,
        jacobi_class: None,
        flags: vec![],
    };
    let m = match model(name, params) {
        Ok(m) => m,
        Err(e) => {
            row.flags.push(e.tag().into());
            return row;
        }
    };
    row.flags.extend(m.reference.flags.iter().cloned());
    let label = point.unwrap_or_else(|| default_point(&m));
    row.point = label.to_string();
    let (p, _) = match locate(&m, label, &mut row.flags) {
        Ok(x) => x,
        Err(_) => {
            row.flags.push("no_point".into());
            return row;
        }
    };
    row.fixed_point = Some(p);
    match analyze_point(&m.field, p) {
        Ok(lin) => {
            row.trace = Some(lin.trace);
            row.det = Some(lin.det);
            row.discriminant = Some(lin.discriminant);
            row.linear_class = Some(lin.class);
        }
        Err(e) => row.flags.push(e.tag().into()),
    }
    match m.p11_generic(p) {
        Ok(v) => {
            row.p11 = Some(v);
            let pm = vec![vec![v]];
            row.jacobi_class = Some(classify_jacobi(&pm, default_jacobi_tolerance(&pm)).class);
        }
        Err(e) => row.flags.push(e.tag().into()),
    }
    let near = [row.discriminant, row.p11, row.trace, row.det]
        .into_iter()
        .flatten()
        .any(near_zero);
    if near {
        row.flags.push("near_boundary".into());
    }
    row
}

/// Whether a reference threshold falls within half a grid step of `x`.
fn threshold_hit(t: &Threshold, param: &str, x: f64, step: f64) -> bool {
    if t.parameter == param {
        (t.value - x).abs() <= 0.5 * step
    } else if t.parameter == format!("{param}^2") {
        // step in the squared parameter is about 2|x| step
        (t.value - x * x).abs() <= (x.abs() * step).max(0.25 * step * step)
    } else {
        false
    }
}

/// Row `i` of the sweep grid, including threshold flags.
pub fn sweep_row(spec: &SweepSpec, i: usize) -> RegionRow {
    let grid = spec.grid_point(i);
    let mut params = spec.fixed.clone();
    params.extend(grid.iter().cloned());
    let mut row = evaluate_row(spec.model, &params, spec.point.as_deref());
    row.params = grid.clone();
    if let Ok(m) = model(spec.model, &params) {
        for t in &m.reference.thresholds {
            if grid
                .iter()
                .zip(&spec.ranges)
                .any(|((k, x), r)| threshold_hit(t, k, *x, r.step))
            {
                row.flags.push(format!("threshold:{}", t.name));
            }
        }
    }
    row
}

/// Runs the sweep. Per-row failures are reported as flags.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<RegionRow>> {
    spec.validate()?;
    Ok((0..spec.len()).into_par_iter().map(|i| sweep_row(spec, i)).collect())
}

pub const CSV_COLUMNS: [&str; 10] = [
    "point",
    "fp_u",
    "fp_v",
    "trace",
    "det",
    "discriminant",
    "P11",
    "linear_class",
    "jacobi_class",
    "flags",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// CSV with the swept parameters as leading columns.
pub fn to_csv(spec: &SweepSpec, rows: &[RegionRow]) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = spec.ranges.iter().map(|r| r.name.as_str()).collect();
    header.extend(CSV_COLUMNS);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let mut cells: Vec<String> = r.params.iter().map(|(_, v)| fmt_num(*v)).collect();
        cells.push(r.point.clone());
        cells.push(opt(r.fixed_point.map(|p| p[0])));
        cells.push(opt(r.fixed_point.map(|p| p[1])));
        cells.push(opt(r.trace));
        cells.push(opt(r.det));
        cells.push(opt(r.discriminant));
        cells.push(opt(r.p11));
        cells.push(r.linear_class.map(|c| c.as_str().to_string()).unwrap_or_default());
        cells.push(r.jacobi_class.map(|c| c.as_str().to_string()).unwrap_or_default());
        cells.push(r.flags.join(";"));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Scalar whose sign change marks a classification boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Trace,
    Det,
    Discriminant,
    P11,
    /// Larger eigenvalue of the Lyapunov Hessian.
    Lyapunov,
    /// Radicand of the sphere mass-radius bound at `ρr² = 0`.
    Radicand,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Trace => "trace",
            Quantity::Det => "det",
            Quantity::Discriminant => "discriminant",
            Quantity::P11 => "P11",
            Quantity::Lyapunov => "lyapunov",
            Quantity::Radicand => "radicand",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One-parameter family in which a threshold is sought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub model: ModelName,
    pub parameter: String,
    pub fixed: BTreeMap<String, f64>,
    pub point: Option<String>,
}

impl ThresholdSpec {
    pub fn new(model: ModelName, parameter: &str) -> Self {
        Self {
            model,
            parameter: parameter.to_string(),
            fixed: BTreeMap::new(),
            point: None,
        }
    }

    pub fn at(mut self, point: &str) -> Self {
        self.point = Some(point.to_string());
        self
    }

    /// The quantity at parameter value `x`, through the generic pipeline.
    pub fn evaluate(&self, quantity: Quantity, x: f64) -> Result<f64> {
        let mut params = self.fixed.clone();
        params.insert(self.parameter.clone(), x);
        let m = model(self.model, &params)?;
        if quantity == Quantity::Radicand {
            if self.model != ModelName::Sphere {
                return Err(Error::Input("radicand is defined for the sphere model only".into()));
            }
            return Ok(sphere_radicand(x, 0.0));
        }
        let label = self.point.as_deref().unwrap_or_else(|| default_point(&m));
        let mut flags = vec![];
        let (p, _) = locate(&m, label, &mut flags)?;
        match quantity {
            Quantity::P11 => m.p11_generic(p),
            Quantity::Lyapunov => Ok(lyapunov_hessian_eigen(&m.field, p)?[0]),
            _ => {
                let lin = analyze_point(&m.field, p)?;
                Ok(match quantity {
                    Quantity::Trace => lin.trace,
                    Quantity::Det => lin.det,
                    _ => lin.discriminant,
                })
            }
        }
    }
}

/// Bisects a sign change of `quantity` on `bracket` down to a width of
/// `1e-12·(1 + |x|)`.
pub fn find_threshold(spec: &ThresholdSpec, quantity: Quantity, bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Input(format!("bracket [{lo}, {hi}] needs lo < hi")));
    }
    let mut qlo = spec.evaluate(quantity, lo)?;
    let qhi = spec.evaluate(quantity, hi)?;
    if qlo == 0.0 {
        return Ok(lo);
    }
    if qhi == 0.0 {
        return Ok(hi);
    }
    if qlo.signum() == qhi.signum() {
        return Err(Error::NoSignChange {
            quantity: quantity.as_str().into(),
            lo,
            hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
        let q = spec.evaluate(quantity, mid)?;
        if q == 0.0 {
            return Ok(mid);
        }
        if q.signum() == qlo.signum() {
            lo = mid;
            qlo = q;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
