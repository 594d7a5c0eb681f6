//! Command surface of the `kccstab` binary.
//!
//! Commands: `analyze`, `sweep`, `trajectory`, `limit-cycle`, `verify`.
//! Errors map to exit code 2 (bad input) or 3 (numerical failure) through
//! [`exit_code`]. `KCCSTAB_THREADS` caps the worker pool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{free_identifiers, parse};
use crate::flow::{
    find_limit_cycle, integrate, integrate_deviation, CycleOptions, DeviationMode, IntegratorOptions,
};
use crate::kcc::{
    classify_jacobi, default_jacobi_tolerance, kcc_invariants, preferred_elimination, theorem_check,
    JacobiClass, JacobiReport, KccInvariants, TheoremCheck,
};
use crate::linstab::{analyze_point, find_fixed_points, LinearReport, SearchBox};
use crate::models::{brusselator_regions, model, BrusselatorRegion, Model, ModelName, ReferenceValues};
use crate::sode::{reduce_planar, Eliminate, Semispray, VectorField2};
use crate::sweep::{run_sweep, to_csv, ParamRange, SweepSpec};

pub const REPORT_SCHEMA: &str = "kccstab/analysis-report/v1";

#[derive(Debug, Parser)]
#[command(name = "kccstab", version, about = "Linear and Jacobi stability analysis of planar systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed points with linear and Jacobi classification.
    Analyze(AnalyzeArgs),
    /// Classification table over a parameter range or raster.
    Sweep(SweepArgs),
    /// Trajectory, optionally with a deviation vector, as CSV.
    Trajectory(TrajectoryArgs),
    /// Periodic orbit and its characteristic multiplier.
    LimitCycle(LimitCycleArgs),
    /// Built-in self-test against closed-form values.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Built-in model: brusselator, lane-emden, sphere, brane, dark-energy.
    #[arg(long)]
    pub model: Option<String>,
    /// First component of a custom field.
    #[arg(long, allow_hyphen_values = true)]
    pub du: Option<String>,
    /// Second component of a custom field.
    #[arg(long, allow_hyphen_values = true)]
    pub dv: Option<String>,
    /// Parameter binding `name=value`, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", allow_hyphen_values = true)]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Fixed-point search box `ulo:uhi,vlo:vhi`.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub search_box: Option<String>,
    /// Seeds per axis for the fixed-point search.
    #[arg(long, default_value_t = 24)]
    pub grid: usize,
    /// Additional point `u,v` at which to report KCC invariants, repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Vec<String>,
    /// Include third to fifth invariants.
    #[arg(long)]
    pub higher: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: String,
    /// `name=lo:hi:step`; give twice for a raster.
    #[arg(long = "range", required = true, allow_hyphen_values = true)]
    pub ranges: Vec<String>,
    /// Fixed parameter `name=value`, repeatable.
    #[arg(long = "param", allow_hyphen_values = true)]
    pub params: Vec<String>,
    /// Critical point label (model default otherwise).
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeviationArg {
    Raw,
    Covariant,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Initial state `u,v`.
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    /// Time interval `t0:t1`.
    #[arg(long, allow_hyphen_values = true)]
    pub tspan: String,
    #[arg(long, value_enum)]
    pub deviation: Option<DeviationArg>,
    /// Initial deviation velocity.
    #[arg(long = "seed-direction", allow_hyphen_values = true)]
    pub seed_direction: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LimitCycleArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Starting point `u,v` near the orbit.
    #[arg(long, allow_hyphen_values = true)]
    pub seed: String,
    #[arg(long, default_value_t = 1e3)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Seed for the random-system suite.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random systems.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long)]
    pub json: bool,
}

/// 2 for input errors, 3 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

/// Sizes the global worker pool from `KCCSTAB_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("KCCSTAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Input(format!("KCCSTAB_THREADS must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Trajectory(a) => cmd_trajectory(&a, out),
        Command::LimitCycle(a) => cmd_limit_cycle(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

// ---------------------------------------------------------------------------
// argument parsing

pub fn parse_binding(s: &str) -> Result<(String, f64)> {
    let bad = || Error::Input(format!("binding `{s}` must look like name=value"));
    let (k, v) = s.split_once('=').ok_or_else(bad)?;
    let k = k.trim();
    if k.is_empty() {
        return Err(bad());
    }
    let v: f64 = v.trim().parse().map_err(|_| bad())?;
    Ok((k.to_string(), v))
}

pub fn parse_bindings(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for s in items {
        let (k, v) = parse_binding(s)?;
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::Input(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

fn parse_list(s: &str, sep: char, what: &str) -> Result<Vec<f64>> {
    s.split(sep)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Input(format!("{what}: cannot read `{s}`")))
        })
        .collect()
}

pub fn parse_pair(s: &str) -> Result<[f64; 2]> {
    match parse_list(s, ',', "expected `a,b`")?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Input(format!("expected two comma-separated numbers, got `{s}`"))),
    }
}

pub fn parse_span(s: &str) -> Result<(f64, f64)> {
    match parse_list(s, ':', "expected `t0:t1`")?.as_slice() {
        [a, b] if a != b => Ok((*a, *b)),
        _ => Err(Error::Input(format!("expected a time span `t0:t1`, got `{s}`"))),
    }
}

pub fn parse_box(s: &str) -> Result<SearchBox> {
    let (u, v) = s
        .split_once(',')
        .ok_or_else(|| Error::Input(format!("box `{s}` must look like ulo:uhi,vlo:vhi")))?;
    let (u0, u1) = parse_span(u)?;
    let (v0, v1) = parse_span(v)?;
    if !(u0 < u1 && v0 < v1) {
        return Err(Error::Input(format!("box `{s}` needs lo < hi on both axes")));
    }
    Ok(SearchBox::new((u0, u1), (v0, v1)))
}

// ---------------------------------------------------------------------------
// systems

/// A built-in model or a user-supplied field.
pub enum System {
    Model(Box<Model>),
    Custom(VectorField2),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDescription {
    pub kind: String,
    pub model: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub variables: [String; 2],
    pub du: String,
    pub dv: String,
}

impl System {
    pub fn field(&self) -> &VectorField2 {
        match self {
            System::Model(m) => &m.field,
            System::Custom(vf) => vf,
        }
    }

    pub fn describe(&self) -> SystemDescription {
        let vf = self.field();
        let [n0, n1] = vf.names();
        let (kind, name, params) = match self {
            System::Model(m) => ("model", Some(m.name.to_string()), m.params.clone()),
            System::Custom(vf) => ("custom", None, vf.params().clone()),
        };
        SystemDescription {
            kind: kind.into(),
            model: name,
            params,
            variables: [n0.to_string(), n1.to_string()],
            du: vf.sources()[0].to_string(),
            dv: vf.sources()[1].to_string(),
        }
    }

    /// Semispray governing the first variable, with the `(x, y)` image of
    /// `p` and the elimination used.
    pub fn spray_at(&self, p: [f64; 2]) -> Result<(Semispray, [f64; 2], Eliminate)> {
        match self {
            System::Model(m) => {
                let (x, y) = m.spray_coordinates(p)?;
                Ok((m.spray.clone(), [x, y], Eliminate::V))
            }
            System::Custom(vf) => {
                let e = preferred_elimination(vf, p)?;
                let anchor = match e {
                    Eliminate::U => p[0],
                    Eliminate::V => p[1],
                };
                let s = reduce_planar(vf, e, anchor);
                let r = s.reduction().expect("reduced spray");
                let (x, y) = r.lift(p[0], p[1])?;
                Ok((s, [x, y], e))
            }
        }
    }

    pub fn theorem(&self, p: [f64; 2]) -> Result<TheoremCheck> {
        match self {
            System::Model(m) => theorem_check(&m.spray_field, m.to_spray_field(p), Eliminate::V),
            System::Custom(vf) => theorem_check(vf, p, preferred_elimination(vf, p)?),
        }
    }

    pub fn default_box(&self) -> SearchBox {
        match self {
            System::Model(m) => m.search_box,
            System::Custom(_) => SearchBox::new((-2.0, 2.0), (-2.0, 2.0)),
        }
    }
}

/// Variable names for a custom field: `x, y` when the expressions use them
/// and not `u, v`.
fn custom_names(du: &str, dv: &str, params: &BTreeMap<String, f64>) -> Result<[&'static str; 2]> {
    let mut ids = free_identifiers(&parse(du)?);
    ids.extend(free_identifiers(&parse(dv)?));
    ids.retain(|k| !params.contains_key(k));
    let uses = |a: &str| ids.contains(a);
    Ok(if (uses("x") || uses("y")) && !uses("u") && !uses("v") {
        ["x", "y"]
    } else {
        ["u", "v"]
    })
}

pub fn resolve_system(a: &SystemArgs) -> Result<System> {
    let params = parse_bindings(&a.params)?;
    match (&a.model, &a.du, &a.dv) {
        (Some(name), None, None) => {
            let name: ModelName = name.parse()?;
            Ok(System::Model(Box::new(model(name, &params)?)))
        }
        (None, Some(du), Some(dv)) => {
            let names = custom_names(du, dv, &params)?;
            Ok(System::Custom(VectorField2::with_names(parse(du)?, parse(dv)?, params, names)?))
        }
        (Some(_), _, _) => Err(Error::Input("give either --model or --du/--dv, not both".into())),
        _ => Err(Error::Input("give --model NAME or both --du and --dv".into())),
    }
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub point: [f64; 2],
    /// `true` for equilibria, `false` for points requested with `--at`.
    pub fixed: bool,
    pub residual: Option<f64>,
    pub linear: Option<LinearReport>,
    /// Semispray coordinates `(x, y)` of the point.
    pub spray_point: Option<[f64; 2]>,
    pub eliminated: Option<Eliminate>,
    pub jacobi: Option<JacobiReport>,
    pub kcc: Option<KccInvariants>,
    pub theorem: Option<TheoremCheck>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub system: SystemDescription,
    pub search_box: SearchBox,
    pub points: Vec<PointAnalysis>,
    /// A fixed point with a singular Jacobian was found.
    pub degenerate: bool,
    pub reference: Option<ReferenceValues>,
}

fn analyze_one(sys: &System, p: [f64; 2], fixed: bool, residual: Option<f64>, higher: bool) -> PointAnalysis {
    let mut a = PointAnalysis {
        point: p,
        fixed,
        residual,
        linear: None,
        spray_point: None,
        eliminated: None,
        jacobi: None,
        kcc: None,
        theorem: None,
        errors: vec![],
    };
    if fixed {
        match analyze_point(sys.field(), p) {
            Ok(l) => a.linear = Some(l),
            Err(e) => a.errors.push(e.to_string()),
        }
    }
    match sys.spray_at(p) {
        Ok((s, xy, e)) => {
            a.spray_point = Some(xy);
            a.eliminated = Some(e);
            match kcc_invariants(&s, &xy[..1], &xy[1..], higher) {
                Ok(k) => {
                    a.jacobi = Some(classify_jacobi(&k.deviation, default_jacobi_tolerance(&k.deviation)));
                    a.kcc = Some(k);
                }
                Err(e) => a.errors.push(e.to_string()),
            }
        }
        Err(e) => a.errors.push(e.to_string()),
    }
    if fixed {
        match sys.theorem(p) {
            Ok(t) => a.theorem = Some(t),
            Err(e) => a.errors.push(e.to_string()),
        }
    }
    a
}

pub fn analyze(sys: &System, bx: SearchBox, grid: usize, at: &[[f64; 2]], higher: bool) -> AnalysisReport {
    let set = find_fixed_points(sys.field(), &bx, grid);
    let mut points: Vec<PointAnalysis> = set
        .points
        .iter()
        .map(|fp| analyze_one(sys, fp.point, true, Some(fp.residual), higher))
        .collect();
    points.extend(at.iter().map(|p| analyze_one(sys, *p, false, None, higher)));
    AnalysisReport {
        schema: REPORT_SCHEMA.into(),
        system: sys.describe(),
        search_box: bx,
        points,
        degenerate: set.degenerate,
        reference: match sys {
            System::Model(m) => Some(m.reference.clone()),
            System::Custom(_) => None,
        },
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

pub fn report_text(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let d = &r.system;
    match &d.model {
        Some(m) => {
            let ps: Vec<String> = d.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "model {m} ({})", ps.join(", "));
        }
        None => {
            let _ = writeln!(s, "d{}/dt = {}", d.variables[0], d.du);
            let _ = writeln!(s, "d{}/dt = {}", d.variables[1], d.dv);
        }
    }
    let _ = writeln!(
        s,
        "{:>14} {:>14} {:>14} {:>14} {:>14} {:>14}  {:<16} {:<16}",
        d.variables[0], d.variables[1], "trace", "det", "discriminant", "P11", "linear", "jacobi"
    );
    for p in &r.points {
        let l = p.linear.as_ref();
        let _ = writeln!(
            s,
            "{:>14.6e} {:>14.6e} {:>14} {:>14} {:>14} {:>14}  {:<16} {:<16}",
            p.point[0],
            p.point[1],
            fmt_opt(l.map(|l| l.trace)),
            fmt_opt(l.map(|l| l.det)),
            fmt_opt(l.map(|l| l.discriminant)),
            fmt_opt(p.jacobi.as_ref().map(|j| j.deviation[0][0])),
            l.map_or("-", |l| l.class.as_str()),
            p.jacobi.as_ref().map_or("-", |j| j.class.as_str()),
        );
        for e in &p.errors {
            let _ = writeln!(s, "    error: {e}");
        }
    }
    if r.degenerate {
        let _ = writeln!(s, "warning: degenerate fixed point found");
    }
    s
}

fn io(e: std::io::Error) -> Error {
    Error::Input(format!("I/O error: {e}"))
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let sys = resolve_system(&a.system)?;
    let bx = match &a.search_box {
        Some(s) => parse_box(s)?,
        None => sys.default_box(),
    };
    let at = a.at.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
    let report = analyze(&sys, bx, a.grid, &at, a.higher);
    let text = match a.format {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&report).map_err(|e| Error::Input(e.to_string()))?;
            t.push('\n');
            t
        }
        Format::Text => report_text(&report),
    };
    emit(out, None, &text)
}

// ---------------------------------------------------------------------------
// sweep, trajectory, limit cycle

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SweepSpec {
        model: a.model.parse()?,
        ranges: a.ranges.iter().map(|r| r.parse()).collect::<Result<Vec<ParamRange>>>()?,
        fixed: parse_bindings(&a.params)?,
        point: a.point.clone(),
    };
    let rows = run_sweep(&spec)?;
    emit(out, a.out.as_ref(), &to_csv(&spec, &rows))
}

pub fn cmd_trajectory(a: &TrajectoryArgs, out: &mut dyn Write) -> Result<()> {
    let sys = resolve_system(&a.system)?;
    let from = parse_pair(&a.from)?;
    let span = parse_span(&a.tspan)?;
    if !(a.rtol > 0.0 && a.atol > 0.0) {
        return Err(Error::Input("tolerances must be positive".into()));
    }
    let opts = IntegratorOptions::with_tolerances(a.rtol, a.atol);
    let (text, truncated) = match a.deviation {
        None => {
            if a.seed_direction.is_some() {
                return Err(Error::Input("--seed-direction needs --deviation".into()));
            }
            let mut vf = sys.field().clone();
            let tr = integrate(&mut vf, &from, span, &opts)?;
            let names = sys.field().names();
            (tr.to_csv(&names), tr.truncated)
        }
        Some(mode) => {
            let w = match &a.seed_direction {
                Some(s) => parse_list(s, ',', "seed direction")?,
                None => vec![1.0],
            };
            if w.len() != 1 {
                return Err(Error::Input(format!(
                    "a planar system reduces to one second-order equation; --seed-direction takes 1 component, got {}",
                    w.len()
                )));
            }
            let (s, xy, _) = sys.spray_at(from)?;
            let mode = match mode {
                DeviationArg::Raw => DeviationMode::RawVariational,
                DeviationArg::Covariant => DeviationMode::Covariant,
            };
            let track = integrate_deviation(&s, &xy[..1], &xy[1..], &w, mode, span, &opts)?;
            (track.to_csv(&["x", "y"]), track.truncated)
        }
    };
    emit(out, a.out.as_ref(), &text)?;
    match truncated {
        Some(t) => Err(Error::NotConverged(format!(
            "trajectory truncated at t = {}: {}",
            t.t, t.reason
        ))),
        None => Ok(()),
    }
}

pub fn cmd_limit_cycle(a: &LimitCycleArgs, out: &mut dyn Write) -> Result<()> {
    let sys = resolve_system(&a.system)?;
    let seed = parse_pair(&a.seed)?;
    if !(a.horizon > 0.0 && a.tol > 0.0) {
        return Err(Error::Input("--horizon and --tol must be positive".into()));
    }
    let opts = CycleOptions {
        horizon: a.horizon,
        tol: a.tol,
        ..CycleOptions::default()
    };
    let report = find_limit_cycle(sys.field(), seed, None, &opts)?;
    let mut t = serde_json::to_string_pretty(&report).map_err(|e| Error::Input(e.to_string()))?;
    t.push('\n');
    emit(out, None, &t)
}

// ---------------------------------------------------------------------------
// verify

/// Random planar polynomial field of degree ≤ 3 with a hyperbolic fixed
/// point at the origin and `|∂g/∂u| > 0.1`. Returns the two component
/// expressions.
pub fn random_polynomial_system<R: Rng>(rng: &mut R) -> (String, String) {
    const MONOMIALS: [&str; 7] = ["u^2", "u*v", "v^2", "u^3", "u^2*v", "u*v^2", "v^3"];
    let (a, b, c, d) = loop {
        let m: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let (tr, det) = (m[0] + m[3], m[0] * m[3] - m[1] * m[2]);
        let hyperbolic = det.abs() > 0.1 && (det < 0.0 || tr.abs() > 0.1);
        if hyperbolic && m[2].abs() > 0.1 {
            break (m[0], m[1], m[2], m[3]);
        }
    };
    let mut poly = |lin: [f64; 2]| {
        let mut s = format!("({:?})*u + ({:?})*v", lin[0], lin[1]);
        for mono in MONOMIALS {
            if rng.random_bool(0.5) {
                let k: f64 = rng.random_range(-1.0..1.0);
                let _ = write!(s, " + ({k:?})*{mono}");
            }
        }
        s
    };
    let f = poly([a, b]);
    let g = poly([c, d]);
    (f, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn reference_checks(out: &mut Vec<CheckResult>) {
    let cases: [(ModelName, &[(&str, f64)]); 8] = [
        (ModelName::Brusselator, &[("a", 4.0), ("b", 0.5)]),
        (ModelName::Brusselator, &[("a", 1.0), ("b", 2.5)]),
        (ModelName::LaneEmden, &[("n", 5.0)]),
        (ModelName::LaneEmden, &[("n", 2.0)]),
        (ModelName::Sphere, &[("gamma", 2.0)]),
        (ModelName::Brane, &[("gamma", 0.0)]),
        (ModelName::DarkEnergy, &[("lambda", 2.0)]),
        (ModelName::DarkEnergy, &[("lambda", 1.5)]),
    ];
    for (name, ps) in cases {
        let params: BTreeMap<String, f64> = ps.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let tag: Vec<String> = ps.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let tag = format!("{name}({})", tag.join(","));
        let m = match model(name, &params) {
            Ok(m) => m,
            Err(e) => {
                out.push(check(tag, false, e.to_string()));
                continue;
            }
        };
        let found = m.fixed_points(24);
        for r in m.reference.points.iter().filter(|r| r.exists) {
            let label = format!("{tag} {}", r.label);
            if let Some(want) = r.p11 {
                match m.p11_generic(r.point) {
                    Ok(got) => {
                        let ok = (got - want).abs() <= 1e-8 * (1.0 + want.abs());
                        out.push(check(format!("{label} P11"), ok, format!("{got:.12e} vs {want:.12e}")));
                    }
                    Err(e) => out.push(check(format!("{label} P11"), false, e.to_string())),
                }
            }
            if r.trace.is_some() || r.linear_class.is_some() {
                let near = found.points.iter().find(|fp| {
                    (fp.point[0] - r.point[0]).hypot(fp.point[1] - r.point[1]) <= 1e-8 * (1.0 + r.point[0].abs())
                });
                out.push(check(
                    format!("{label} located"),
                    near.is_some(),
                    format!("({:.6}, {:.6})", r.point[0], r.point[1]),
                ));
            }
            if let Some(c) = r.linear_class {
                match analyze_point(&m.field, r.point) {
                    Ok(l) => out.push(check(format!("{label} linear"), l.class == c, l.class.as_str())),
                    Err(e) => out.push(check(format!("{label} linear"), false, e.to_string())),
                }
            }
        }
    }
    let probes = [
        ((1.0, 5.0), BrusselatorRegion::A),
        ((1.0, 2.5), BrusselatorRegion::B),
        ((4.0, 4.0), BrusselatorRegion::C),
        ((4.0, 0.5), BrusselatorRegion::D),
    ];
    for ((a, b), want) in probes {
        let got = brusselator_regions(a, b).map(|r| r.region);
        out.push(check(
            format!("brusselator region at ({a}, {b})"),
            got.as_ref() == Ok(&want),
            format!("{got:?}"),
        ));
    }
}

fn random_checks(seed: u64, count: usize, out: &mut Vec<CheckResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut theorem_fail, mut corollary_fail, mut errors) = (0.0f64, 0, 0, 0);
    for _ in 0..count {
        let (f, g) = random_polynomial_system(&mut rng);
        let vf = match VectorField2::parse(&f, &g, BTreeMap::new()) {
            Ok(v) => v,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let Ok(t) = theorem_check(&vf, [0.0, 0.0], Eliminate::U) else {
            errors += 1;
            continue;
        };
        let scaled = t.residual / (1.0 + t.rhs.abs());
        worst = worst.max(scaled);
        if scaled > 1e-6 {
            theorem_fail += 1;
        }
        let p = vec![vec![t.lhs / 4.0]];
        let jac = classify_jacobi(&p, default_jacobi_tolerance(&p)).class;
        let complex = t.rhs < 0.0;
        if (jac == JacobiClass::JacobiStable) != complex {
            corollary_fail += 1;
        }
    }
    out.push(check(
        format!("theorem 4P = tr^2 - 4 det on {count} random systems"),
        theorem_fail == 0 && errors == 0,
        format!("worst scaled residual {worst:.3e}, failures {theorem_fail}, errors {errors}"),
    ));
    out.push(check(
        format!("Jacobi stable iff complex eigenvalues on {count} random systems"),
        corollary_fail == 0 && errors == 0,
        format!("mismatches {corollary_fail}"),
    ));
}

pub fn verify(seed: u64, count: usize) -> VerifySummary {
    let mut checks = vec![];
    reference_checks(&mut checks);
    random_checks(seed, count, &mut checks);
    VerifySummary {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let summary = verify(a.seed, a.count);
    let text = if a.json {
        let mut t = serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(e.to_string()))?;
        t.push('\n');
        t
    } else {
        let mut s = String::new();
        for c in &summary.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let n = summary.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{n}/{} checks passed", summary.checks.len());
        s
    };
    emit(out, None, &text)?;
    if summary.passed {
        Ok(())
    } else {
        let n = summary.checks.iter().filter(|c| !c.passed).count();
        Err(Error::NotConverged(format!("{n} verification checks failed")))
    }
}
