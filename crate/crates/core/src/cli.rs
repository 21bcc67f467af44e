//! Batch front-end: problem files in, deterministic reports out.
//!
//! Problem files are TOML:
//!
//! ```toml
//! sense = "min"            # optional, "min" or "max"
//! bi_objective = false     # optional
//!
//! [timescale]
//! points = ["1", "3", "4"]
//! segments = [{ left = "0", right = "1", samples = 10 }]   # optional
//!
//! [boundary]
//! a = "1"
//! alpha = "0"
//! b = "4"
//! beta = "1"
//!
//! [objective]
//! gamma_delta = "1"        # optional, default 1
//! L_delta = "t * v^2"
//! gamma_nabla = "1"        # optional, default 1
//! L_nabla = "0"
//!
//! [constraint]             # optional
//! k_delta = "1"
//! K_delta = "t * v^2"
//! k_nabla = "0"
//! K_nabla = "0"
//! target = "105/242"
//! ```
//!
//! Unknown keys are rejected. Rationals are strings (`"p/q"`, integers or
//! finite decimals).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expr::{parse, Expr};
use crate::identities::run_suite;
use crate::isoperimetric::{solve_extended, ConstraintExtremality, ExtremalCertificate, IsoProblem};
use crate::number::{format_float, format_rational, parse_rational, Number, Rational};
use crate::pareto::{default_gammas, necessity_check, nondominated_filter, sweep, BiObjectiveProblem, NecessityDirection};
use crate::timescale::{build_timescale, DenseSegmentAdapter, GridFunction, TimeScale};
use crate::variational::{
    constancy_check, el_residual, eval_functional_number, find_free_extremals, BoundaryData, DeltaNablaFunctional,
    ResidualForm, ResidualTrace, Sense, SolveOptions, Verdict,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sense: Option<String>,
    #[serde(default)]
    bi_objective: bool,
    timescale: RawScale,
    boundary: RawBoundary,
    objective: RawObjective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraint: Option<RawConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScale {
    #[serde(default)]
    points: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    segments: Vec<RawSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    left: String,
    right: String,
    samples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    a: String,
    alpha: String,
    b: String,
    beta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_delta: Option<String>,
    #[serde(rename = "L_delta")]
    l_delta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_nabla: Option<String>,
    #[serde(rename = "L_nabla")]
    l_nabla: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    k_delta: String,
    #[serde(rename = "K_delta")]
    big_k_delta: String,
    k_nabla: String,
    #[serde(rename = "K_nabla")]
    big_k_nabla: String,
    target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub functional: DeltaNablaFunctional,
    pub target: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Free,
    Isoperimetric,
    BiObjective,
}

/// A validated problem file with expressions already parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub points: Vec<Rational>,
    pub segments: Vec<DenseSegmentAdapter>,
    pub scale: TimeScale,
    pub boundary: BoundaryData,
    pub objective: DeltaNablaFunctional,
    pub constraint: Option<Constraint>,
    pub bi_objective: bool,
    pub sense: Sense,
}

fn rat(path: &str, s: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| match e {
        Error::Value(m) => Error::Value(format!("{path}: {m}")),
        other => other,
    })
}

fn expression(path: &str, s: &str) -> Result<Expr> {
    parse(s).map_err(|e| match e {
        Error::Parse { position, message } => Error::Parse { position, message: format!("{path}: {message}") },
        other => other,
    })
}

impl ProblemFile {
    pub fn kind(&self) -> ProblemKind {
        if self.bi_objective {
            ProblemKind::BiObjective
        } else if self.constraint.is_some() {
            ProblemKind::Isoperimetric
        } else {
            ProblemKind::Free
        }
    }

    pub fn iso_problem(&self) -> Result<IsoProblem> {
        let c = self.constraint.as_ref().ok_or_else(|| Error::Usage("the problem has no [constraint] table".into()))?;
        IsoProblem::new(
            self.scale.clone(),
            self.boundary.clone(),
            self.objective.clone(),
            c.functional.clone(),
            c.target.clone(),
            self.sense,
        )
    }

    pub fn bi_problem(&self) -> Result<BiObjectiveProblem> {
        if !self.bi_objective {
            return Err(Error::Usage("the problem is not marked bi_objective".into()));
        }
        BiObjectiveProblem::new(
            self.scale.clone(),
            self.boundary.clone(),
            self.objective.l_delta.clone(),
            self.objective.l_nabla.clone(),
        )
    }

    fn from_raw(raw: RawProblem) -> Result<Self> {
        let sense = match &raw.sense {
            None => Sense::Min,
            Some(s) => s.parse().map_err(|_| Error::Schema {
                path: "sense".into(),
                message: format!("expected \"min\" or \"max\", found {s:?}"),
            })?,
        };
        if raw.bi_objective && raw.constraint.is_some() {
            return Err(Error::Schema {
                path: "constraint".into(),
                message: "a bi_objective problem cannot carry a constraint".into(),
            });
        }
        if raw.bi_objective && sense == Sense::Max {
            return Err(Error::Schema { path: "sense".into(), message: "bi_objective problems are minimized".into() });
        }
        let points = raw
            .timescale
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| rat(&format!("timescale.points[{i}]"), p))
            .collect::<Result<Vec<_>>>()?;
        let segments = raw
            .timescale
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let path = format!("timescale.segments[{i}]");
                Ok(DenseSegmentAdapter::new(rat(&format!("{path}.left"), &s.left)?, rat(&format!("{path}.right"), &s.right)?, s.samples))
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = build_timescale(points.iter().cloned(), &segments).map_err(|e| Error::Value(format!("timescale: {e}")))?;
        let bd = &raw.boundary;
        let boundary = BoundaryData::new(
            rat("boundary.a", &bd.a)?,
            rat("boundary.alpha", &bd.alpha)?,
            rat("boundary.b", &bd.b)?,
            rat("boundary.beta", &bd.beta)?,
        );
        boundary.validate(&scale)?;
        let ob = &raw.objective;
        let weight = |path: &str, g: &Option<String>| g.as_deref().map_or(Ok(Rational::from_integer(1.into())), |g| rat(path, g));
        let objective = DeltaNablaFunctional::new(
            weight("objective.gamma_delta", &ob.gamma_delta)?,
            expression("objective.L_delta", &ob.l_delta)?,
            weight("objective.gamma_nabla", &ob.gamma_nabla)?,
            expression("objective.L_nabla", &ob.l_nabla)?,
        );
        let constraint = match &raw.constraint {
            None => None,
            Some(c) => Some(Constraint {
                functional: DeltaNablaFunctional::new(
                    rat("constraint.k_delta", &c.k_delta)?,
                    expression("constraint.K_delta", &c.big_k_delta)?,
                    rat("constraint.k_nabla", &c.k_nabla)?,
                    expression("constraint.K_nabla", &c.big_k_nabla)?,
                ),
                target: rat("constraint.target", &c.target)?,
            }),
        };
        Ok(Self { points, segments, scale, boundary, objective, constraint, bi_objective: raw.bi_objective, sense })
    }

    fn to_raw(&self) -> RawProblem {
        let f = format_rational;
        RawProblem {
            sense: Some(self.sense.name().to_string()),
            bi_objective: self.bi_objective,
            timescale: RawScale {
                points: self.points.iter().map(f).collect(),
                segments: self
                    .segments
                    .iter()
                    .map(|s| RawSegment { left: f(&s.left), right: f(&s.right), samples: s.sample_count })
                    .collect(),
            },
            boundary: RawBoundary {
                a: f(&self.boundary.a),
                alpha: f(&self.boundary.alpha),
                b: f(&self.boundary.b),
                beta: f(&self.boundary.beta),
            },
            objective: RawObjective {
                gamma_delta: Some(f(&self.objective.gamma_delta)),
                l_delta: self.objective.l_delta.to_string(),
                gamma_nabla: Some(f(&self.objective.gamma_nabla)),
                l_nabla: self.objective.l_nabla.to_string(),
            },
            constraint: self.constraint.as_ref().map(|c| RawConstraint {
                k_delta: f(&c.functional.gamma_delta),
                big_k_delta: c.functional.l_delta.to_string(),
                k_nabla: f(&c.functional.gamma_nabla),
                big_k_nabla: c.functional.l_nabla.to_string(),
                target: f(&c.target),
            }),
        }
    }

    /// Canonical TOML text; loading it yields an identical problem.
    pub fn echo(&self) -> String {
        toml::to_string(&self.to_raw()).expect("problem tables serialize")
    }

    fn echo_table(&self) -> Table {
        Table::try_from(self.to_raw()).expect("problem tables serialize")
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema { path: "<document>".into(), message: e.message().to_string() })?;
    let raw: RawProblem = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path: if path == "." { "<root>".into() } else { path }, message: e.inner().message().to_string() }
    })?;
    ProblemFile::from_raw(raw)
}

pub fn load_problem(path: &Path) -> Result<ProblemFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// functional and constraint values at a supplied trajectory
    Eval,
    /// free Euler-Lagrange extremals
    Extremal,
    /// isoperimetric certificates with normal/abnormal classification
    Iso,
    /// scalarized Pareto front of a bi-objective problem
    Pareto,
    /// integration-by-parts and conversion identities on the file's scale
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Extremal => "extremal",
            Command::Iso => "iso",
            Command::Pareto => "pareto",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

fn rational_arg(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Parser)]
#[command(name = "deltanabla", version, about = "Delta-nabla variational problems on finite time scales")]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub problem: PathBuf,
    /// overrides the file's sense
    #[arg(long)]
    pub sense: Option<Sense>,
    #[arg(long, default_value_t = 99)]
    pub gamma_steps: usize,
    /// explicit scalarization weights, overriding --gamma-steps
    #[arg(long, value_delimiter = ',', value_parser = rational_arg)]
    pub gammas: Option<Vec<Rational>>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// trajectory for `eval`: interior values, or one value per point
    #[arg(long, value_delimiter = ',', value_parser = rational_arg, allow_hyphen_values = true)]
    pub y: Option<Vec<Rational>>,
    /// random scales checked by `verify`
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    #[arg(long, hide = true)]
    pub sequential: bool,
}

impl Args {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            restarts: self.restarts,
            seed: self.seed,
            tol: self.tol,
            exec: if self.sequential { Execution::Sequential } else { Execution::default() },
            ..SolveOptions::default()
        }
    }
}

/// What a run produced: the report and the process exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub table: Table,
    pub csv: Option<String>,
    pub exit_code: i32,
}

/// Writes figures as `[value, mode]` pairs and tracks whether every figure
/// written so far is exact.
#[derive(Default)]
struct Figures {
    inexact: bool,
}

impl Figures {
    fn num(&mut self, n: &Number) -> Value {
        self.inexact |= !n.is_exact();
        Value::Array(vec![Value::String(n.render()), Value::String(n.mode().into())])
    }

    fn nums<'a>(&mut self, ns: impl IntoIterator<Item = &'a Number>) -> Value {
        Value::Array(ns.into_iter().map(|n| self.num(n)).collect())
    }

    fn exact_or_float(&mut self, exact: &Option<GridFunction>, y: &GridFunction<f64>) -> Value {
        let values: Vec<Number> = match exact {
            Some(e) => e.values().iter().cloned().map(Number::Exact).collect(),
            None => y.values().iter().copied().map(Number::Float).collect(),
        };
        self.nums(&values)
    }

    fn trace(&mut self, tr: &ResidualTrace, tol: f64) -> Value {
        let mut t = Table::new();
        t.insert("form".into(), Value::String(tr.form.name().into()));
        t.insert("points".into(), Value::Array(tr.points.iter().map(|p| Value::String(format_rational(p))).collect()));
        t.insert("values".into(), self.nums(&tr.values));
        t.insert("spread".into(), self.num(&tr.spread()));
        t.insert("constant".into(), Value::Boolean(constancy_check(tr, tol)));
        Value::Table(t)
    }

    fn constraint_traces(&mut self, c: &ConstraintExtremality, tol: f64) -> Value {
        let mut t = Table::new();
        t.insert("is_extremal".into(), Value::Boolean(c.is_extremal));
        t.insert("sigma".into(), self.trace(&c.sigma, tol));
        t.insert("rho".into(), self.trace(&c.rho, tol));
        Value::Table(t)
    }

    fn certificate(&mut self, i: usize, c: &ExtremalCertificate, tol: f64) -> Value {
        let mut t = Table::new();
        t.insert("index".into(), Value::Integer(i as i64));
        t.insert("classification".into(), Value::String(c.classification.name().into()));
        t.insert("lambda0".into(), self.num(&c.lambda0));
        t.insert("lambda".into(), self.num(&c.lambda));
        t.insert("y".into(), self.exact_or_float(&c.exact, &c.y));
        t.insert("objective".into(), self.num(&c.objective_value));
        t.insert("constraint".into(), self.num(&c.constraint_value));
        t.insert("residual_sigma".into(), self.trace(&c.residual_sigma, tol));
        t.insert("residual_rho".into(), self.trace(&c.residual_rho, tol));
        t.insert("constraint_extremality".into(), self.constraint_traces(&c.constraint_extremality, tol));
        Value::Table(t)
    }
}

fn verdict(v: &Verdict) -> Value {
    let mut t = Table::new();
    match v {
        Verdict::ConvexOnSamples { samples } => {
            t.insert("verdict".into(), Value::String("convex on samples".into()));
            t.insert("samples".into(), Value::Integer(*samples as i64));
        }
        Verdict::NotConvex { t: tt, x, v, min_eigenvalue } => {
            t.insert("verdict".into(), Value::String("not convex".into()));
            t.insert("witness".into(), Value::Array([tt, x, v].iter().map(|z| Value::String(format_float(**z))).collect()));
            t.insert("min_eigenvalue".into(), Value::String(format_float(*min_eigenvalue)));
        }
    }
    Value::Table(t)
}

fn trajectory(args: &Args, p: &ProblemFile) -> Result<GridFunction> {
    let y = args.y.as_ref().ok_or_else(|| Error::Usage("`eval` needs --y".into()))?;
    let ts = &p.scale;
    if y.len() == ts.len() {
        GridFunction::new(ts, y.clone())
    } else if y.len() == ts.interior_len() {
        p.boundary.complete(ts, y)
    } else {
        Err(Error::Usage(format!(
            "--y has {} values; expected {} interior values or {} point values",
            y.len(),
            ts.interior_len(),
            ts.len()
        )))
    }
}

fn residuals(f: &DeltaNablaFunctional, y: &GridFunction) -> Result<(ResidualTrace, ResidualTrace)> {
    let exact = f.is_rational_closed();
    let one = |form| if exact { el_residual(f, y, form).or_else(|_| el_residual(f, &y.to_f64(), form)) } else { el_residual(f, &y.to_f64(), form) };
    Ok((one(ResidualForm::Sigma)?, one(ResidualForm::Rho)?))
}

fn run_eval(args: &Args, p: &ProblemFile, fig: &mut Figures, out: &mut Table) -> Result<i32> {
    let y = trajectory(args, p)?;
    out.insert("y".into(), fig.nums(&y.values().iter().cloned().map(Number::Exact).collect::<Vec<_>>()));
    if p.bi_objective {
        let bi = p.bi_problem()?;
        out.insert("f_delta".into(), fig.num(&eval_functional_number(&bi.g_delta(), &y)?));
        out.insert("f_nabla".into(), fig.num(&eval_functional_number(&bi.g_nabla(), &y)?));
        if p.boundary.admits(&y) && p.scale.interior_len() > 0 {
            let r = necessity_check(&bi, &y, &args.solve_options());
            let mut t = Table::new();
            t.insert("passed".into(), Value::Boolean(r.passed()));
            t.insert("nabla_given_delta".into(), necessity(fig, &r.nabla_given_delta, args.tol));
            t.insert("delta_given_nabla".into(), necessity(fig, &r.delta_given_nabla, args.tol));
            out.insert("necessity".into(), Value::Table(t));
        }
        return Ok(0);
    }
    out.insert("objective".into(), fig.num(&eval_functional_number(&p.objective, &y)?));
    if p.scale.interior_len() > 0 {
        let (s, r) = residuals(&p.objective, &y)?;
        out.insert("residual_sigma".into(), fig.trace(&s, args.tol));
        out.insert("residual_rho".into(), fig.trace(&r, args.tol));
    }
    if let Some(c) = &p.constraint {
        let value = eval_functional_number(&c.functional, &y)?;
        let met = match (&value, &c.target) {
            (Number::Exact(v), k) => v == k,
            (Number::Float(v), k) => (v - Number::Exact(k.clone()).to_f64()).abs() <= args.tol * (1.0 + v.abs()),
        };
        let mut t = Table::new();
        t.insert("value".into(), fig.num(&value));
        t.insert("target".into(), fig.num(&Number::Exact(c.target.clone())));
        t.insert("satisfied".into(), Value::Boolean(met));
        if p.scale.interior_len() > 0 {
            let (s, r) = residuals(&c.functional, &y)?;
            let extremal = constancy_check(&s, args.tol) && constancy_check(&r, args.tol);
            t.insert("extremality".into(), fig.constraint_traces(&ConstraintExtremality { is_extremal: extremal, sigma: s, rho: r }, args.tol));
        }
        out.insert("constraint".into(), Value::Table(t));
    }
    Ok(0)
}

fn necessity(fig: &mut Figures, d: &NecessityDirection, tol: f64) -> Value {
    let mut t = Table::new();
    t.insert("minimized".into(), Value::String(d.minimized.into()));
    t.insert("level".into(), fig.num(&d.level));
    t.insert("passed".into(), Value::Boolean(d.passed));
    t.insert("certificates".into(), Value::Integer(d.certificates.len() as i64));
    if let Some(c) = &d.matched {
        t.insert("matched".into(), fig.certificate(0, c, tol));
    }
    if let Some(e) = &d.error {
        t.insert("error".into(), Value::String(e.to_string()));
    }
    Value::Table(t)
}

const NO_EXTREMALS: &str = "no extremals found";

fn run_extremal(args: &Args, p: &ProblemFile, fig: &mut Figures, out: &mut Table) -> Result<i32> {
    if p.kind() != ProblemKind::Free {
        return Err(Error::Usage("`extremal` solves free problems; use `iso` or `pareto` for this file".into()));
    }
    let sense = args.sense.unwrap_or(p.sense);
    let found = find_free_extremals(&p.objective, &p.boundary, &p.scale, sense, &args.solve_options())?;
    let list = found
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut t = Table::new();
            t.insert("index".into(), Value::Integer(i as i64));
            t.insert("y".into(), fig.exact_or_float(&e.exact, &e.y));
            t.insert("objective".into(), fig.num(&e.objective));
            t.insert("residual_sigma".into(), fig.trace(&e.residual_sigma, args.tol));
            t.insert("residual_rho".into(), fig.trace(&e.residual_rho, args.tol));
            Value::Table(t)
        })
        .collect::<Vec<_>>();
    out.insert("extremals".into(), Value::Array(list));
    Ok(if found.is_empty() { 3 } else { 0 })
}

fn run_iso(args: &Args, p: &ProblemFile, fig: &mut Figures, out: &mut Table) -> Result<i32> {
    let mut iso = p.iso_problem()?;
    if let Some(s) = args.sense {
        iso.sense = s;
    }
    let certs = match solve_extended(&iso, &args.solve_options()) {
        Ok(c) => c,
        Err(Error::NonConvergence(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    let list = certs.iter().enumerate().map(|(i, c)| fig.certificate(i, c, args.tol)).collect();
    out.insert("certificates".into(), Value::Array(list));
    Ok(if certs.is_empty() { 3 } else { 0 })
}

fn run_pareto(args: &Args, p: &ProblemFile, fig: &mut Figures, out: &mut Table) -> Result<(i32, String)> {
    let bi = p.bi_problem()?;
    let gammas = args.gammas.clone().unwrap_or_else(|| default_gammas(args.gamma_steps));
    let report = sweep(&bi, &gammas, &args.solve_options())?;
    let front = nondominated_filter(&report.points());
    let mut conv = Table::new();
    conv.insert("L_delta".into(), verdict(&report.convex_delta));
    conv.insert("L_nabla".into(), verdict(&report.convex_nabla));
    out.insert("convexity".into(), Value::Table(conv));

    let mut entries = Vec::new();
    for e in &report.entries {
        let mut t = Table::new();
        t.insert("gamma".into(), fig.num(&Number::Exact(e.gamma.clone())));
        match &e.outcome {
            Ok(pt) => {
                t.insert("status".into(), Value::String("ok".into()));
                t.insert("y".into(), fig.exact_or_float(&pt.exact, &pt.y));
                t.insert("f_delta".into(), fig.num(&pt.f_delta));
                t.insert("f_nabla".into(), fig.num(&pt.f_nabla));
                t.insert("pareto".into(), Value::Boolean(pt.pareto));
                t.insert("nondominated".into(), Value::Boolean(front.iter().any(|f| f.gamma == pt.gamma)));
            }
            Err(err) => {
                t.insert("status".into(), Value::String(NO_EXTREMALS.into()));
                t.insert("error".into(), Value::String(err.to_string()));
            }
        }
        entries.push(Value::Table(t));
    }
    out.insert("points".into(), Value::Array(entries));

    let m = p.scale.interior_len();
    let mut csv = String::from("gamma");
    for i in 1..=m {
        let _ = write!(csv, ",y_{i}");
    }
    csv.push_str(",f_delta,f_nabla,convex_flag\n");
    for pt in &front {
        csv.push_str(&format_rational(&pt.gamma));
        for v in pt.interior() {
            let _ = write!(csv, ",{}", v.render());
        }
        let _ = writeln!(csv, ",{},{},{}", pt.f_delta.render(), pt.f_nabla.render(), pt.pareto);
    }
    let failed = report.entries.iter().any(|e| e.outcome.is_err());
    Ok((if front.is_empty() || failed { 3 } else { 0 }, csv))
}

fn run_verify(args: &Args, p: &ProblemFile, out: &mut Table) -> Result<i32> {
    let exec = if args.sequential { Execution::Sequential } else { Execution::default() };
    let r = run_suite(Some(&p.scale), args.cases, args.seed, exec)?;
    out.insert("cases".into(), Value::Integer(r.cases as i64));
    out.insert("failures".into(), Value::Integer(r.failures() as i64));
    let mut ids = Table::new();
    for (name, (pass, fail)) in &r.tallies {
        let mut t = Table::new();
        t.insert("passed".into(), Value::Integer(*pass as i64));
        t.insert("failed".into(), Value::Integer(*fail as i64));
        ids.insert((*name).into(), Value::Table(t));
    }
    out.insert("identities".into(), Value::Table(ids));
    Ok(if r.failures() == 0 { 0 } else { 3 })
}

/// Runs one command on a loaded problem.
pub fn run(args: &Args, p: &ProblemFile) -> Result<RunReport> {
    if args.format == Format::Csv && args.command != Command::Pareto {
        return Err(Error::Usage("--format csv is only available for `pareto`".into()));
    }
    let mut fig = Figures::default();
    let mut body = Table::new();
    let mut csv = None;
    let exit_code = match args.command {
        Command::Eval => run_eval(args, p, &mut fig, &mut body)?,
        Command::Extremal => run_extremal(args, p, &mut fig, &mut body)?,
        Command::Iso => run_iso(args, p, &mut fig, &mut body)?,
        Command::Pareto => {
            let (code, text) = run_pareto(args, p, &mut fig, &mut body)?;
            csv = Some(text);
            code
        }
        Command::Verify => run_verify(args, p, &mut body)?,
    };
    let status = match (exit_code, args.command) {
        (0, _) => "ok",
        (_, Command::Verify) => "identity failures",
        (_, Command::Pareto) => "incomplete front",
        _ => NO_EXTREMALS,
    };

    let mut table = Table::new();
    table.insert("command".into(), Value::String(args.command.name().into()));
    table.insert("status".into(), Value::String(status.into()));
    table.insert("mode".into(), Value::String(if fig.inexact { "numeric" } else { "exact" }.into()));
    let mut settings = Table::new();
    settings.insert("tol".into(), Value::String(format_float(args.tol)));
    settings.insert("restarts".into(), Value::Integer(args.restarts as i64));
    settings.insert("seed".into(), Value::String(args.seed.to_string()));
    let defaults = SolveOptions::default();
    settings.insert("max_denominator".into(), Value::Integer(defaults.max_denominator as i64));
    settings.insert("max_multiplier".into(), Value::String(format_float(defaults.max_multiplier)));
    settings.insert("step_tol".into(), Value::String(format_float(defaults.newton.step_tol)));
    if let Some(s) = args.sense {
        settings.insert("sense".into(), Value::String(s.name().into()));
    }
    table.insert("settings".into(), Value::Table(settings));
    table.insert("problem".into(), Value::Table(p.echo_table()));
    table.insert("result".into(), Value::Table(body));
    Ok(RunReport { table, csv, exit_code })
}

impl RunReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => toml::to_string(&self.table).expect("report tables serialize"),
            Format::Csv => self.csv.clone().unwrap_or_default(),
        }
    }
}

pub fn emit_report(report: &RunReport, format: Format, out: Option<&Path>) -> Result<()> {
    let text = report.render(format);
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(text.as_bytes()).map_err(Error::from)
        }
    }
}

/// Full command-line entry point; returns the exit code.
pub fn main_with_args(argv: impl IntoIterator<Item = OsString>) -> i32 {
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = load_problem(&args.problem).and_then(|p| run(&args, &p)).and_then(|r| {
        emit_report(&r, args.format, args.out.as_deref())?;
        Ok(r.exit_code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
