//! Delta-nabla functionals, Euler-Lagrange integral residuals and free extremals.
//!
//! On a scale `t_0 < ... < t_N` a trajectory `y` feeds two kinds of slots:
//! delta slot `j < N` reads `(t_j, y_{j+1}, (y_{j+1} - y_j) / mu_j)` and nabla
//! slot `j >= 1` reads `(t_j, y_{j-1}, (y_j - y_{j-1}) / nu_j)`. The residual
//! in sigma form at `t_i`, `i < N`, is
//!
//! ```text
//! g1 (dL_delta/dv [i] - sum_{j<i} mu_j dL_delta/dx [j])
//!   + g2 (dL_nabla/dv [i+1] - sum_{1<=j<=i+1} nu_j dL_nabla/dx [j])
//! ```
//!
//! and the rho form at `t_i`, `i >= 1`, shifts the delta slots back by one.
//! An extremal is a `y` whose residual is constant.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expr::{Expr, FloatExpr, Var};
use crate::number::{format_rational, reconstruct_rational, Number, Rational, Scalar};
use crate::solver::{multistart, perturbed_starts, Linear, NewtonOptions, Root};
use crate::timescale::{GridFunction, TimeScale};

/// `gamma_delta * int L_delta Delta t + gamma_nabla * int L_nabla nabla t`
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNablaFunctional {
    pub gamma_delta: Rational,
    pub l_delta: Expr,
    pub gamma_nabla: Rational,
    pub l_nabla: Expr,
}

impl DeltaNablaFunctional {
    pub fn new(gamma_delta: Rational, l_delta: Expr, gamma_nabla: Rational, l_nabla: Expr) -> Self {
        Self { gamma_delta, l_delta, gamma_nabla, l_nabla }
    }

    pub fn delta_only(l_delta: Expr) -> Self {
        Self::new(Rational::from_integer(1.into()), l_delta, Rational::zero(), Expr::zero())
    }

    pub fn nabla_only(l_nabla: Expr) -> Self {
        Self::new(Rational::zero(), Expr::zero(), Rational::from_integer(1.into()), l_nabla)
    }

    /// Both weights zero.
    pub fn is_trivial(&self) -> bool {
        self.gamma_delta.is_zero() && self.gamma_nabla.is_zero()
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.gamma_delta.clone(), self.l_delta.clone(), -self.gamma_nabla.clone(), self.l_nabla.clone())
    }

    /// Rational-closed in every part that carries a nonzero weight.
    pub fn is_rational_closed(&self) -> bool {
        (self.gamma_delta.is_zero() || self.l_delta.is_rational_closed())
            && (self.gamma_nabla.is_zero() || self.l_nabla.is_rational_closed())
    }
}

/// Fixed end values `y(a) = alpha`, `y(b) = beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub a: Rational,
    pub alpha: Rational,
    pub b: Rational,
    pub beta: Rational,
}

impl BoundaryData {
    pub fn new(a: Rational, alpha: Rational, b: Rational, beta: Rational) -> Self {
        Self { a, alpha, b, beta }
    }

    /// `a` and `b` must be the extreme points of `ts`.
    pub fn validate(&self, ts: &TimeScale) -> Result<()> {
        if &self.a != ts.start() {
            return Err(Error::Value(format!(
                "boundary point a = {} is not the minimum {} of the time scale",
                format_rational(&self.a),
                format_rational(ts.start())
            )));
        }
        if &self.b != ts.end() {
            return Err(Error::Value(format!(
                "boundary point b = {} is not the maximum {} of the time scale",
                format_rational(&self.b),
                format_rational(ts.end())
            )));
        }
        Ok(())
    }

    pub fn admits(&self, y: &GridFunction) -> bool {
        let v = y.values();
        v[0] == self.alpha && v[v.len() - 1] == self.beta
    }

    /// Grid function with the boundary values and `interior` in between.
    pub fn complete<S: Scalar>(&self, ts: &TimeScale, interior: &[S]) -> Result<GridFunction<S>> {
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(S::from_rational(&self.alpha));
        values.extend_from_slice(interior);
        values.push(S::from_rational(&self.beta));
        GridFunction::new(ts, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Min,
    Max,
}

impl Sense {
    pub fn name(self) -> &'static str {
        match self {
            Sense::Min => "min",
            Sense::Max => "max",
        }
    }
}

impl FromStr for Sense {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Sense::Min),
            "max" => Ok(Sense::Max),
            _ => Err(Error::Value(format!("sense must be `min` or `max`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualForm {
    /// indexed by `I_kappa`, delta slots read at `rho(t)`
    Rho,
    /// indexed by `I^kappa`, nabla slots read at `sigma(t)`
    Sigma,
}

impl ResidualForm {
    pub fn name(self) -> &'static str {
        match self {
            ResidualForm::Rho => "rho",
            ResidualForm::Sigma => "sigma",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTrace {
    pub form: ResidualForm,
    pub points: Vec<Rational>,
    pub values: Vec<Number>,
}

impl ResidualTrace {
    fn from_values<S: Scalar>(form: ResidualForm, ts: &TimeScale, values: &[S]) -> Self {
        let pts = ts.points();
        let points = match form {
            ResidualForm::Sigma => pts[..pts.len() - 1].to_vec(),
            ResidualForm::Rho => pts[1..].to_vec(),
        };
        Self { form, points, values: values.iter().map(Scalar::to_number).collect() }
    }

    pub fn is_exact(&self) -> bool {
        self.values.iter().all(Number::is_exact)
    }

    /// `max - min` of the values; exact when every value is.
    pub fn spread(&self) -> Number {
        if self.is_exact() {
            let mut it = self.values.iter().filter_map(Number::as_exact);
            let Some(first) = it.next() else { return Number::Exact(Rational::zero()) };
            let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
            return Number::Exact(hi - lo);
        }
        let (lo, hi) = self
            .values
            .iter()
            .map(Number::to_f64)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Number::Float(if self.values.is_empty() { 0.0 } else { hi - lo })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max)
    }
}

/// `spread <= tol * (1 + max |value|)`.
pub fn constancy_check(trace: &ResidualTrace, tol: f64) -> bool {
    match trace.spread() {
        Number::Exact(s) if s.is_zero() => true,
        s => s.to_f64() <= tol * (1.0 + trace.max_abs()),
    }
}

/// An integrand and the partials the residuals and their Jacobians need.
#[derive(Debug, Clone)]
pub(crate) struct Partials {
    f: Expr,
    fx: Expr,
    fv: Expr,
    fxx: Expr,
    fxv: Expr,
    fvv: Expr,
    /// `f, fx, fv, fxx, fxv, fvv` lowered to floats
    lowered: [FloatExpr; 6],
}

impl Partials {
    fn new(f: &Expr) -> Self {
        let fx = f.differentiate(Var::X);
        let fv = f.differentiate(Var::V);
        let (fxx, fxv, fvv) = (fx.differentiate(Var::X), fx.differentiate(Var::V), fv.differentiate(Var::V));
        let lowered = [f, &fx, &fv, &fxx, &fxv, &fvv].map(FloatExpr::from);
        Self { f: f.clone(), fx, fv, fxx, fxv, fvv, lowered }
    }

    /// `[f, fx, fv, fxx, fxv, fvv]` at one point.
    fn all_f64(&self, t: f64, x: f64, v: f64) -> Result<[f64; 6]> {
        let mut out = [0.0; 6];
        for (o, e) in out.iter_mut().zip(&self.lowered) {
            *o = e.eval(t, x, v)?;
        }
        Ok(out)
    }
}

/// A functional with its partial derivatives taken once up front.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    wd: Rational,
    d: Partials,
    wn: Rational,
    n: Partials,
}

struct Slot<S> {
    t: S,
    x: S,
    v: S,
    /// mu for delta slots, nu for nabla slots
    w: S,
}

fn delta_slots<S: Scalar>(ts: &TimeScale, y: &[S]) -> Result<Vec<Slot<S>>> {
    let pts = ts.points();
    (0..pts.len() - 1)
        .map(|j| {
            let mu = S::from_rational(&ts.mu_at(j));
            let v = (y[j + 1].clone() - y[j].clone()).checked_div(&mu)?;
            Ok(Slot { t: S::from_rational(&pts[j]), x: y[j + 1].clone(), v, w: mu })
        })
        .collect()
}

fn nabla_slots<S: Scalar>(ts: &TimeScale, y: &[S]) -> Result<Vec<Slot<S>>> {
    let pts = ts.points();
    (1..pts.len())
        .map(|j| {
            let nu = S::from_rational(&ts.nu_at(j));
            let v = (y[j].clone() - y[j - 1].clone()).checked_div(&nu)?;
            Ok(Slot { t: S::from_rational(&pts[j]), x: y[j - 1].clone(), v, w: nu })
        })
        .collect()
}

/// Values of `D_i = fv[i] - sum_{j<i} mu_j fx[j]` (i < N) and
/// `B_i = fv[i] - sum_{1<=j<=i} nu_j fx[j]` (i >= 1, stored at i - 1).
struct TraceParts<S> {
    delta: Vec<S>,
    nabla: Vec<S>,
}

impl Prepared {
    pub(crate) fn new(f: &DeltaNablaFunctional) -> Self {
        Self { wd: f.gamma_delta.clone(), d: Partials::new(&f.l_delta), wn: f.gamma_nabla.clone(), n: Partials::new(&f.l_nabla) }
    }

    pub(crate) fn value<S: Scalar>(&self, ts: &TimeScale, y: &[S]) -> Result<S> {
        let mut total = S::zero_value();
        if !self.wd.is_zero() {
            let mut acc = S::zero_value();
            for s in delta_slots(ts, y)? {
                acc = acc + s.w.clone() * self.d.f.eval(&s.t, &s.x, &s.v)?;
            }
            total = total + S::from_rational(&self.wd) * acc;
        }
        if !self.wn.is_zero() {
            let mut acc = S::zero_value();
            for s in nabla_slots(ts, y)? {
                acc = acc + s.w.clone() * self.n.f.eval(&s.t, &s.x, &s.v)?;
            }
            total = total + S::from_rational(&self.wn) * acc;
        }
        Ok(total)
    }

    fn parts<S: Scalar>(&self, ts: &TimeScale, y: &[S]) -> Result<TraceParts<S>> {
        let n = ts.len() - 1;
        let build = |w: &Rational, p: &Partials, slots: Vec<Slot<S>>, inclusive: bool| -> Result<Vec<S>> {
            if w.is_zero() {
                return Ok(vec![S::zero_value(); n]);
            }
            let mut out = Vec::with_capacity(n);
            let mut prefix = S::zero_value();
            for s in &slots {
                let fx = p.fx.eval(&s.t, &s.x, &s.v)?;
                let fv = p.fv.eval(&s.t, &s.x, &s.v)?;
                if inclusive {
                    prefix = prefix + s.w.clone() * fx;
                    out.push(fv - prefix.clone());
                } else {
                    out.push(fv - prefix.clone());
                    prefix = prefix + s.w.clone() * fx;
                }
            }
            Ok(out)
        };
        Ok(TraceParts {
            delta: build(&self.wd, &self.d, delta_slots(ts, y)?, false)?,
            nabla: build(&self.wn, &self.n, nabla_slots(ts, y)?, true)?,
        })
    }

    /// Residual values, one per step. Sigma form at `t_i` and rho form at
    /// `t_{i+1}` both pair `D_i` with `B_{i+1}`; only the labels differ.
    pub(crate) fn trace<S: Scalar>(&self, ts: &TimeScale, y: &[S]) -> Result<Vec<S>> {
        let p = self.parts(ts, y)?;
        let (wd, wn) = (S::from_rational(&self.wd), S::from_rational(&self.wn));
        Ok(p.delta.into_iter().zip(p.nabla).map(|(d, b)| wd.clone() * d + wn.clone() * b).collect())
    }

    /// Sigma trace, its Jacobian in all `N + 1` values of `y`, the functional
    /// value and its gradient.
    pub(crate) fn linearize(&self, ts: &TimeScale, y: &[f64]) -> Result<Linearization> {
        let n = ts.len() - 1;
        let cols = n + 1;
        let mut trace = vec![0.0; n];
        let mut jac = DMatrix::<f64>::zeros(n, cols);
        let mut grad = vec![0.0; cols];
        let mut value = 0.0;

        let pts = ts.points_f64();
        let wd = self.wd.as_f64();
        if wd != 0.0 {
            let slots = (0..n).map(|j| {
                let mu = pts[j + 1] - pts[j];
                Slot { t: pts[j], x: y[j + 1], v: (y[j + 1] - y[j]) / mu, w: mu }
            });
            let mut prefix = 0.0;
            let mut dprefix = vec![0.0; cols];
            for (j, s) in slots.enumerate() {
                let [f, fx, fv, fxx, fxv, fvv] = self.d.all_f64(s.t, s.x, s.v)?;
                let mu = s.w;
                value += wd * mu * f;
                grad[j + 1] += wd * (mu * fx + fv);
                grad[j] -= wd * fv;
                trace[j] += wd * (fv - prefix);
                jac[(j, j + 1)] += wd * (fxv + fvv / mu);
                jac[(j, j)] -= wd * fvv / mu;
                for k in 0..=j {
                    jac[(j, k)] -= wd * dprefix[k];
                }
                prefix += mu * fx;
                dprefix[j + 1] += mu * fxx + fxv;
                dprefix[j] -= fxv;
            }
        }
        let wn = self.wn.as_f64();
        if wn != 0.0 {
            let slots = (1..=n).map(|j| {
                let nu = pts[j] - pts[j - 1];
                Slot { t: pts[j], x: y[j - 1], v: (y[j] - y[j - 1]) / nu, w: nu }
            });
            let mut prefix = 0.0;
            let mut dprefix = vec![0.0; cols];
            for (i, s) in slots.enumerate() {
                // slot for t_{i+1}; B_{i+1} goes to row i
                let j = i + 1;
                let [f, fx, fv, fxx, fxv, fvv] = self.n.all_f64(s.t, s.x, s.v)?;
                let nu = s.w;
                value += wn * nu * f;
                grad[j - 1] += wn * (nu * fx - fv);
                grad[j] += wn * fv;
                prefix += nu * fx;
                dprefix[j - 1] += nu * fxx - fxv;
                dprefix[j] += fxv;
                trace[i] += wn * (fv - prefix);
                jac[(i, j - 1)] += wn * (fxv - fvv / nu);
                jac[(i, j)] += wn * fvv / nu;
                for k in 0..=j {
                    jac[(i, k)] -= wn * dprefix[k];
                }
            }
        }
        Ok(Linearization { trace, jac, value, grad })
    }
}

pub(crate) struct Linearization {
    pub trace: Vec<f64>,
    /// `N x (N + 1)`
    pub jac: DMatrix<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Linearization {
    /// `trace[i] - trace[0]` for `i >= 1` and its Jacobian over interior columns.
    pub(crate) fn differences(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.trace.len();
        let m = self.jac.ncols() - 2;
        let f = DVector::from_iterator(n - 1, (1..n).map(|i| self.trace[i] - self.trace[0]));
        let j = DMatrix::from_fn(n - 1, m, |r, c| self.jac[(r + 1, c + 1)] - self.jac[(0, c + 1)]);
        (f, j)
    }
}

fn require_interior(ts: &TimeScale) -> Result<()> {
    if ts.len() < 3 {
        return Err(Error::DegenerateTimeScale("the time scale has no interior point to solve for".into()));
    }
    Ok(())
}

pub fn eval_functional<S: Scalar>(f: &DeltaNablaFunctional, y: &GridFunction<S>) -> Result<S> {
    Prepared::new(f).value(y.scale(), y.values())
}

/// Evaluates on exact values when possible, in floating point otherwise.
pub fn eval_functional_number(f: &DeltaNablaFunctional, y: &GridFunction) -> Result<Number> {
    if f.is_rational_closed() {
        if let Ok(v) = eval_functional(f, y) {
            return Ok(Number::Exact(v));
        }
    }
    eval_functional(f, &y.to_f64()).map(Number::Float)
}

pub fn el_residual<S: Scalar>(f: &DeltaNablaFunctional, y: &GridFunction<S>, form: ResidualForm) -> Result<ResidualTrace> {
    let ts = y.scale();
    if ts.len() < 3 {
        return Err(Error::domain("residual traces need at least one interior point"));
    }
    let values = Prepared::new(f).trace(ts, y.values())?;
    Ok(ResidualTrace::from_values(form, ts, &values))
}

/// Sampling box for convexity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub v: (f64, f64),
}

impl DomainBox {
    /// `t` over the scale, `x` and `v` over `[-10, 10]`.
    pub fn for_scale(ts: &TimeScale) -> Self {
        Self { t: (ts.start().as_f64(), ts.end().as_f64()), x: (-10.0, 10.0), v: (-10.0, 10.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    ConvexOnSamples { samples: usize },
    NotConvex { t: f64, x: f64, v: f64, min_eigenvalue: f64 },
}

impl Verdict {
    pub fn is_convex(&self) -> bool {
        matches!(self, Verdict::ConvexOnSamples { samples } if *samples > 0)
    }
}

/// Samples the Hessian in `(x, v)` of `e` over `domain`. Points where `e`
/// cannot be evaluated are skipped.
pub fn check_joint_convexity(e: &Expr, domain: &DomainBox, samples: usize, seed: u64) -> Verdict {
    let p = Partials::new(e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo < hi { rng.gen_range(lo..=hi) } else { lo };
    let mut evaluated = 0;
    for k in 0..samples {
        let (t, x, v) = if k == 0 {
            let mid = |(lo, hi): (f64, f64)| 0.5 * (lo + hi);
            (mid(domain.t), mid(domain.x), mid(domain.v))
        } else {
            (pick(&mut rng, domain.t), pick(&mut rng, domain.x), pick(&mut rng, domain.v))
        };
        let (Ok(a), Ok(b), Ok(c)) = (p.fxx.eval_f64(t, x, v), p.fxv.eval_f64(t, x, v), p.fvv.eval_f64(t, x, v)) else {
            continue;
        };
        evaluated += 1;
        let min_eigenvalue = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
        if min_eigenvalue.is_nan() || min_eigenvalue < -1e-12 {
            return Verdict::NotConvex { t, x, v, min_eigenvalue };
        }
    }
    Verdict::ConvexOnSamples { samples: evaluated }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub restarts: usize,
    pub seed: u64,
    /// relative residual constancy tolerance
    pub tol: f64,
    pub max_denominator: u64,
    /// normal multipliers beyond this magnitude are numerically
    /// indistinguishable from an abnormal pair and are discarded
    pub max_multiplier: f64,
    pub newton: NewtonOptions,
    pub exec: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            tol: 1e-9,
            max_denominator: 1_000_000,
            max_multiplier: 1e6,
            newton: NewtonOptions::default(),
            exec: Execution::default(),
        }
    }
}

/// Interior values on the straight line from `alpha` to `beta`.
pub(crate) fn line_start(bd: &BoundaryData, ts: &TimeScale) -> Vec<f64> {
    let (a, b) = (ts.start().as_f64(), ts.end().as_f64());
    let (alpha, beta) = (bd.alpha.as_f64(), bd.beta.as_f64());
    let pts = ts.points_f64();
    pts[1..pts.len() - 1].iter().map(|t| alpha + (beta - alpha) * (t - a) / (b - a)).collect()
}

/// Full trajectory with the boundary values attached.
pub(crate) fn with_boundary(bd: &BoundaryData, interior: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(interior.len() + 2);
    y.push(bd.alpha.as_f64());
    y.extend_from_slice(interior);
    y.push(bd.beta.as_f64());
    y
}

/// Continued-fraction reconstruction of every interior value.
pub(crate) fn reconstruct_interior(interior: &[f64], max_den: u64) -> Option<Vec<Rational>> {
    interior.iter().map(|&x| reconstruct_rational(x, max_den)).collect()
}

pub(crate) fn all_equal(values: &[Rational]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// A stationary trajectory of a free problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremal {
    pub y: GridFunction<f64>,
    /// present when a rational trajectory was verified to have zero spread
    pub exact: Option<GridFunction>,
    pub objective: Number,
    pub residual_sigma: ResidualTrace,
    pub residual_rho: ResidualTrace,
}

impl Extremal {
    pub fn value_at(&self, i: usize) -> Number {
        match &self.exact {
            Some(y) => Number::Exact(y.at_index(i).clone()),
            None => Number::Float(*self.y.at_index(i)),
        }
    }

    pub fn interior(&self) -> Vec<Number> {
        (1..self.y.values().len() - 1).map(|i| self.value_at(i)).collect()
    }
}

fn build_extremal(f: &DeltaNablaFunctional, bd: &BoundaryData, ts: &TimeScale, root: &Root, opts: &SolveOptions) -> Result<Option<Extremal>> {
    let y = GridFunction::new(ts, with_boundary(bd, &root.x))?;
    if f.is_rational_closed() {
        if let Some(interior) = reconstruct_interior(&root.x, opts.max_denominator) {
            let exact = bd.complete(ts, &interior)?;
            let prep = Prepared::new(f);
            if let Ok(tr) = prep.trace(ts, exact.values()) {
                if all_equal(&tr) {
                    return Ok(Some(Extremal {
                        objective: Number::Exact(prep.value(ts, exact.values())?),
                        residual_sigma: el_residual(f, &exact, ResidualForm::Sigma)?,
                        residual_rho: el_residual(f, &exact, ResidualForm::Rho)?,
                        y: exact.to_f64(),
                        exact: Some(exact),
                    }));
                }
            }
        }
    }
    let residual_sigma = el_residual(f, &y, ResidualForm::Sigma)?;
    let residual_rho = el_residual(f, &y, ResidualForm::Rho)?;
    if !constancy_check(&residual_sigma, opts.tol) || !constancy_check(&residual_rho, opts.tol) {
        return Ok(None);
    }
    Ok(Some(Extremal { objective: Number::Float(eval_functional(f, &y)?), y, exact: None, residual_sigma, residual_rho }))
}

/// Orders by objective in the direction of `sense`, keeping start order on ties.
fn order_by_sense(items: &mut [Extremal], sense: Sense) {
    items.sort_by(|a, b| {
        let o = a.objective.partial_cmp(&b.objective).unwrap_or(std::cmp::Ordering::Equal);
        match sense {
            Sense::Min => o,
            Sense::Max => o.reverse(),
        }
    });
}

/// Every distinct stationary trajectory found from the multi-start budget,
/// best first.
pub fn find_free_extremals(
    f: &DeltaNablaFunctional,
    bd: &BoundaryData,
    ts: &TimeScale,
    sense: Sense,
    opts: &SolveOptions,
) -> Result<Vec<Extremal>> {
    require_interior(ts)?;
    bd.validate(ts)?;
    // maximizing F is minimizing -F; the stationarity system is the same
    let prep = Prepared::new(&match sense {
        Sense::Min => f.clone(),
        Sense::Max => f.negated(),
    });
    let system = |u: &[f64]| -> Result<Linear> { Ok(prep.linearize(ts, &with_boundary(bd, u))?.differences()) };
    let starts = perturbed_starts(&line_start(bd, ts), opts.restarts.max(1), opts.seed);
    let roots = multistart(&system, starts, &opts.newton, opts.exec);

    let mut found: Vec<Extremal> = Vec::new();
    for root in roots.into_iter().flatten() {
        let Some(e) = build_extremal(f, bd, ts, &root, opts)? else { continue };
        if found.iter().any(|g| g.y.distance(&e.y) <= 1e-6) {
            continue;
        }
        found.push(e);
    }
    order_by_sense(&mut found, sense);
    Ok(found)
}

/// The best stationary trajectory for `sense`.
pub fn find_free_extremal(
    f: &DeltaNablaFunctional,
    bd: &BoundaryData,
    ts: &TimeScale,
    sense: Sense,
    opts: &SolveOptions,
) -> Result<Extremal> {
    find_free_extremals(f, bd, ts, sense, opts)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::NonConvergence(format!("no extremal found from {} starts", opts.restarts.max(1))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::number::{int, rational};

    fn scale(points: &[i64]) -> TimeScale {
        TimeScale::new(points.iter().map(|&p| int(p))).unwrap()
    }

    fn y3(v: Rational) -> GridFunction {
        GridFunction::new(&scale(&[1, 3, 4]), vec![int(0), v, int(1)]).unwrap()
    }

    fn tv2() -> Expr {
        parse("t * v^2").unwrap()
    }

    #[test]
    fn functional_values() {
        let nab = DeltaNablaFunctional::nabla_only(tv2());
        assert_eq!(eval_functional(&nab, &y3(rational(9, 11))).unwrap(), rational(25, 22));
        assert_eq!(eval_functional(&nab, &y3(rational(69, 77))).unwrap(), rational(1345, 1078));
        let del = DeltaNablaFunctional::delta_only(tv2());
        assert_eq!(eval_functional(&del, &y3(rational(9, 11))).unwrap(), rational(105, 242));
        let flat = GridFunction::constant(&scale(&[1, 3, 4]), int(2));
        let both = DeltaNablaFunctional::new(int(3), tv2(), int(5), parse("v^4").unwrap());
        assert_eq!(eval_functional(&both, &flat).unwrap(), int(0));
    }

    #[test]
    fn abnormal_trace_is_constant() {
        let nab = DeltaNablaFunctional::nabla_only(tv2());
        let tr = el_residual(&nab, &y3(rational(8, 11)), ResidualForm::Rho).unwrap();
        assert_eq!(tr.points, vec![int(3), int(4)]);
        assert_eq!(tr.values, vec![Number::Exact(rational(24, 11)); 2]);
        assert!(constancy_check(&tr, 0.0));
    }

    #[test]
    fn delta_trace_values() {
        let del = DeltaNablaFunctional::delta_only(tv2());
        let tr = el_residual(&del, &y3(rational(9, 11)), ResidualForm::Sigma).unwrap();
        assert_eq!(tr.values, vec![Number::Exact(rational(9, 11)), Number::Exact(rational(12, 11))]);
        assert_eq!(tr.spread(), Number::Exact(rational(3, 11)));
        assert!(!constancy_check(&tr, 1e-9));
        let nab = DeltaNablaFunctional::nabla_only(tv2());
        let tr = el_residual(&nab, &y3(rational(9, 11)), ResidualForm::Rho).unwrap();
        assert!(!constancy_check(&tr, 1e-9));
    }

    #[test]
    fn singleton_trace_is_constant() {
        let tr = ResidualTrace { form: ResidualForm::Sigma, points: vec![int(0)], values: vec![Number::Float(3.5)] };
        assert!(constancy_check(&tr, 0.0));
    }

    #[test]
    fn two_point_scale_is_rejected() {
        let ts = scale(&[0, 1]);
        let y = GridFunction::new(&ts, vec![int(0), int(1)]).unwrap();
        let f = DeltaNablaFunctional::delta_only(parse("v^2").unwrap());
        assert!(matches!(el_residual(&f, &y, ResidualForm::Sigma), Err(Error::Domain(_))));
        let bd = BoundaryData::new(int(0), int(0), int(1), int(1));
        assert!(matches!(
            find_free_extremal(&f, &bd, &ts, Sense::Min, &SolveOptions::default()),
            Err(Error::DegenerateTimeScale(_))
        ));
    }

    fn check_jacobian(f: &DeltaNablaFunctional, ts: &TimeScale, y: &[f64]) {
        let prep = Prepared::new(f);
        let lin = prep.linearize(ts, y).unwrap();
        let exact_trace = prep.trace(ts, y).unwrap();
        for (a, b) in lin.trace.iter().zip(&exact_trace) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((lin.value - prep.value(ts, y).unwrap()).abs() < 1e-12);
        let h = 1e-6;
        for k in 0..y.len() {
            let mut up = y.to_vec();
            let mut dn = y.to_vec();
            up[k] += h;
            dn[k] -= h;
            let tu = prep.trace(ts, &up).unwrap();
            let td = prep.trace(ts, &dn).unwrap();
            for i in 0..tu.len() {
                let fd = (tu[i] - td[i]) / (2.0 * h);
                assert!((fd - lin.jac[(i, k)]).abs() < 1e-5 * (1.0 + fd.abs()), "d trace[{i}]/dy[{k}]: {fd} vs {}", lin.jac[(i, k)]);
            }
            let gd = (prep.value(ts, &up).unwrap() - prep.value(ts, &dn).unwrap()) / (2.0 * h);
            assert!((gd - lin.grad[k]).abs() < 1e-5 * (1.0 + gd.abs()));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let ts = TimeScale::new([int(0), rational(1, 2), int(2), rational(7, 3), int(4)]).unwrap();
        let f = DeltaNablaFunctional::new(
            rational(2, 3),
            parse("t * x^2 * v + exp(x * v / 4)").unwrap(),
            rational(-3, 2),
            parse("(x - 3)^2 * v^2 + sin(t * x)").unwrap(),
        );
        check_jacobian(&f, &ts, &[0.3, -0.7, 1.1, 0.4, 0.9]);
    }

    #[test]
    fn rho_and_sigma_forms_share_values() {
        let ts = scale(&[0, 1, 3, 4]);
        let f = DeltaNablaFunctional::new(int(1), parse("x^2 + v^2").unwrap(), int(2), parse("t*x*v").unwrap());
        let y = GridFunction::new(&ts, vec![int(0), rational(1, 3), int(2), int(-1)]).unwrap();
        let s = el_residual(&f, &y, ResidualForm::Sigma).unwrap();
        let r = el_residual(&f, &y, ResidualForm::Rho).unwrap();
        assert_eq!(s.values, r.values);
        assert_eq!(s.points, vec![int(0), int(1), int(3)]);
        assert_eq!(r.points, vec![int(1), int(3), int(4)]);
    }

    #[test]
    fn free_extremals_of_worked_problems() {
        let opts = SolveOptions::default();
        // straight line for the discrete Dirichlet energy
        let ts = scale(&[0, 1, 2]);
        let f = DeltaNablaFunctional::delta_only(parse("v^2").unwrap());
        let bd = BoundaryData::new(int(0), int(0), int(2), int(2));
        let e = find_free_extremal(&f, &bd, &ts, Sense::Min, &opts).unwrap();
        assert_eq!(e.interior(), vec![Number::Exact(int(1))]);

        let f = DeltaNablaFunctional::new(rational(1, 2), tv2(), rational(1, 2), tv2());
        let bd = BoundaryData::new(int(1), int(0), int(4), int(1));
        let e = find_free_extremal(&f, &bd, &scale(&[1, 3, 4]), Sense::Min, &opts).unwrap();
        assert_eq!(e.interior(), vec![Number::Exact(rational(7, 9))]);
        assert!(constancy_check(&e.residual_rho, 0.0));

        let f = DeltaNablaFunctional::new(rational(1, 3), parse("x^2").unwrap(), rational(2, 3), parse("(x - 3)^2").unwrap());
        let bd = BoundaryData::new(int(0), int(0), int(2), int(0));
        let e = find_free_extremal(&f, &bd, &ts, Sense::Min, &opts).unwrap();
        assert_eq!(e.interior(), vec![Number::Exact(int(2))]);
    }

    #[test]
    fn maximization_negates_the_objective() {
        // -v^2 is concave, so its maximizer is the minimizer of v^2
        let ts = scale(&[0, 1, 2]);
        let f = DeltaNablaFunctional::delta_only(parse("-v^2").unwrap());
        let bd = BoundaryData::new(int(0), int(0), int(2), int(2));
        let e = find_free_extremal(&f, &bd, &ts, Sense::Max, &SolveOptions::default()).unwrap();
        assert_eq!(e.interior(), vec![Number::Exact(int(1))]);
        assert_eq!(e.objective, Number::Exact(int(-2)));
    }

    #[test]
    fn boundary_must_match_scale() {
        let ts = scale(&[1, 3, 4]);
        let bd = BoundaryData::new(int(2), int(0), int(4), int(1));
        assert!(matches!(bd.validate(&ts), Err(Error::Value(_))));
    }

    #[test]
    fn convexity_verdicts() {
        let bx = DomainBox { t: (1.0, 4.0), x: (-10.0, 10.0), v: (-10.0, 10.0) };
        assert!(check_joint_convexity(&tv2(), &bx, 64, 0).is_convex());
        assert!(check_joint_convexity(&parse("(x - 3)^2").unwrap(), &bx, 64, 0).is_convex());
        match check_joint_convexity(&parse("x * v").unwrap(), &bx, 64, 0) {
            Verdict::NotConvex { min_eigenvalue, .. } => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            v => panic!("{v:?}"),
        }
    }
}
