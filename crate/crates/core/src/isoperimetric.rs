//! Isoperimetric problems: minimize a delta-nabla functional subject to a
//! second one being pinned to a target value.
//!
//! Candidates come from two branches. The normal branch (`lambda0 = 1`) solves
//! constancy of the residual of `L - lambda K` together with the constraint
//! for the interior values and `lambda`. The abnormal branch (`lambda0 = 0`,
//! `lambda = 1`) asks for a trajectory that is itself an extremal of `K` and
//! meets the constraint, an overdetermined system solved in least squares.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::number::{format_rational, rational_from_f64, reconstruct_rational, Number, Rational, Scalar};
use crate::solver::{multistart, perturbed_starts, Linear};
use crate::timescale::{GridFunction, TimeScale};
use crate::variational::{
    all_equal, constancy_check, el_residual, eval_functional, eval_functional_number, find_free_extremals,
    line_start, reconstruct_interior, with_boundary, BoundaryData, DeltaNablaFunctional, Prepared, ResidualForm,
    ResidualTrace, Sense, SolveOptions,
};

/// Multiplier seeds tried with every interior start on the normal branch.
const LAMBDA_SEEDS: [f64; 5] = [-10.0, -1.0, 0.0, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct IsoProblem {
    pub scale: TimeScale,
    pub boundary: BoundaryData,
    pub objective: DeltaNablaFunctional,
    /// `k_delta * int K_delta Delta t + k_nabla * int K_nabla nabla t`
    pub constraint: DeltaNablaFunctional,
    pub target: Rational,
    pub sense: Sense,
}

impl IsoProblem {
    pub fn new(
        scale: TimeScale,
        boundary: BoundaryData,
        objective: DeltaNablaFunctional,
        constraint: DeltaNablaFunctional,
        target: Rational,
        sense: Sense,
    ) -> Result<Self> {
        boundary.validate(&scale)?;
        Ok(Self { scale, boundary, objective, constraint, target, sense })
    }

    /// No constraint weight is nonzero.
    pub fn is_unconstrained(&self) -> bool {
        self.constraint.is_trivial()
    }

    fn working_objective(&self) -> DeltaNablaFunctional {
        match self.sense {
            Sense::Min => self.objective.clone(),
            Sense::Max => self.objective.negated(),
        }
    }

    fn rational_closed(&self) -> bool {
        self.objective.is_rational_closed() && self.constraint.is_rational_closed()
    }
}

/// `H_delta = g1 l0 L_delta - k1 l K_delta`, `H_nabla = g2 l0 L_nabla - k2 l K_nabla`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedLagrangian {
    pub h_delta: Expr,
    pub h_nabla: Expr,
}

impl AugmentedLagrangian {
    /// The augmented integrands as a functional with unit weights.
    pub fn functional(&self) -> DeltaNablaFunctional {
        DeltaNablaFunctional::new(Rational::one(), self.h_delta.clone(), Rational::one(), self.h_nabla.clone())
    }
}

pub fn build_augmented(p: &IsoProblem, lambda0: &Rational, lambda: &Rational) -> AugmentedLagrangian {
    augment(&p.objective, &p.constraint, lambda0, lambda)
}

fn augment(obj: &DeltaNablaFunctional, con: &DeltaNablaFunctional, lambda0: &Rational, lambda: &Rational) -> AugmentedLagrangian {
    let part = |g: &Rational, l: &Expr, k: &Rational, kk: &Expr| {
        Expr::sub(l.clone().scaled(&(g * lambda0)), kk.clone().scaled(&(k * lambda)))
    };
    AugmentedLagrangian {
        h_delta: part(&obj.gamma_delta, &obj.l_delta, &con.gamma_delta, &con.l_delta),
        h_nabla: part(&obj.gamma_nabla, &obj.l_nabla, &con.gamma_nabla, &con.l_nabla),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Normal,
    Abnormal,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Normal => "normal",
            Classification::Abnormal => "abnormal",
        }
    }
}

/// Residual traces of the constraint functional alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintExtremality {
    pub is_extremal: bool,
    pub sigma: ResidualTrace,
    pub rho: ResidualTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalCertificate {
    pub y: GridFunction<f64>,
    /// present when every figure below was verified in rational arithmetic
    pub exact: Option<GridFunction>,
    pub lambda0: Number,
    pub lambda: Number,
    /// traces of the augmented Lagrangian
    pub residual_rho: ResidualTrace,
    pub residual_sigma: ResidualTrace,
    pub classification: Classification,
    pub constraint_extremality: ConstraintExtremality,
    pub objective_value: Number,
    pub constraint_value: Number,
}

impl ExtremalCertificate {
    pub fn value_at(&self, i: usize) -> Number {
        match &self.exact {
            Some(y) => Number::Exact(y.at_index(i).clone()),
            None => Number::Float(*self.y.at_index(i)),
        }
    }

    pub fn interior(&self) -> Vec<Number> {
        (1..self.y.values().len() - 1).map(|i| self.value_at(i)).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

pub fn eval_constraint(p: &IsoProblem, y: &GridFunction) -> Result<Number> {
    eval_functional_number(&p.constraint, y)
}

fn extremality<S: Scalar>(con: &DeltaNablaFunctional, y: &GridFunction<S>, tol: f64) -> Result<ConstraintExtremality> {
    let sigma = el_residual(con, y, ResidualForm::Sigma)?;
    let rho = el_residual(con, y, ResidualForm::Rho)?;
    Ok(ConstraintExtremality { is_extremal: constancy_check(&sigma, tol) && constancy_check(&rho, tol), sigma, rho })
}

/// Whether `y` is an extremal of the constraint functional, within `1e-9`.
pub fn constraint_extremal_check<S: Scalar>(p: &IsoProblem, y: &GridFunction<S>) -> Result<ConstraintExtremality> {
    extremality(&p.constraint, y, 1e-9)
}

enum Exactness {
    Verified(GridFunction, Rational),
    /// the rational trajectory provably admits no normal multiplier
    Refuted,
    Unknown,
}

/// Candidate root of either branch before verification.
struct Candidate {
    interior: Vec<f64>,
    lambda: f64,
}

struct Branch<'a> {
    p: &'a IsoProblem,
    obj: DeltaNablaFunctional,
    opts: &'a SolveOptions,
}

impl Branch<'_> {
    fn ts(&self) -> &TimeScale {
        &self.p.scale
    }

    fn certificate(&self, y: GridFunction<f64>, exact: Option<GridFunction>, lambda0: Rational, lambda: Number) -> Result<ExtremalCertificate> {
        let p = self.p;
        let lam_r = match &lambda {
            Number::Exact(r) => r.clone(),
            Number::Float(x) => rational_from_f64(*x)?,
        };
        let aug = augment(&self.obj, &p.constraint, &lambda0, &lam_r).functional();
        let (residual_sigma, residual_rho, constraint_extremality, objective_value, constraint_value) = match &exact {
            Some(e) => (
                el_residual(&aug, e, ResidualForm::Sigma)?,
                el_residual(&aug, e, ResidualForm::Rho)?,
                extremality(&p.constraint, e, self.opts.tol)?,
                Number::Exact(eval_functional(&p.objective, e)?),
                Number::Exact(eval_functional(&p.constraint, e)?),
            ),
            None => (
                el_residual(&aug, &y, ResidualForm::Sigma)?,
                el_residual(&aug, &y, ResidualForm::Rho)?,
                extremality(&p.constraint, &y, self.opts.tol)?,
                Number::Float(eval_functional(&p.objective, &y)?),
                Number::Float(eval_functional(&p.constraint, &y)?),
            ),
        };
        let classification = if lambda0.is_zero() || constraint_extremality.is_extremal {
            Classification::Abnormal
        } else {
            Classification::Normal
        };
        Ok(ExtremalCertificate {
            y,
            exact,
            lambda0: Number::Exact(lambda0),
            lambda,
            residual_rho,
            residual_sigma,
            classification,
            constraint_extremality,
            objective_value,
            constraint_value,
        })
    }

    fn constraint_met(&self, c: f64) -> bool {
        let k = self.p.target.as_f64();
        (c - k).abs() <= self.opts.tol * (1.0 + k.abs())
    }

    /// Exact verification of a normal root.
    fn exact_normal(&self, cand: &Candidate) -> Result<Exactness> {
        let p = self.p;
        let ts = self.ts();
        let Some(interior) = reconstruct_interior(&cand.interior, self.opts.max_denominator) else {
            return Ok(Exactness::Unknown);
        };
        let y = p.boundary.complete(ts, &interior)?;
        let (Ok(so), Ok(sc)) = (Prepared::new(&self.obj).trace(ts, y.values()), Prepared::new(&p.constraint).trace(ts, y.values()))
        else {
            return Ok(Exactness::Unknown);
        };
        let meets = eval_functional(&p.constraint, &y)? == p.target;
        let lambda = match (1..sc.len()).find(|&i| sc[i] != sc[0]) {
            Some(i) => (&so[i] - &so[0]) / (&sc[i] - &sc[0]),
            // y is an extremal of K: no finite multiplier works unless y is
            // also an extremal of the objective
            None if meets && !all_equal(&so) => return Ok(Exactness::Refuted),
            None => match reconstruct_rational(cand.lambda, self.opts.max_denominator) {
                Some(l) => l,
                None => return Ok(Exactness::Unknown),
            },
        };
        let combined: Vec<Rational> = so.iter().zip(&sc).map(|(o, c)| o - &lambda * c).collect();
        if !all_equal(&combined) || !meets {
            return Ok(Exactness::Unknown);
        }
        Ok(Exactness::Verified(y, lambda))
    }

    fn normal(&self, cand: &Candidate) -> Result<Option<ExtremalCertificate>> {
        if self.p.rational_closed() {
            match self.exact_normal(cand)? {
                Exactness::Verified(y, lambda) => {
                    return self.certificate(y.to_f64(), Some(y), Rational::one(), Number::Exact(lambda)).map(Some)
                }
                Exactness::Refuted => return Ok(None),
                Exactness::Unknown => {}
            }
        }
        if cand.lambda.is_nan() || cand.lambda.abs() > self.opts.max_multiplier {
            return Ok(None);
        }
        let y = GridFunction::new(self.ts(), with_boundary(&self.p.boundary, &cand.interior))?;
        let cert = self.certificate(y, None, Rational::one(), Number::Float(cand.lambda))?;
        let ok = constancy_check(&cert.residual_sigma, self.opts.tol)
            && constancy_check(&cert.residual_rho, self.opts.tol)
            && self.constraint_met(cert.constraint_value.to_f64());
        Ok(ok.then_some(cert))
    }

    fn abnormal(&self, interior: &[f64]) -> Result<Option<ExtremalCertificate>> {
        let p = self.p;
        let ts = self.ts();
        if p.rational_closed() {
            if let Some(vals) = reconstruct_interior(interior, self.opts.max_denominator) {
                let y = p.boundary.complete(ts, &vals)?;
                if let Ok(sc) = Prepared::new(&p.constraint).trace(ts, y.values()) {
                    if all_equal(&sc) && eval_functional(&p.constraint, &y)? == p.target {
                        return self.certificate(y.to_f64(), Some(y), Rational::zero(), Number::Exact(Rational::one())).map(Some);
                    }
                }
            }
        }
        let y = GridFunction::new(ts, with_boundary(&p.boundary, interior))?;
        let cert = self.certificate(y, None, Rational::zero(), Number::Float(1.0))?;
        let ok = cert.constraint_extremality.is_extremal && self.constraint_met(cert.constraint_value.to_f64());
        Ok(ok.then_some(cert))
    }
}

fn target_row(grad: &[f64]) -> impl Iterator<Item = f64> + '_ {
    grad[1..grad.len() - 1].iter().copied()
}

fn normal_candidates(b: &Branch) -> Vec<Candidate> {
    let p = b.p;
    let ts = b.ts();
    let m = ts.interior_len();
    let obj = Prepared::new(&b.obj);
    let con = Prepared::new(&p.constraint);
    let k = p.target.as_f64();
    let system = |z: &[f64]| -> Result<Linear> {
        let y = with_boundary(&p.boundary, &z[..m]);
        let lambda = z[m];
        let lo = obj.linearize(ts, &y)?;
        let lc = con.linearize(ts, &y)?;
        let (fo, jo) = lo.differences();
        let (fc, jc) = lc.differences();
        let mut f = DVector::zeros(m + 1);
        let mut j = DMatrix::zeros(m + 1, m + 1);
        for r in 0..m {
            f[r] = fo[r] - lambda * fc[r];
            for c in 0..m {
                j[(r, c)] = jo[(r, c)] - lambda * jc[(r, c)];
            }
            j[(r, m)] = -fc[r];
        }
        f[m] = lc.value - k;
        for (c, g) in target_row(&lc.grad).enumerate() {
            j[(m, c)] = g;
        }
        Ok((f, j))
    };
    let mut starts = Vec::new();
    for base in perturbed_starts(&line_start(&p.boundary, ts), b.opts.restarts.max(1), b.opts.seed) {
        for l in LAMBDA_SEEDS {
            let mut z = base.clone();
            z.push(l);
            starts.push(z);
        }
    }
    multistart(&system, starts, &b.opts.newton, b.opts.exec)
        .into_iter()
        .flatten()
        .map(|r| Candidate { interior: r.x[..m].to_vec(), lambda: r.x[m] })
        .collect()
}

fn abnormal_candidates(b: &Branch) -> Vec<Vec<f64>> {
    let p = b.p;
    let ts = b.ts();
    let m = ts.interior_len();
    let con = Prepared::new(&p.constraint);
    let k = p.target.as_f64();
    // m residual differences plus the constraint row
    let system = |u: &[f64]| -> Result<Linear> {
        let lc = con.linearize(ts, &with_boundary(&p.boundary, u))?;
        let (fc, jc) = lc.differences();
        let mut f = DVector::zeros(m + 1);
        let mut j = DMatrix::zeros(m + 1, m);
        f.rows_mut(0, m).copy_from(&fc);
        j.rows_mut(0, m).copy_from(&jc);
        f[m] = lc.value - k;
        for (c, g) in target_row(&lc.grad).enumerate() {
            j[(m, c)] = g;
        }
        Ok((f, j))
    };
    let starts = perturbed_starts(&line_start(&p.boundary, ts), b.opts.restarts.max(1), b.opts.seed);
    multistart(&system, starts, &b.opts.newton, b.opts.exec).into_iter().flatten().map(|r| r.x).collect()
}

fn same(a: &ExtremalCertificate, b: &ExtremalCertificate) -> bool {
    a.lambda0 == b.lambda0 && a.y.distance(&b.y) <= 1e-6 && (a.lambda.to_f64() - b.lambda.to_f64()).abs() <= 1e-6
}

fn push_unique(out: &mut Vec<ExtremalCertificate>, c: ExtremalCertificate) {
    if !out.iter().any(|o| same(o, &c)) {
        out.push(c);
    }
}

/// `(lambda0 desc, objective in the direction of sense)`, stable.
fn order(certs: &mut [ExtremalCertificate], sense: Sense) {
    certs.sort_by(|a, b| {
        let l = b.lambda0.partial_cmp(&a.lambda0).unwrap_or(Ordering::Equal);
        let o = a.objective_value.partial_cmp(&b.objective_value).unwrap_or(Ordering::Equal);
        l.then(match sense {
            Sense::Min => o,
            Sense::Max => o.reverse(),
        })
    });
}

fn check_solvable(p: &IsoProblem) -> Result<()> {
    if p.scale.len() < 3 {
        return Err(Error::DegenerateTimeScale("the time scale has no interior point to solve for".into()));
    }
    p.boundary.validate(&p.scale)
}

fn unconstrained(p: &IsoProblem, opts: &SolveOptions) -> Result<Vec<ExtremalCertificate>> {
    let free = find_free_extremals(&p.objective, &p.boundary, &p.scale, p.sense, opts)?;
    let branch = Branch { p, obj: p.working_objective(), opts };
    let mut out = Vec::new();
    for e in free {
        let mut c = branch.certificate(e.y, e.exact, Rational::one(), Number::Exact(Rational::zero()))?;
        // without a constraint there is nothing for y to be abnormal against
        c.classification = Classification::Normal;
        out.push(c);
    }
    Ok(out)
}

fn normal_branch(p: &IsoProblem, opts: &SolveOptions) -> Result<Vec<ExtremalCertificate>> {
    let branch = Branch { p, obj: p.working_objective(), opts };
    let mut out = Vec::new();
    for cand in normal_candidates(&branch) {
        if let Some(c) = branch.normal(&cand)? {
            push_unique(&mut out, c);
        }
    }
    Ok(out)
}

fn abnormal_branch(p: &IsoProblem, opts: &SolveOptions) -> Result<Vec<ExtremalCertificate>> {
    let branch = Branch { p, obj: p.working_objective(), opts };
    let mut out = Vec::new();
    for u in abnormal_candidates(&branch) {
        if let Some(c) = branch.abnormal(&u)? {
            push_unique(&mut out, c);
        }
    }
    Ok(out)
}

fn no_roots(p: &IsoProblem, opts: &SolveOptions, branch: &str) -> Error {
    if let Some(reason) = infeasibility(p, opts.seed) {
        return Error::InfeasibleConstraint(reason);
    }
    Error::NonConvergence(format!("{branch} found no extremal from {} starts", opts.restarts.max(1)))
}

/// Normal certificates (`lambda0 = 1`), ordered by objective.
pub fn solve_normal(p: &IsoProblem, opts: &SolveOptions) -> Result<Vec<ExtremalCertificate>> {
    check_solvable(p)?;
    let mut out = if p.is_unconstrained() { unconstrained(p, opts)? } else { normal_branch(p, opts)? };
    if out.is_empty() {
        return Err(no_roots(p, opts, "the normal branch"));
    }
    order(&mut out, p.sense);
    Ok(out)
}

/// Normal and abnormal certificates, `lambda0 = 1` first.
pub fn solve_extended(p: &IsoProblem, opts: &SolveOptions) -> Result<Vec<ExtremalCertificate>> {
    check_solvable(p)?;
    let mut out = if p.is_unconstrained() {
        unconstrained(p, opts)?
    } else {
        let mut v = normal_branch(p, opts)?;
        for c in abnormal_branch(p, opts)? {
            push_unique(&mut v, c);
        }
        v
    };
    if out.is_empty() {
        return Err(no_roots(p, opts, "neither branch"));
    }
    order(&mut out, p.sense);
    Ok(out)
}

/// Best-effort proof that the target is out of reach: both weighted
/// constraint integrands keep one sign on sampled points while the target
/// has the other sign.
fn infeasibility(p: &IsoProblem, seed: u64) -> Option<String> {
    let con = &p.constraint;
    let pts = p.scale.points_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let (mut nonneg, mut nonpos) = (true, true);
    for (w, e) in [(&con.gamma_delta, &con.l_delta), (&con.gamma_nabla, &con.l_nabla)] {
        if w.is_zero() {
            continue;
        }
        let w = w.as_f64();
        for k in 0..512 {
            let t = pts[k % pts.len()];
            let (x, v) = if k < pts.len() { (0.0, 0.0) } else { (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)) };
            let Ok(val) = e.eval_f64(t, x, v) else { return None };
            let s = w * val;
            nonneg &= s >= 0.0;
            nonpos &= s <= 0.0;
        }
    }
    let k = &p.target;
    if nonneg && k.is_negative() {
        return Some(format!("the constraint integrand is nonnegative on every sample but the target is {}", format_rational(k)));
    }
    if nonpos && k.is_positive() {
        return Some(format!("the constraint integrand is nonpositive on every sample but the target is {}", format_rational(k)));
    }
    None
}
