//! Bi-objective problems `min (g_delta(y), g_nabla(y))` with fixed end values.
//!
//! Fronts come from the convex scalarization `gamma g_delta + (1 - gamma) g_nabla`.
//! A swept point is only labelled Pareto optimal (locally) when both
//! integrands pass the sampled joint convexity check and `gamma` lies strictly
//! inside `(0, 1)`.

use std::cmp::Ordering;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exec::map_ordered;
use crate::expr::Expr;
use crate::isoperimetric::{solve_extended, ExtremalCertificate, IsoProblem};
use crate::number::{format_rational, rational_from_f64, Number, Rational};
use crate::timescale::{GridFunction, TimeScale};
use crate::variational::{
    check_joint_convexity, eval_functional, eval_functional_number, find_free_extremal, BoundaryData, DeltaNablaFunctional,
    DomainBox, Sense, SolveOptions, Verdict,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BiObjectiveProblem {
    pub scale: TimeScale,
    pub boundary: BoundaryData,
    pub l_delta: Expr,
    pub l_nabla: Expr,
}

impl BiObjectiveProblem {
    pub fn new(scale: TimeScale, boundary: BoundaryData, l_delta: Expr, l_nabla: Expr) -> Result<Self> {
        boundary.validate(&scale)?;
        Ok(Self { scale, boundary, l_delta, l_nabla })
    }

    pub fn g_delta(&self) -> DeltaNablaFunctional {
        DeltaNablaFunctional::delta_only(self.l_delta.clone())
    }

    pub fn g_nabla(&self) -> DeltaNablaFunctional {
        DeltaNablaFunctional::nabla_only(self.l_nabla.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scalarized {
    pub functional: DeltaNablaFunctional,
    /// `gamma` is 0 or 1, outside the open interval where scalarized
    /// minimizers are known to be Pareto optimal
    pub endpoint: bool,
}

pub fn scalarize(p: &BiObjectiveProblem, gamma: &Rational) -> Result<Scalarized> {
    if gamma < &Rational::zero() || gamma > &Rational::one() {
        return Err(Error::domain(format!("gamma = {} is outside [0, 1]", format_rational(gamma))));
    }
    Ok(Scalarized {
        functional: DeltaNablaFunctional::new(gamma.clone(), p.l_delta.clone(), Rational::one() - gamma, p.l_nabla.clone()),
        endpoint: gamma.is_zero() || gamma.is_one(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub gamma: Rational,
    pub y: GridFunction<f64>,
    pub exact: Option<GridFunction>,
    pub f_delta: Number,
    pub f_nabla: Number,
    /// both convexity verdicts passed and `gamma` is interior
    pub pareto: bool,
}

impl ParetoPoint {
    pub fn interior(&self) -> Vec<Number> {
        let n = self.y.values().len();
        (1..n - 1)
            .map(|i| match &self.exact {
                Some(y) => Number::Exact(y.at_index(i).clone()),
                None => Number::Float(*self.y.at_index(i)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub gamma: Rational,
    pub outcome: std::result::Result<ParetoPoint, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub convex_delta: Verdict,
    pub convex_nabla: Verdict,
}

impl SweepReport {
    pub fn points(&self) -> Vec<ParetoPoint> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().ok().cloned()).collect()
    }

    pub fn convex(&self) -> bool {
        self.convex_delta.is_convex() && self.convex_nabla.is_convex()
    }
}

/// `steps` equally spaced values strictly inside `(0, 1)`.
pub fn default_gammas(steps: usize) -> Vec<Rational> {
    let d = Rational::from_integer((steps as i64 + 1).into());
    (1..=steps as i64).map(|k| Rational::from_integer(k.into()) / &d).collect()
}

const CONVEXITY_SAMPLES: usize = 256;

fn solve_point(p: &BiObjectiveProblem, gamma: &Rational, convex: bool, opts: &SolveOptions) -> Result<ParetoPoint> {
    let s = scalarize(p, gamma)?;
    let e = find_free_extremal(&s.functional, &p.boundary, &p.scale, Sense::Min, opts)?;
    let (f_delta, f_nabla) = match &e.exact {
        Some(y) => (eval_functional_number(&p.g_delta(), y)?, eval_functional_number(&p.g_nabla(), y)?),
        None => (Number::Float(eval_functional(&p.g_delta(), &e.y)?), Number::Float(eval_functional(&p.g_nabla(), &e.y)?)),
    };
    Ok(ParetoPoint { gamma: gamma.clone(), y: e.y, exact: e.exact, f_delta, f_nabla, pareto: convex && !s.endpoint })
}

/// Solves the scalarized problem for every `gamma`. Per-gamma failures are
/// recorded in their entry; only an out-of-range `gamma` aborts.
pub fn sweep(p: &BiObjectiveProblem, gammas: &[Rational], opts: &SolveOptions) -> Result<SweepReport> {
    for g in gammas {
        scalarize(p, g)?;
    }
    let bx = DomainBox::for_scale(&p.scale);
    let convex_delta = check_joint_convexity(&p.l_delta, &bx, CONVEXITY_SAMPLES, opts.seed);
    let convex_nabla = check_joint_convexity(&p.l_nabla, &bx, CONVEXITY_SAMPLES, opts.seed.wrapping_add(1));
    let convex = convex_delta.is_convex() && convex_nabla.is_convex();
    let entries = map_ordered(gammas.to_vec(), opts.exec, |gamma| {
        let outcome = solve_point(p, &gamma, convex, opts);
        SweepEntry { gamma, outcome }
    });
    Ok(SweepReport { entries, convex_delta, convex_nabla })
}

fn cmp(a: &Number, b: &Number) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// `a` weakly dominates `b` in both objectives and strictly in one.
fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    let d = cmp(&a.f_delta, &b.f_delta);
    let n = cmp(&a.f_nabla, &b.f_nabla);
    d != Ordering::Greater && n != Ordering::Greater && (d == Ordering::Less || n == Ordering::Less)
}

/// Points no other point dominates, ordered by `gamma` (stable).
pub fn nondominated_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.gamma.cmp(&b.gamma));
    sorted.iter().filter(|p| !sorted.iter().any(|q| dominates(q, p))).cloned().collect()
}

/// Outcome of one of the two isoperimetric problems built around `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct NecessityDirection {
    /// "delta" or "nabla": the objective being minimized
    pub minimized: &'static str,
    /// the other objective's value at `y`, used as the constraint target
    pub level: Number,
    pub passed: bool,
    /// certificate matching `y`, when there is one
    pub matched: Option<ExtremalCertificate>,
    pub certificates: Vec<ExtremalCertificate>,
    pub error: Option<Error>,
}

/// Stationarity evidence only: whether `y` is among the extremal
/// certificates of both constrained problems.
#[derive(Debug, Clone, PartialEq)]
pub struct NecessityReport {
    pub nabla_given_delta: NecessityDirection,
    pub delta_given_nabla: NecessityDirection,
}

impl NecessityReport {
    pub fn passed(&self) -> bool {
        self.nabla_given_delta.passed && self.delta_given_nabla.passed
    }
}

fn direction(
    p: &BiObjectiveProblem,
    y: &GridFunction,
    minimized: &'static str,
    objective: DeltaNablaFunctional,
    constraint: DeltaNablaFunctional,
    opts: &SolveOptions,
) -> NecessityDirection {
    let fail = |level: Number, error: Error| NecessityDirection {
        minimized,
        level,
        passed: false,
        matched: None,
        certificates: Vec::new(),
        error: Some(error),
    };
    let level = match eval_functional_number(&constraint, y) {
        Ok(l) => l,
        Err(e) => return fail(Number::Float(f64::NAN), e),
    };
    let target = match &level {
        Number::Exact(r) => r.clone(),
        Number::Float(x) => match rational_from_f64(*x) {
            Ok(r) => r,
            Err(e) => return fail(level, e),
        },
    };
    let iso = match IsoProblem::new(p.scale.clone(), p.boundary.clone(), objective, constraint, target, Sense::Min) {
        Ok(iso) => iso,
        Err(e) => return fail(level, e),
    };
    match solve_extended(&iso, opts) {
        Ok(certificates) => {
            let yf = y.to_f64();
            let matched = certificates.iter().find(|c| c.y.distance(&yf) <= 1e-6).cloned();
            NecessityDirection { minimized, level, passed: matched.is_some(), matched, certificates, error: None }
        }
        Err(e) => fail(level, e),
    }
}

pub fn necessity_check(p: &BiObjectiveProblem, y: &GridFunction, opts: &SolveOptions) -> NecessityReport {
    NecessityReport {
        nabla_given_delta: direction(p, y, "nabla", p.g_nabla(), p.g_delta(), opts),
        delta_given_nabla: direction(p, y, "delta", p.g_delta(), p.g_nabla(), opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::number::{int, rational};

    fn nec_problem() -> BiObjectiveProblem {
        let ts = TimeScale::new([int(1), int(3), int(4)]).unwrap();
        let bd = BoundaryData::new(int(1), int(0), int(4), int(1));
        BiObjectiveProblem::new(ts, bd, parse("t * v^2").unwrap(), parse("t * v^2").unwrap()).unwrap()
    }

    fn point(gamma: Rational, fd: i64, fn_: i64) -> ParetoPoint {
        let ts = TimeScale::new([int(0), int(1)]).unwrap();
        ParetoPoint {
            gamma,
            y: GridFunction::new(&ts, vec![0.0, 0.0]).unwrap(),
            exact: None,
            f_delta: Number::Exact(int(fd)),
            f_nabla: Number::Exact(int(fn_)),
            pareto: true,
        }
    }

    #[test]
    fn scalarization() {
        let p = nec_problem();
        let s = scalarize(&p, &rational(1, 2)).unwrap();
        assert!(!s.endpoint);
        let y1 = GridFunction::new(&p.scale, vec![int(0), rational(9, 11), int(1)]).unwrap();
        assert_eq!(eval_functional(&s.functional, &y1).unwrap(), rational(95, 121));
        let one = scalarize(&p, &int(1)).unwrap();
        assert!(one.endpoint);
        assert_eq!(eval_functional(&one.functional, &y1).unwrap(), rational(105, 242));
        assert!(matches!(scalarize(&p, &rational(3, 2)), Err(Error::Domain(_))));
    }

    #[test]
    fn filter_drops_dominated_points() {
        let pts = vec![point(rational(1, 4), 1, 2), point(rational(1, 2), 2, 1), point(rational(3, 4), 2, 2)];
        let kept = nondominated_filter(&pts);
        assert_eq!(kept, pts[..2].to_vec());
        assert_eq!(nondominated_filter(&pts[2..]), pts[2..].to_vec());
    }

    #[test]
    fn sweep_matches_closed_form() {
        let p = nec_problem();
        let gammas = default_gammas(9);
        let report = sweep(&p, &gammas, &SolveOptions::default()).unwrap();
        assert!(report.convex());
        for e in &report.entries {
            let pt = e.outcome.as_ref().unwrap();
            let g = &e.gamma;
            let expected = (int(8) - int(2) * g) / (int(11) - int(4) * g);
            assert_eq!(pt.interior(), vec![Number::Exact(expected)]);
            assert!(pt.pareto);
        }
        assert!(matches!(sweep(&p, &[rational(3, 2)], &SolveOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn necessity_of_worked_candidate() {
        let p = nec_problem();
        let y = GridFunction::new(&p.scale, vec![int(0), rational(9, 11), int(1)]).unwrap();
        let r = necessity_check(&p, &y, &SolveOptions::default());
        assert!(r.passed());
        assert_eq!(r.nabla_given_delta.level, Number::Exact(rational(105, 242)));
        assert_eq!(r.delta_given_nabla.level, Number::Exact(rational(25, 22)));
    }
}
