#![allow(dead_code)]

use std::path::PathBuf;

use deltanabla::cli::{load_problem, ProblemFile};
use deltanabla::number::Scalar;
use deltanabla::variational::DeltaNablaFunctional;
use deltanabla::TimeScale;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> ProblemFile {
    load_problem(&fixture(name)).unwrap()
}

/// Direct transcription of the functional: forward differences weighted by
/// the forward step, backward differences weighted by the backward step.
pub fn functional(f: &DeltaNablaFunctional, ts: &TimeScale, y: &[f64]) -> f64 {
    let t: Vec<f64> = ts.points().iter().map(|p| p.as_f64()).collect();
    let gd = f.gamma_delta.as_f64();
    let gn = f.gamma_nabla.as_f64();
    let mut total = 0.0;
    for j in 0..t.len() - 1 {
        let h = t[j + 1] - t[j];
        let v = (y[j + 1] - y[j]) / h;
        if gd != 0.0 {
            total += gd * h * f.l_delta.eval_f64(t[j], y[j + 1], v).unwrap_or(f64::NAN);
        }
        if gn != 0.0 {
            total += gn * h * f.l_nabla.eval_f64(t[j + 1], y[j], v).unwrap_or(f64::NAN);
        }
    }
    total
}

fn full(p: &ProblemFile, interior: &[f64]) -> Vec<f64> {
    let mut y = vec![p.boundary.alpha.as_f64()];
    y.extend_from_slice(interior);
    y.push(p.boundary.beta.as_f64());
    y
}

const BOX: f64 = 10.0;

/// Brute-force minimizer over `[-10, 10]^m` for `m <= 2`: a coarse grid,
/// then repeated zooms around the incumbent.
pub fn grid_minimize(m: usize, g: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    assert!((1..=2).contains(&m));
    let mut center = vec![0.0; m];
    let mut half = BOX;
    let mut best = (center.clone(), f64::INFINITY);
    for _ in 0..8 {
        let n = if half == BOX { 200 } else { 40 };
        let step = 2.0 * half / n as f64;
        let axis = |c: f64| (0..=n).map(move |k| c - half + step * k as f64);
        let mut consider = |x: Vec<f64>| {
            let v = g(&x);
            if v.is_finite() && v < best.1 {
                best = (x, v);
            }
        };
        if m == 1 {
            axis(center[0]).for_each(|a| consider(vec![a]));
        } else {
            for a in axis(center[0]) {
                axis(center[1]).for_each(|b| consider(vec![a, b]));
            }
        }
        center = best.0.clone();
        half = 2.0 * step;
    }
    best
}

/// Zeros of `g` on `[lo, hi]`: sign changes refined by bisection, plus
/// touching zeros found as local minima of `|g|` by golden section.
pub fn roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|k| lo + h * k as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut out: Vec<f64> = Vec::new();
    let push = |r: f64, out: &mut Vec<f64>| {
        if !out.iter().any(|q| (q - r).abs() < 1e-7) {
            out.push(r);
        }
    };
    for k in 0..n {
        let (mut a, mut b) = (xs[k], xs[k + 1]);
        let (fa, fb) = (vs[k], vs[k + 1]);
        if fa == 0.0 {
            push(a, &mut out);
        } else if fa * fb < 0.0 {
            let mut fa = fa;
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                let fc = g(c);
                if fa * fc <= 0.0 {
                    b = c;
                } else {
                    a = c;
                    fa = fc;
                }
            }
            push(0.5 * (a + b), &mut out);
        }
    }
    for k in 1..n {
        if vs[k].abs() <= vs[k - 1].abs() && vs[k].abs() <= vs[k + 1].abs() && vs[k - 1] * vs[k + 1] > 0.0 {
            let (mut a, mut b) = (xs[k - 1], xs[k + 1]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..200 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if g(c).abs() < g(d).abs() {
                    b = d;
                } else {
                    a = c;
                }
            }
            let x = 0.5 * (a + b);
            if g(x).abs() < 1e-10 {
                push(x, &mut out);
            }
        }
    }
    out
}

/// Minimizer of the objective over the box, ignoring any constraint.
pub fn free_optimum(p: &ProblemFile, f: &DeltaNablaFunctional) -> Vec<f64> {
    let m = p.scale.interior_len();
    grid_minimize(m, |u| functional(f, &p.scale, &full(p, u))).0
}

/// Minimizer of the objective over the constraint level set inside the box.
/// The last interior unknown is eliminated by root finding.
pub fn constrained_optimum(p: &ProblemFile) -> Option<Vec<f64>> {
    let c = p.constraint.as_ref().unwrap();
    let k = c.target.as_f64();
    let m = p.scale.interior_len();
    let feasible = |head: &[f64]| -> Vec<Vec<f64>> {
        roots(
            |z| {
                let mut u = head.to_vec();
                u.push(z);
                functional(&c.functional, &p.scale, &full(p, &u)) - k
            },
            -BOX,
            BOX,
            2000,
        )
        .into_iter()
        .map(|z| {
            let mut u = head.to_vec();
            u.push(z);
            u
        })
        .collect()
    };
    let objective = |u: &[f64]| functional(&p.objective, &p.scale, &full(p, u));
    match m {
        1 => feasible(&[])
            .into_iter()
            .min_by(|a, b| objective(a).total_cmp(&objective(b))),
        2 => {
            let best_over = |head: &[f64]| {
                feasible(head).into_iter().map(|u| objective(&u)).fold(f64::INFINITY, f64::min)
            };
            let (head, v) = grid_minimize(1, best_over);
            if !v.is_finite() {
                return None;
            }
            feasible(&head).into_iter().min_by(|a, b| objective(a).total_cmp(&objective(b)))
        }
        _ => panic!("oracle handles at most two unknowns"),
    }
}
