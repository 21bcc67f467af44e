//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use deltanabla::isoperimetric::{constraint_extremal_check, solve_extended, solve_normal, Classification};
use deltanabla::identities::{run_suite, IDENTITY_NAMES};
use deltanabla::number::{int, rational, Scalar};
use deltanabla::pareto::{default_gammas, necessity_check, nondominated_filter, sweep};
use deltanabla::variational::{find_free_extremal, Sense, SolveOptions};
use deltanabla::{Error, Execution, GridFunction, Number, Rational};

use common::{constrained_optimum, fixture, free_optimum, load};

fn ex(r: Rational) -> Number {
    Number::Exact(r)
}

/// Exact match, or a float within `1e-9` when reconstruction did not apply.
fn matches(n: &Number, r: &Rational) -> bool {
    match n {
        Number::Exact(v) => v == r,
        Number::Float(x) => (x - r.as_f64()).abs() <= 1e-9,
    }
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn normal_case() {
    let p = load("iso_a.toml").iso_problem().unwrap();
    let certs = solve_extended(&p, &opts()).unwrap();
    assert_eq!(certs.len(), 2, "{certs:#?}");
    let expected = [
        (rational(-11, 3), rational(9, 11), rational(25, 22)),
        (rational(143, 21), rational(69, 77), rational(1345, 1078)),
    ];
    for (c, (lambda, y3, obj)) in certs.iter().zip(&expected) {
        assert_eq!(c.classification, Classification::Normal);
        assert!(matches(&c.lambda, lambda), "lambda {}", c.lambda);
        assert!(matches(&c.value_at(1), y3), "y(3) {}", c.value_at(1));
        assert!(matches(&c.objective_value, obj), "objective {}", c.objective_value);
        assert!(c.is_exact());
    }
}

fn swapped_case() {
    let p = load("iso_b.toml").iso_problem().unwrap();
    let certs = solve_extended(&p, &opts()).unwrap();
    let c = certs.iter().find(|c| c.value_at(1) == ex(rational(9, 11))).expect("certificate with y(3) = 9/11");
    assert_eq!(c.constraint_value, ex(rational(25, 22)));
}

fn abnormal_case() {
    let p = load("abnormal.toml").iso_problem().unwrap();
    assert!(matches!(solve_normal(&p, &opts()), Err(Error::NonConvergence(_))));
    let certs = solve_extended(&p, &opts()).unwrap();
    assert_eq!(certs.len(), 1);
    let c = &certs[0];
    assert_eq!(c.lambda0, ex(int(0)));
    assert_eq!(c.classification, Classification::Abnormal);
    assert_eq!(c.value_at(1), ex(rational(8, 11)));
    let y0 = c.exact.clone().unwrap();
    let k = constraint_extremal_check(&p, &y0).unwrap();
    assert!(k.is_extremal);
    assert_eq!(k.rho.values, vec![ex(rational(24, 11)); 2]);
    assert_eq!(k.sigma.values, vec![ex(rational(24, 11)); 2]);

    let a = load("iso_a.toml").iso_problem().unwrap();
    let y1 = GridFunction::new(&a.scale, vec![int(0), rational(9, 11), int(1)]).unwrap();
    let k = constraint_extremal_check(&a, &y1).unwrap();
    assert!(!k.is_extremal);
    assert_eq!(k.sigma.values, vec![ex(rational(9, 11)), ex(rational(12, 11))]);
}

fn monotone(pts: &[deltanabla::pareto::ParetoPoint]) {
    for w in pts.windows(2) {
        assert!(w[1].f_delta.to_f64() <= w[0].f_delta.to_f64() + 1e-9);
        assert!(w[1].f_nabla.to_f64() >= w[0].f_nabla.to_f64() - 1e-9);
    }
}

fn pareto_nec() {
    let p = load("pareto_nec.toml").bi_problem().unwrap();
    let report = sweep(&p, &default_gammas(9), &opts()).unwrap();
    assert!(report.convex());
    let pts = report.points();
    assert_eq!(pts.len(), 9);
    for pt in &pts {
        let g = pt.gamma.as_f64();
        let y3 = pt.y.values()[1];
        assert!((y3 - (8.0 - 2.0 * g) / (11.0 - 4.0 * g)).abs() <= 1e-9);
        assert!(y3 > 8.0 / 11.0 && y3 < 6.0 / 7.0);
        assert!(pt.pareto);
    }
    assert_eq!(nondominated_filter(&pts), pts);
    monotone(&pts);
}

fn pareto_pr() {
    let p = load("pareto_pr.toml").bi_problem().unwrap();
    let report = sweep(&p, &default_gammas(9), &opts()).unwrap();
    let pts = report.points();
    assert_eq!(pts.len(), 9);
    for pt in &pts {
        let y1 = pt.y.values()[1];
        assert!((y1 - (3.0 - 3.0 * pt.gamma.as_f64())).abs() <= 1e-9);
        assert!(y1 > 0.0 && y1 < 3.0);
    }
    assert_eq!(nondominated_filter(&pts), pts);
    monotone(&pts);
}

fn necessity() {
    let p = load("pareto_nec.toml").bi_problem().unwrap();
    let y = GridFunction::new(&p.scale, vec![int(0), rational(9, 11), int(1)]).unwrap();
    let r = necessity_check(&p, &y, &opts());
    assert!(r.nabla_given_delta.passed && r.delta_given_nabla.passed);
    assert_eq!(r.nabla_given_delta.level, ex(rational(105, 242)));
    assert_eq!(r.delta_given_nabla.level, ex(rational(25, 22)));
}

fn identity_suite() {
    let r = run_suite(None, 200, 2024, Execution::default()).unwrap();
    assert_eq!(r.cases, 200);
    assert_eq!(r.failures(), 0, "{:?}", r.tallies);
    for name in IDENTITY_NAMES {
        assert_eq!(r.tallies[name], (200, 0), "{name}");
    }
}

fn oracle_equivalence() {
    let close = |a: &[f64], b: &[f64], what: &str| {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-3, "{what}: solver {a:?} oracle {b:?}");
        }
    };
    for name in ["free_mixed.toml", "free_two.toml", "transcendental.toml"] {
        let p = load(name);
        let e = find_free_extremal(&p.objective, &p.boundary, &p.scale, Sense::Min, &opts()).unwrap();
        close(&e.y.values()[1..p.scale.len() - 1], &free_optimum(&p, &p.objective), name);
    }
    for name in ["iso_a.toml", "iso_b.toml", "abnormal.toml", "iso_two.toml"] {
        let p = load(name);
        let c = solve_extended(&p.iso_problem().unwrap(), &opts()).unwrap();
        let oracle = constrained_optimum(&p).expect("feasible");
        close(&c[0].y.values()[1..p.scale.len() - 1], &oracle, name);
    }
    for name in ["pareto_nec.toml", "pareto_pr.toml", "pareto_two.toml"] {
        let p = load(name);
        let bi = p.bi_problem().unwrap();
        let gammas = [rational(1, 4), rational(1, 2), rational(3, 4)];
        for pt in sweep(&bi, &gammas, &opts()).unwrap().points() {
            let f = deltanabla::pareto::scalarize(&bi, &pt.gamma).unwrap().functional;
            close(&pt.y.values()[1..p.scale.len() - 1], &free_optimum(&p, &f), name);
        }
    }
}

fn continuous_limit() {
    let p = load("continuous.toml");
    assert_eq!(p.scale.len(), 1001);
    let o = SolveOptions { restarts: 1, ..opts() };
    let e = find_free_extremal(&p.objective, &p.boundary, &p.scale, Sense::Min, &o).unwrap();
    let dev = p.scale.points_f64().iter().zip(e.y.values()).map(|(t, y)| (y - t).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-3, "max deviation {dev}");
}

/// Every fixture through the command that applies to it.
pub const CLI_SUITE: &[(&str, &str, &[&str])] = &[
    ("eval", "iso_a.toml", &["--y", "9/11"]),
    ("eval", "pareto_nec.toml", &["--y", "9/11"]),
    ("eval", "transcendental.toml", &["--y", "1/2"]),
    ("extremal", "free_mixed.toml", &[]),
    ("extremal", "free_two.toml", &[]),
    ("extremal", "transcendental.toml", &["--sense", "min"]),
    ("extremal", "no_extremal.toml", &[]),
    ("extremal", "continuous.toml", &["--restarts", "1"]),
    ("iso", "iso_a.toml", &[]),
    ("iso", "iso_b.toml", &[]),
    ("iso", "abnormal.toml", &[]),
    ("iso", "iso_two.toml", &[]),
    ("iso", "infeasible.toml", &[]),
    ("pareto", "pareto_nec.toml", &["--gamma-steps", "9"]),
    ("pareto", "pareto_pr.toml", &["--gammas", "1/4,1/2,3/4", "--format", "csv"]),
    ("pareto", "pareto_two.toml", &["--gamma-steps", "5"]),
    ("verify", "iso_a.toml", &["--cases", "50"]),
];

fn cli_run(cmd: &str, file: &str, extra: &[&str], seed: &str) -> (Option<i32>, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_deltanabla"))
        .arg(cmd)
        .arg("--problem")
        .arg(fixture(file))
        .args(["--seed", seed])
        .args(extra)
        .output()
        .unwrap();
    (out.status.code(), out.stdout, out.stderr)
}

fn determinism() {
    for (cmd, file, extra) in CLI_SUITE {
        let a = cli_run(cmd, file, extra, "5");
        let b = cli_run(cmd, file, extra, "5");
        assert_eq!(a, b, "{cmd} {file}");
        assert!(!a.1.is_empty() || !a.2.is_empty());
    }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("isoperimetric normal case: two certificates", normal_case),
        ("swapped roles: y(3) = 9/11, constraint 25/22", swapped_case),
        ("abnormal case: lambda0 = 0, y(3) = 8/11, K-trace 24/11", abnormal_case),
        ("pareto front y(3) = (8-2g)/(11-4g)", pareto_nec),
        ("pareto front y(1) = 3-3g", pareto_pr),
        ("necessity in both directions, levels 105/242 and 25/22", necessity),
        ("identity suite on 200 random scales", identity_suite),
        ("grid-search oracle equivalence", oracle_equivalence),
        ("continuous limit at 1000 samples", continuous_limit),
        ("byte-identical CLI reports for a fixed seed", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {:>2}: PASS  {name} ({secs:.2}s)", i + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| e.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                println!("criterion {:>2}: FAIL  {name} ({secs:.2}s): {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
