//! Exact checks of the standard time-scale calculus identities.
//!
//! Each check evaluates both sides of an identity in rational arithmetic on a
//! concrete scale, grid functions and sub-interval, and compares them exactly.
//! [`run_suite`] drives the checks over a given scale and a batch of random
//! scales; the `verify` command reports its pass counts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec::{map_ordered, Execution};
use crate::number::{rational, Rational};
use crate::timescale::{GridFunction, TimeScale};

pub const IDENTITY_NAMES: [&str; 16] = [
    "shift_sigma",
    "shift_rho",
    "parts_delta_sigma",
    "parts_delta_plain",
    "parts_nabla_rho",
    "parts_nabla_plain",
    "derivative_nabla_from_delta",
    "derivative_delta_from_nabla",
    "integral_delta_to_nabla",
    "integral_nabla_to_delta",
    "split_delta_right",
    "split_delta_left",
    "split_nabla_right",
    "split_nabla_left",
    "additivity_delta",
    "additivity_nabla",
];

/// Outcome of one identity on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub holds: bool,
}

/// Checks every identity for `f`, `g` over the sub-interval `[from, to]` of
/// their scale (`from < to` are indices into the scale, `mid` lies between them).
pub fn check_all(
    f: &GridFunction,
    g: &GridFunction,
    from: usize,
    mid: usize,
    to: usize,
) -> Result<Vec<IdentityCheck>> {
    let ts = f.scale();
    let pts = ts.points();
    let (r, s, m) = (&pts[from], &pts[to], &pts[mid]);
    let mut out = Vec::with_capacity(IDENTITY_NAMES.len());
    let mut push = |name: &'static str, holds: bool| out.push(IdentityCheck { name, holds });

    // y^sigma = y + mu y^Delta on I^kappa, y^rho = y - nu y^nabla on I_kappa
    let n = ts.len();
    let shift_sigma = (0..n - 1).all(|i| {
        f.at_index(ts.sigma_index(i)) == &(f.at_index(i) + ts.mu_at(i) * f.delta_at_index(i).unwrap())
    });
    push("shift_sigma", shift_sigma);
    let shift_rho = (1..n).all(|i| {
        f.at_index(ts.rho_index(i)) == &(f.at_index(i) - ts.nu_at(i) * f.nabla_at_index(i).unwrap())
    });
    push("shift_rho", shift_rho);

    let fg = |i: usize| f.at_index(i) * g.at_index(i);
    let boundary = fg(to) - fg(from);
    let prod = |a: &GridFunction, b: &GridFunction| a.zip_with(b, |x, y| x * y);

    let fd = f.delta_derivative_fn();
    let gd = g.delta_derivative_fn();
    let fn_ = f.nabla_derivative_fn();
    let gn = g.nabla_derivative_fn();
    let (fs, gs) = (f.sigma_shift(), g.sigma_shift());
    let (fr, gr) = (f.rho_shift(), g.rho_shift());

    let lhs = prod(&fs, &gd)?.delta_integral(r, s)?;
    let rhs = &boundary - prod(&fd, g)?.delta_integral(r, s)?;
    push("parts_delta_sigma", lhs == rhs);

    let lhs = prod(f, &gd)?.delta_integral(r, s)?;
    let rhs = &boundary - prod(&fd, &gs)?.delta_integral(r, s)?;
    push("parts_delta_plain", lhs == rhs);

    let lhs = prod(&fr, &gn)?.nabla_integral(r, s)?;
    let rhs = &boundary - prod(&fn_, g)?.nabla_integral(r, s)?;
    push("parts_nabla_rho", lhs == rhs);

    let lhs = prod(f, &gn)?.nabla_integral(r, s)?;
    let rhs = &boundary - prod(&fn_, &gr)?.nabla_integral(r, s)?;
    push("parts_nabla_plain", lhs == rhs);

    let nabla_from_delta = (1..n).all(|i| f.nabla_at_index(i).unwrap() == f.delta_at_index(ts.rho_index(i)).unwrap());
    push("derivative_nabla_from_delta", nabla_from_delta);
    let delta_from_nabla =
        (0..n - 1).all(|i| f.delta_at_index(i).unwrap() == f.nabla_at_index(ts.sigma_index(i)).unwrap());
    push("derivative_delta_from_nabla", delta_from_nabla);

    push("integral_delta_to_nabla", f.delta_integral(r, s)? == fr.nabla_integral(r, s)?);
    push("integral_nabla_to_delta", f.nabla_integral(r, s)? == fs.delta_integral(r, s)?);

    let rho_s = &pts[ts.rho_index(to)];
    let sigma_r = &pts[ts.sigma_index(from)];
    let back = s - rho_s;
    let fwd = sigma_r - r;
    push(
        "split_delta_right",
        f.delta_integral(r, s)? == f.delta_integral(r, rho_s)? + &back * fr.at_index(to),
    );
    push(
        "split_delta_left",
        f.delta_integral(r, s)? == &fwd * f.at_index(from) + f.delta_integral(sigma_r, s)?,
    );
    push(
        "split_nabla_right",
        f.nabla_integral(r, s)? == f.nabla_integral(r, rho_s)? + &back * f.at_index(to),
    );
    push(
        "split_nabla_left",
        f.nabla_integral(r, s)? == &fwd * fs.at_index(from) + f.nabla_integral(sigma_r, s)?,
    );

    push(
        "additivity_delta",
        f.delta_integral(r, s)? == f.delta_integral(r, m)? + f.delta_integral(m, s)?,
    );
    push(
        "additivity_nabla",
        f.nabla_integral(r, s)? == f.nabla_integral(r, m)? + f.nabla_integral(m, s)?,
    );
    Ok(out)
}

/// Per-identity pass/fail tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub cases: usize,
    pub tallies: BTreeMap<&'static str, (usize, usize)>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.tallies.values().map(|(_, fail)| fail).sum()
    }

    fn record(&mut self, checks: &[IdentityCheck]) {
        self.cases += 1;
        for c in checks {
            let e = self.tallies.entry(c.name).or_default();
            if c.holds {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
}

pub fn random_rational(rng: &mut impl Rng, max_numer: i64, max_denom: i64) -> Rational {
    rational(rng.gen_range(-max_numer..=max_numer), rng.gen_range(1..=max_denom))
}

/// A random scale with between `min_len` and `max_len` distinct rational points.
pub fn random_scale(rng: &mut impl Rng, min_len: usize, max_len: usize) -> TimeScale {
    let target = rng.gen_range(min_len..=max_len);
    let mut pts = Vec::new();
    while pts.len() < target {
        let p = random_rational(rng, 30, 6);
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    TimeScale::new(pts).expect("at least two distinct points")
}

pub fn random_grid_function(rng: &mut impl Rng, ts: &TimeScale) -> GridFunction {
    let values = (0..ts.len()).map(|_| random_rational(rng, 20, 9)).collect();
    GridFunction::new(ts, values).expect("one value per point")
}

fn random_case(rng: &mut impl Rng, ts: &TimeScale) -> Result<Vec<IdentityCheck>> {
    let f = random_grid_function(rng, ts);
    let g = random_grid_function(rng, ts);
    let n = ts.len();
    let from = rng.gen_range(0..n - 1);
    let to = rng.gen_range(from + 1..n);
    let mid = rng.gen_range(from..=to);
    check_all(&f, &g, from, mid, to)
}

/// Runs the identity checks on `base` (full interval, several random grid
/// functions) and on `random_scales` random scales of 2 to 12 points.
pub fn run_suite(base: Option<&TimeScale>, random_scales: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    if let Some(ts) = base {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let f = random_grid_function(&mut rng, ts);
            let g = random_grid_function(&mut rng, ts);
            let n = ts.len();
            report.record(&check_all(&f, &g, 0, n / 2, n - 1)?);
        }
    }
    let cases: Vec<u64> = (0..random_scales as u64).collect();
    let results = map_ordered(cases, exec, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k);
        let ts = random_scale(&mut rng, 2, 12);
        random_case(&mut rng, &ts)
    });
    for r in results {
        report.record(&r?);
    }
    Ok(report)
}
