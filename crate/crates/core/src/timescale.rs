//! Finite time scales and the delta/nabla calculus on them.
//!
//! A [`TimeScale`] is a finite strictly increasing set of rational points
//! `a = t_0 < t_1 < ... < t_N = b`. Every point is isolated, so the forward
//! jump is the next point, the backward jump the previous one, with the
//! boundary convention `sigma(b) = b` and `rho(a) = a`.
//!
//! Derivatives are difference quotients and integrals are graininess-weighted
//! sums:
//!
//! * `delta_integral(f, r, s) = sum over t in [r, s) of mu(t) f(t)`
//! * `nabla_integral(f, r, s) = sum over t in (r, s] of nu(t) f(t)`
//!
//! so the delta integral never reads the integrand at its right end and the
//! nabla integral never at its left end.

use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::number::{format_rational, Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    points: Arc<[Rational]>,
    floats: Arc<[f64]>,
    discretized: bool,
}

/// Jumps and graininess at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jumps {
    pub sigma: Rational,
    pub rho: Rational,
    pub mu: Rational,
    pub nu: Rational,
}

/// The truncated domains `I^kappa`, `I_kappa` and their intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncations {
    /// all points except the maximum (domain of delta derivatives)
    pub upper: Vec<Rational>,
    /// all points except the minimum (domain of nabla derivatives)
    pub lower: Vec<Rational>,
    pub both: Vec<Rational>,
}

impl TimeScale {
    /// Sorts and deduplicates `points`. At least two distinct points are required.
    pub fn new(points: impl IntoIterator<Item = Rational>) -> Result<Self> {
        let mut pts: Vec<Rational> = points.into_iter().collect();
        pts.sort();
        pts.dedup();
        if pts.len() < 2 {
            return Err(Error::DegenerateTimeScale(format!(
                "a time scale needs at least 2 distinct points, got {}",
                pts.len()
            )));
        }
        let floats = pts.iter().map(Scalar::as_f64).collect();
        Ok(Self { points: pts.into(), floats, discretized: false })
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> &Rational {
        &self.points[0]
    }

    pub fn end(&self) -> &Rational {
        &self.points[self.points.len() - 1]
    }

    /// True when the scale was produced by sampling a dense interval.
    pub fn is_discretized(&self) -> bool {
        self.discretized
    }

    /// Number of points strictly between `a` and `b`.
    pub fn interior_len(&self) -> usize {
        self.points.len() - 2
    }

    pub fn index_of(&self, t: &Rational) -> Result<usize> {
        self.points
            .binary_search(t)
            .map_err(|_| Error::domain(format!("{} is not a point of the time scale", format_rational(t))))
    }

    pub fn contains(&self, t: &Rational) -> bool {
        self.points.binary_search(t).is_ok()
    }

    pub fn sigma_index(&self, i: usize) -> usize {
        (i + 1).min(self.points.len() - 1)
    }

    pub fn rho_index(&self, i: usize) -> usize {
        i.saturating_sub(1)
    }

    /// Forward graininess at index `i`; zero at `b`.
    pub fn mu_at(&self, i: usize) -> Rational {
        &self.points[self.sigma_index(i)] - &self.points[i]
    }

    /// Backward graininess at index `i`; zero at `a`.
    pub fn nu_at(&self, i: usize) -> Rational {
        &self.points[i] - &self.points[self.rho_index(i)]
    }

    pub fn jumps(&self, t: &Rational) -> Result<Jumps> {
        let i = self.index_of(t)?;
        Ok(Jumps {
            sigma: self.points[self.sigma_index(i)].clone(),
            rho: self.points[self.rho_index(i)].clone(),
            mu: self.mu_at(i),
            nu: self.nu_at(i),
        })
    }

    pub fn truncations(&self) -> Truncations {
        let n = self.points.len();
        Truncations {
            upper: self.points[..n - 1].to_vec(),
            lower: self.points[1..].to_vec(),
            both: self.points[1..n - 1].to_vec(),
        }
    }

    pub fn points_f64(&self) -> &[f64] {
        &self.floats
    }
}

/// Expands a dense segment `[left, right]` into a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegmentAdapter {
    pub left: Rational,
    pub right: Rational,
    pub sample_count: u32,
}

impl DenseSegmentAdapter {
    pub fn new(left: Rational, right: Rational, sample_count: u32) -> Self {
        Self { left, right, sample_count }
    }

    pub fn sample_points(&self) -> Result<Vec<Rational>> {
        if self.left >= self.right {
            return Err(Error::domain(format!(
                "dense segment [{}, {}] is empty",
                format_rational(&self.left),
                format_rational(&self.right)
            )));
        }
        if self.sample_count == 0 {
            return Err(Error::domain("dense segment needs at least one sample interval"));
        }
        let m = Rational::from_integer(self.sample_count.into());
        let step = (&self.right - &self.left) / m;
        Ok((0..=self.sample_count)
            .map(|k| &self.left + &step * Rational::from_integer(k.into()))
            .collect())
    }

    pub fn expand(&self) -> Result<TimeScale> {
        let mut ts = TimeScale::new(self.sample_points()?)?;
        ts.discretized = true;
        Ok(ts)
    }
}

/// Builds a scale from isolated points plus sampled dense segments.
pub fn build_timescale(
    points: impl IntoIterator<Item = Rational>,
    segments: &[DenseSegmentAdapter],
) -> Result<TimeScale> {
    let mut all: Vec<Rational> = points.into_iter().collect();
    for seg in segments {
        all.extend(seg.sample_points()?);
    }
    let mut ts = TimeScale::new(all)?;
    ts.discretized = !segments.is_empty();
    Ok(ts)
}

/// One value per point of a time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<S: Scalar = Rational> {
    scale: TimeScale,
    values: Vec<S>,
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(scale: &TimeScale, values: Vec<S>) -> Result<Self> {
        if values.len() != scale.len() {
            return Err(Error::domain(format!(
                "grid function has {} values for a scale of {} points",
                values.len(),
                scale.len()
            )));
        }
        Ok(Self { scale: scale.clone(), values })
    }

    pub fn from_fn(scale: &TimeScale, f: impl Fn(&Rational) -> S) -> Self {
        let values = scale.points().iter().map(f).collect();
        Self { scale: scale.clone(), values }
    }

    pub fn constant(scale: &TimeScale, c: S) -> Self {
        Self { scale: scale.clone(), values: vec![c; scale.len()] }
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn at_index(&self, i: usize) -> &S {
        &self.values[i]
    }

    pub fn at(&self, t: &Rational) -> Result<&S> {
        Ok(&self.values[self.scale.index_of(t)?])
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GridFunction<T> {
        GridFunction { scale: self.scale.clone(), values: self.values.iter().map(f).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        if self.scale != other.scale {
            return Err(Error::domain("grid functions live on different time scales"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        Ok(Self { scale: self.scale.clone(), values })
    }

    pub fn to_f64(&self) -> GridFunction<f64> {
        self.map(Scalar::as_f64)
    }

    /// `t -> y(sigma(t))`
    pub fn sigma_shift(&self) -> Self {
        let values = (0..self.values.len()).map(|i| self.values[self.scale.sigma_index(i)].clone()).collect();
        Self { scale: self.scale.clone(), values }
    }

    /// `t -> y(rho(t))`
    pub fn rho_shift(&self) -> Self {
        let values = (0..self.values.len()).map(|i| self.values[self.scale.rho_index(i)].clone()).collect();
        Self { scale: self.scale.clone(), values }
    }

    pub(crate) fn delta_at_index(&self, i: usize) -> Result<S> {
        let n = self.values.len();
        if i + 1 >= n {
            return Err(Error::domain("delta derivative is undefined at the right end point"));
        }
        let mu = S::from_rational(&self.scale.mu_at(i));
        (self.values[i + 1].clone() - self.values[i].clone()).checked_div(&mu)
    }

    pub(crate) fn nabla_at_index(&self, i: usize) -> Result<S> {
        if i == 0 || i >= self.values.len() {
            return Err(Error::domain("nabla derivative is undefined at the left end point"));
        }
        let nu = S::from_rational(&self.scale.nu_at(i));
        (self.values[i].clone() - self.values[i - 1].clone()).checked_div(&nu)
    }

    /// `(y(sigma(t)) - y(t)) / mu(t)` for `t` in `I^kappa`.
    pub fn delta_derivative(&self, t: &Rational) -> Result<S> {
        self.delta_at_index(self.scale.index_of(t)?)
    }

    /// `(y(t) - y(rho(t))) / nu(t)` for `t` in `I_kappa`.
    pub fn nabla_derivative(&self, t: &Rational) -> Result<S> {
        self.nabla_at_index(self.scale.index_of(t)?)
    }

    /// The delta derivative as a grid function. The slot at `b` holds zero and is
    /// never read by a delta integral.
    pub fn delta_derivative_fn(&self) -> Self {
        let n = self.values.len();
        let values = (0..n).map(|i| if i + 1 < n { self.delta_at_index(i).unwrap() } else { S::zero_value() }).collect();
        Self { scale: self.scale.clone(), values }
    }

    /// The nabla derivative as a grid function. The slot at `a` holds zero and is
    /// never read by a nabla integral.
    pub fn nabla_derivative_fn(&self) -> Self {
        let values = (0..self.values.len())
            .map(|i| if i > 0 { self.nabla_at_index(i).unwrap() } else { S::zero_value() })
            .collect();
        Self { scale: self.scale.clone(), values }
    }

    fn bounds(&self, from: &Rational, to: &Rational) -> Result<(usize, usize)> {
        let i = self.scale.index_of(from)?;
        let j = self.scale.index_of(to)?;
        if i > j {
            return Err(Error::domain(format!(
                "reversed integration bounds [{}, {}]",
                format_rational(from),
                format_rational(to)
            )));
        }
        Ok((i, j))
    }

    pub(crate) fn delta_integral_indices(&self, i: usize, j: usize) -> S {
        (i..j).fold(S::zero_value(), |acc, k| acc + S::from_rational(&self.scale.mu_at(k)) * self.values[k].clone())
    }

    pub(crate) fn nabla_integral_indices(&self, i: usize, j: usize) -> S {
        (i + 1..=j).fold(S::zero_value(), |acc, k| acc + S::from_rational(&self.scale.nu_at(k)) * self.values[k].clone())
    }

    pub fn delta_integral(&self, from: &Rational, to: &Rational) -> Result<S> {
        let (i, j) = self.bounds(from, to)?;
        Ok(self.delta_integral_indices(i, j))
    }

    pub fn nabla_integral(&self, from: &Rational, to: &Rational) -> Result<S> {
        let (i, j) = self.bounds(from, to)?;
        Ok(self.nabla_integral_indices(i, j))
    }

    /// `||y||_{1,inf}`: sum of the sup norms of `y^sigma`, `y^rho`, `y^Delta`
    /// and `y^nabla` over `I^kappa_kappa`.
    pub fn norm_1_inf(&self) -> Result<S> {
        let n = self.values.len();
        if n < 3 {
            return Err(Error::domain("the (1,inf) norm needs at least one interior point"));
        }
        let sup = |f: &dyn Fn(usize) -> Result<S>| -> Result<S> {
            let mut best = S::zero_value();
            for i in 1..n - 1 {
                let v = f(i)?.magnitude();
                if v > best {
                    best = v;
                }
            }
            Ok(best)
        };
        let s = sup(&|i| Ok(self.values[i + 1].clone()))?;
        let r = sup(&|i| Ok(self.values[i - 1].clone()))?;
        let d = sup(&|i| self.delta_at_index(i))?;
        let b = sup(&|i| self.nabla_at_index(i))?;
        Ok(s + r + d + b)
    }
}

impl GridFunction<f64> {
    /// `||self - other||_{1,inf}` in floating point.
    pub fn distance(&self, other: &GridFunction<f64>) -> f64 {
        let diff = GridFunction {
            scale: self.scale.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        };
        diff.norm_1_inf().unwrap_or_else(|_| {
            diff.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
        })
    }
}

impl GridFunction<Rational> {
    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }
}
