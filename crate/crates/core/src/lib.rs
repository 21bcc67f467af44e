//! Delta-nabla calculus of variations on finite time scales.
//!
//! The crate evaluates combined delta-nabla functionals
//!
//! ```text
//! L(y) = g1 * int_a^b L_delta(t, y^sigma, y^Delta) Delta t
//!      + g2 * int_a^b L_nabla(t, y^rho, y^nabla) nabla t
//! ```
//!
//! computes their Euler-Lagrange integral residuals, and solves free,
//! isoperimetric (normal and abnormal) and bi-objective Pareto problems on
//! finite time scales, recovering exact rational answers where they exist.

pub mod cli;
pub mod error;
pub mod exec;
pub mod expr;
pub mod identities;
pub mod isoperimetric;
pub mod number;
pub mod pareto;
pub mod solver;
pub mod timescale;
pub mod variational;

pub use error::{Error, Result};
pub use exec::Execution;
pub use expr::{parse, Expr, Var};
pub use number::{Number, Rational};
pub use timescale::{DenseSegmentAdapter, GridFunction, TimeScale};
