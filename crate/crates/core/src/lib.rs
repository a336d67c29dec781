//! Value-oracle toolkit for nonnegative submodular maximization under matroid
//! constraints.
//!
//! The crate covers fractional local search over `P_t(M)` and `B_t(M)` with
//! pipage rounding, symmetry-gap computations for symmetric instances, and the
//! smoothed/refined instance pairs used to build query lower bounds, all
//! checkable against brute force on small ground sets.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below pin the two
//! instantiations used throughout: `f64` for oracle values and sampling, and
//! [`Rational`] for polytope arithmetic that must not drift.

pub mod brute;
pub mod checks;
pub mod error;
pub mod extension;
pub mod gen;
pub mod hardness;
pub mod localsearch;
pub mod lp;
pub mod matroid;
pub mod pipage;
pub mod point;
pub mod rng;
pub mod scalar;
pub mod setfn;
pub mod subset;
pub mod symmetry;

pub use error::{Error, Result};
pub use point::Point;
pub use scalar::{parse_rational, Rational, Scalar};
pub use setfn::{SetFunction, ValueOracle, Verdict, Witness};
pub use subset::Subset;

/// Floating-point point in `[0,1]^n`.
pub type Point64 = Point<f64>;
/// Single-precision point, mostly useful for cheap sampling experiments.
pub type Point32 = Point<f32>;
/// Exact point with rational coordinates.
pub type ExactPoint = Point<Rational>;
/// The smoothing function in double precision.
pub type Phi64 = hardness::PhiFunction<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
