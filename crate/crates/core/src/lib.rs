//! Random Bernstein and Bernstein-Kantorovich estimators of a distribution
//! function on `[0, 1]` and its derivatives, with explicit finite-sample
//! confidence bands and intervals.
//!
//! The crate is organised bottom-up:
//!
//! - [`operators`]: Bernstein polynomials, forward differences and
//!   Kantorovich-type operators.
//! - [`smoothness`]: first, second and weighted second moduli.
//! - [`bounds`]: approximation and concentration bounds and the constants
//!   used to size intervals.
//! - [`estimators`]: empirical, Bernstein and kernel estimators.
//! - [`confidence`]: degree selection, bands and intervals.
//! - [`sim`]: Monte Carlo harness over the power family `F(x) = x^beta`.
//! - [`cli`]: command-line front end used by the `bernband` binary.

pub mod binomial;
pub mod bounds;
pub mod cli;
pub mod confidence;
pub mod error;
pub mod estimators;
pub mod functions;
pub mod operators;
pub mod quadrature;
pub mod sim;
pub mod smoothness;

pub use error::{Error, Result};
pub use functions::Function1D;
