//! Random walks on the N-th roots of unity and the probabilistic
//! representation `u(t, x) = lim E[f(x + W_n(t))]` of solutions to
//! `∂_t u = (α/N!) ∂_x^N u`.
//!
//! Modules, from the bottom up:
//!
//! - [`lattice`]: exact walk positions as cyclotomic integers.
//! - [`step`]: model parameters and the step law ξ.
//! - [`walk`]: exact laws, sampling, return and visit statistics.
//! - [`characteristic`]: characteristic functions, limits and exact moments.
//! - [`spectral`]: atomic initial data and the Fourier-multiplier semigroup.
//! - [`solver`]: exact and Monte Carlo evaluation of `E[f(x + W_n(t))]`.
//! - [`boundary`]: half-line, interval and periodic problems.
//!
//! Data-parallel loops run through [`exec::Backend`]; with the `parallel`
//! feature disabled every backend runs sequentially.

pub mod boundary;
pub mod characteristic;
pub mod error;
pub mod exec;
pub mod lattice;
pub mod spectral;
pub mod solver;
pub mod stats;
pub mod step;
pub mod walk;

pub use error::{Error, Result};
pub use exec::Backend;
pub use lattice::{CyclotomicPoint, Lattice};
pub use spectral::Datum;
pub use step::{ModelParams, StepDistribution};
