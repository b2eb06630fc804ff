//! Optimal liquidation and quadratic-claim hedging under linear temporary
//! price impact, for an exponential-utility investor trading a Gaussian
//! (arithmetic Brownian) asset.
//!
//! The crate provides four layers that check each other:
//!
//! * [`model`] — problem parameterization and validation.
//! * [`variational`] — the deterministic variational backbone: a closed-form
//!   hyperbolic-sine solver plus an independent discretized quadratic-program
//!   oracle for the same problem.
//! * [`strategy`] — the closed-form feedback trading law and its closed-loop
//!   integration along a price path.
//! * [`simulate`] / [`dual`] — Monte Carlo certainty-equivalent estimation on
//!   the primal side and the decomposed dual value on the other, so that the
//!   two sides can be cross-verified numerically.
//!
//! The crate is `no_std`-compatible (`--no-default-features --features libm`);
//! all heap use goes through `alloc`. File formats, CSV/JSON encoding and the
//! CLI live in the companion `achedge` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// Negated float comparisons like `!(x > 0.0)` are deliberate: they reject
// NaN along with the out-of-range sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("achedge-core needs a float math source: enable `std` or `libm`");

extern crate alloc;

mod error;
pub(crate) mod math;
#[cfg(test)]
pub(crate) mod testutil;

pub mod dual;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod strategy;
pub mod variational;

pub use error::{Error, Result};
pub use model::{derived_constants, validate_problem, DerivedConstants, ProblemSpec};
