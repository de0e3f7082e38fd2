//! Numerical calculus for random integral mappings acting on infinitely
//! divisible laws.
//!
//! Laws are represented by their shift / Gaussian variance / jump measure
//! triple. Integral mappings `(h, r, (a, b])` act on laws both at the
//! exponent level (quadrature of the transformed exponent) and at the
//! triple level (pushforward of the jump measure), with domain checks,
//! composition through image measures, fixed-point analysis, and a
//! pathwise Monte Carlo simulator used to cross-validate the analytic
//! routes end to end.

pub mod analysis;
pub mod cli;
pub mod compose;
pub mod error;
pub mod experiments;
pub mod id_measures;
pub mod kernels;
pub mod montecarlo;
pub mod quad;
pub mod serde_ext;
pub mod transform;
pub mod special;

pub use error::{CalcError, Result};
