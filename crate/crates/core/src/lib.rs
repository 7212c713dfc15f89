//! Exact torus arithmetic, integer endomorphism processes and the
//! differentiation, equidistribution and genericity experiments built on them.
//!
//! Points of `(R/Z)^d` are fixed point with `B` fractional bits, so integer
//! matrices act on them exactly; everything random is keyed by a
//! [`SeedStream`] path, so results do not depend on thread count.

pub mod ball;
pub mod differentiation;
pub mod error;
pub mod finite;
pub mod genericity;
pub mod kernel;
pub mod matrix;
pub mod observable;
pub mod par;
pub mod process;
pub mod report;
pub mod rng;
pub mod torus;
pub mod weyl;

pub use error::{Error, Result};
pub use finite::FiniteAbelianGroup;
pub use matrix::IntegerEndomorphism;
pub use observable::Observable;
pub use process::{GeneratorRule, ProcessCache};
pub use rng::SeedStream;
pub use torus::{Precision, RationalPoint, TorusMetric, TorusPoint};
pub use weyl::Character;
