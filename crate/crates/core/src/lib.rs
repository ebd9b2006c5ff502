//! Free monotone transport in truncated noncommutative power series.
//!
//! The crate builds a transport `Y = X + 𝒟g` that pushes a free semicircular
//! family to the free Gibbs law of a small perturbation `½ΣX_j² + W`, and
//! checks the result from several independent directions.

pub mod calculus;
pub mod error;
pub mod ncalg;
pub mod onevar;
pub mod rmt;
pub mod scalar;
pub mod semitrace;
pub mod solver;
pub mod verify;

pub use error::{AlgebraError, AlgebraResult};
pub use ncalg::{ExactPoly, FloatPoly, NCPoly, PolyVec, Signature, TruncationLoss, Word};
pub use scalar::{Coeff, Rational};
pub use semitrace::TraceCache;
