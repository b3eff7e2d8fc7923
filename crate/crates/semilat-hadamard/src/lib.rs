//! Short-distance structure of the 4D flat-space two-point kernel for a scalar
//! field of squared mass `M² = m² + 2λψ(x)`, with the background `ψ` supplied as a
//! λ-tower of multivariate polynomials.
//!
//! The singular part of the kernel is organized as
//!
//! ```text
//! G(σ) = (1/8π²) [ 1/σ + v(σ) ln(σ/ℓ²) + w(σ) ],   v = Σₙ vₙ σⁿ,  w = Σₙ wₙ σⁿ,
//! ```
//!
//! where `σ` is half the squared geodesic separation and `ℓ` a reference length.
//! The crate computes the coincidence-limit Taylor tables of the `vₙ`, `wₙ` exactly:
//!
//! * [`scalar`] — arithmetic in the ring `ℚ + ℚ·γ + ℚ·L` (rationals extended by the
//!   Euler constant and one logarithmic symbol), which is closed under every product
//!   the recursions form;
//! * [`poly`] — λ-graded polynomial carriers in the four flat coordinates, with the
//!   wave operator and the degree-counting (Euler) operator acting on them;
//! * [`recursion`] — the transport recursions that determine all `vₙ`, `wₙ` Taylor
//!   tensors order by order in σ and λ ([`recursion_coeffs`]);
//! * [`kernel`] — the closed-form constant-mass kernel `m K₁(m s)/(4π² s)` with two
//!   independent Bessel evaluation paths ([`vacuum_kernel`]);
//! * [`expansion`] — the pinned σ⁰/σ¹ expansion coefficients, the exact remainder of
//!   the truncated expansion against the kernel, and the reference-scale shift
//!   ([`short_distance_expansion`], [`scale_shift`]).
//!
//! All table entries are exact; floating point appears only when a caller evaluates
//! an entry at a numeric scale.

// Stencils and multi-array updates index by site on purpose; iterator
// rewrites of those loops obscure the neighbor arithmetic.
#![allow(clippy::needless_range_loop)]
pub mod expansion;
pub mod kernel;
pub mod poly;
pub mod recursion;
pub mod scalar;

pub use expansion::{
    expansion_remainder, golden_coincidence, remainder_fit, scale_shift,
    short_distance_expansion, ExpansionCoeffs, GoldenCoeffs, ScaleChange,
};
pub use kernel::{besselk1, besselk1_large, besselk1_small, vacuum_kernel};
pub use poly::{Mono, Poly, Series};
pub use recursion::{recursion_coeffs, HadamardCoeffs, PsiPoly, TableRow};
pub use scalar::{rat_from_f64, rat_to_f64, HadScalar, Rat, EULER_GAMMA};

use thiserror::Error;

/// Errors reported by constructors and table builders.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Validation of structural constraints failed (degrees, closure, orders).
    #[error("validation failed: {0}")]
    Validation(String),
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, Error>;
