//! Lattice evolution core for a real scalar field on a (1+1)-dimensional cylinder
//! (periodic spatial circle × uniform time grid), coupled order-by-order to the
//! equal-time covariance of a quantized scalar field.
//!
//! The crate is organized around one explicit second-order integrator (velocity-Verlet /
//! leapfrog for `∂ₜ²u = (∂ₓ² − μ² − V(t,x))u − J(t,x)`) that is reused everywhere:
//!
//! * [`lattice`] — grid geometry, switching windows, initial-data profiles, and the
//!   centered d'Alembert residual stencil;
//! * [`green`] — retarded/advanced/commutator kernels of the discrete wave operator,
//!   their Born expansion in a perturbing potential, and sourced classical solves;
//! * [`twopoint`] — equal-time two-point data blocks (φφ, φπ, πφ, ππ), reference
//!   vacuum/thermal states with the stepper-matched dispersion, canonical-commutator
//!   validation, covariance evolution, and reconstruction of unequal-time values;
//! * [`perturb`] — the coupled order-by-order solver: classical field tower ψₖ,
//!   covariance tower Gₖ, data corrections, and run restarts;
//! * [`renorm`] — the point-split subtraction tower Hₖ and the renormalized ⟨Φ²⟩
//!   tower with its ambiguity polynomial.
//!
//! All heavy builders are embarrassingly parallel over independent output columns;
//! a sequential fallback is available via [`Strategy::Sequential`] (and the crate
//! compiles without `rayon` when the `parallel` feature is disabled). Parallel and
//! sequential execution produce bitwise-identical results: no reduction order depends
//! on scheduling.

// Stencils and multi-array updates index by site on purpose; iterator
// rewrites of those loops obscure the neighbor arithmetic.
#![allow(clippy::needless_range_loop)]
pub mod green;
pub mod lattice;
pub mod perturb;
pub mod renorm;
pub mod twopoint;

pub(crate) mod engine;

use thiserror::Error;

/// Complex scalar used for covariance blocks.
pub type C64 = num_complex::Complex64;

/// Errors reported by constructors and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Inconsistent shapes or mismatched grids between arguments.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// Validation of physical constraints failed (tolerances, orderings).
    #[error("validation failed: {0}")]
    Validation(String),
    /// The explicit time integration exceeded the blow-up guard.
    #[error("numerical blow-up: {0}")]
    Blowup(String),
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Execution strategy for the parallelizable builders.
///
/// Outputs are bitwise-identical across strategies: work is split only over
/// independent output columns/rows and every reduction keeps a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub enum Strategy {
    /// Single-threaded loops.
    Sequential,
    /// Data-parallel loops over independent outputs (rayon).
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}


impl Strategy {
    /// Runs `f` over `items` mutably, in parallel when the strategy allows it.
    pub(crate) fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync,
    {
        match self {
            Strategy::Sequential => {
                for (i, item) in items.iter_mut().enumerate() {
                    f(i, item);
                }
            }
            #[cfg(feature = "parallel")]
            Strategy::Parallel => {
                use rayon::prelude::*;
                items.par_iter_mut().enumerate().for_each(|(i, item)| f(i, item));
            }
        }
    }
}
