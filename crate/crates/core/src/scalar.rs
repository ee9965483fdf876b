use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating point scalar used throughout the crate.
///
/// Everything numeric is generic over this trait so the same code runs in
/// `f32` or `f64`; the crate root exports `f64` aliases for the common case.
/// The `eps_*` constants are the default tolerances for structural checks
/// (mass conservation, interval clamping, atom grouping) and are chosen per
/// scalar type since they track the available precision.
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Tolerance for probability masses: weight sums, conservation checks.
    fn eps_mass() -> Self;

    /// Half-width of the band around `[0,1]` inside which points are clamped
    /// onto the interval instead of rejected.
    fn eps_range() -> Self;

    /// Distance below which two atom positions count as the same point.
    fn eps_atom() -> Self;

    /// Tolerance for orbit closure: how far `Z_n(x0)` may land from `x0`.
    fn eps_cycle() -> Self;

    /// Tolerance for row-stochasticity (`check_markov`) preconditions.
    fn eps_markov() -> Self;
}

impl Real for f64 {
    fn eps_mass() -> Self {
        1e-12
    }
    fn eps_range() -> Self {
        1e-12
    }
    fn eps_atom() -> Self {
        1e-9
    }
    fn eps_cycle() -> Self {
        1e-12
    }
    fn eps_markov() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn eps_mass() -> Self {
        1e-5
    }
    fn eps_range() -> Self {
        1e-5
    }
    fn eps_atom() -> Self {
        1e-4
    }
    fn eps_cycle() -> Self {
        1e-5
    }
    fn eps_markov() -> Self {
        1e-3
    }
}

/// Sup norm of a slice. Empty slices have norm zero.
pub fn sup_norm<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
}

/// Maximum entry of a slice (not the absolute value).
pub fn max_entry<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::neg_infinity(), |m, &x| m.max(x))
}

/// Minimum entry of a slice.
pub fn min_entry<F: Real>(v: &[F]) -> F {
    v.iter().fold(F::infinity(), |m, &x| m.min(x))
}
