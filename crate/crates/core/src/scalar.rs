//! Scalar abstraction.
//!
//! Every numerical routine in this crate is generic over [`Real`], which any
//! IEEE float implements (`f32`, `f64`). The trait bundles the linear-algebra
//! requirements of `nalgebra` with the `num-traits` conversions used to move
//! constants and diagnostics across the `f64` boundary.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the library is generic over.
///
/// The two helper methods exist because literals in generic code are awkward:
/// [`Real::c`] casts an `f64` constant in, [`Real::as_f64`] widens a value out
/// for diagnostics and error payloads.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {
    /// Cast an `f64` constant into `Self`.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite constants used internally.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Widen to `f64`, e.g. for error payloads and logging.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl<T> Real for T where T: RealField + FromPrimitive + ToPrimitive + Copy {}
