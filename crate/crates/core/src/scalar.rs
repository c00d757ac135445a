//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Tolerances throughout the crate are written as `f64` literals tuned for
/// double precision. [`Scalar::tol`] lifts such a literal into `Self`, flooring
/// it at a small multiple of the type's machine epsilon so the same code stays
/// meaningful in single precision.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is not representable.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_int(i: i64) -> Self {
        Self::from_i64(i).expect("integer representable in scalar type")
    }

    /// A tolerance, floored at `64 * epsilon`.
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(x).max(floor)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Named tolerances, centralized so they can be audited and tested.
pub mod tol {
    /// Identity checks (unit norms, boundary membership).
    pub const GEOM: f64 = 1e-12;
    /// Event times: re-collision guard for ray casts.
    pub const HIT: f64 = 1e-9;
    /// Betweenness slack: tangency counts as "between".
    pub const BETWEEN: f64 = 1e-12;
    /// Grazing threshold on |<v, n>| below which a contact is not a reflection.
    pub const GRAZE: f64 = 1e-9;
    /// Simultaneous-wall detection in the square.
    pub const CORNER: f64 = 1e-9;
    /// Segment clearance slack for solved orbits.
    pub const CLEAR: f64 = 1e-9;
    /// Inside-obstacle slack for ray origins sitting on a sphere.
    pub const INSIDE: f64 = 1e-9;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_is_floored_for_single_precision() {
        assert_eq!(<f64 as Scalar>::tol(1e-12), 1e-12);
        assert!(<f32 as Scalar>::tol(1e-12) >= f32::EPSILON * 64.0);
    }
}
