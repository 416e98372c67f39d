use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, NumAssignOps};

/// Floating-point scalar used by every numerical routine in the crate.
///
/// Implemented for any type with the usual `num-traits` float surface, so
/// `f32` and `f64` both work. Double precision is what the tabulated
/// energies need; `f32` is supported for quick low-accuracy runs.
pub trait Real:
    Float + FloatConst + NumAssignOps + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize(n: usize) -> Self {
        Self::from(n).expect("count representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssignOps
        + Debug
        + Display
        + LowerExp
        + Default
        + Send
        + Sync
        + 'static
{
}
