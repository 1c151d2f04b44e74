use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Floating point type the simulation, classifier and optimizers are generic over.
///
/// Implemented for `f32` and `f64`. Random draws are made in `f64` and narrowed.
pub trait Scalar: Float + FloatConst + NumAssign + FftNum + Debug + Display + Default + Send + Sync + 'static {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn count(n: usize) -> Self {
        Self::from(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl<T> Scalar for T where T: Float + FloatConst + NumAssign + FftNum + Debug + Display + Default + Send + Sync + 'static
{}
