use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type the numerics are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute eigenvalue tolerance for PSD tests, before norm scaling.
    const TOL_PSD: f64;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }

    fn tol_psd() -> Self {
        Self::of(Self::TOL_PSD)
    }
}

impl Scalar for f64 {
    const TOL_PSD: f64 = 1e-10;
}

impl Scalar for f32 {
    const TOL_PSD: f64 = 1e-5;
}
