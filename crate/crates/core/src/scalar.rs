//! Scalar abstraction for the precision-agnostic parts of the crate.
//!
//! Measures, contrast algebra, rotations and bound geometry are written against
//! [`Real`], so they work for `f32` and `f64` alike. The lattice operators and
//! the dense eigensolver path are `f64` only.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Complex<T> = num_complex::Complex<T>;
