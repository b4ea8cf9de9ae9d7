//! Scalar abstraction shared by every numerical kernel.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Real floating-point type the engine is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FftNum + Sum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into the working precision.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn nu(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("finite value")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number in working precision.
pub type Cplx<T> = Complex<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Cplx<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn ci<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::one())
}

/// `exp(i x)`.
#[inline]
pub fn cis<T: Real>(x: T) -> Cplx<T> {
    Complex::new(x.cos(), x.sin())
}

/// Pairwise summation, deterministic for a given input order.
pub fn pairwise_sum<T: Real>(xs: &[Cplx<T>]) -> Cplx<T> {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().fold(czero(), |acc, &x| acc + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Relative L2 distance `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_l2<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "series length mismatch");
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (*x - *y).norm_sqr().as_f64();
        den += y.norm_sqr().as_f64();
    }
    num.sqrt() / den.sqrt().max(floor)
}
