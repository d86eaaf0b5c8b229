//! Scalar abstraction shared by every numerical module.
//!
//! All math goes through [`nalgebra::RealField`] so that the dense oracle
//! (which needs Hermitian eigendecompositions) and the matrix-free kernels can
//! share one bound. `num_traits::Float` is deliberately not part of the bound:
//! having both in scope makes `x.sqrt()` ambiguous.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Real scalar usable by the simulator (`f32` or `f64`).
pub trait Real:
    RealField + Copy + Default + FromPrimitive + ToPrimitive + Display + Debug + LowerExp + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64` (for I/O and reporting).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| Self::lit(n as f64))
    }

    /// Tolerance floor for iterative algorithms: the requested tolerance is
    /// never tighter than a small multiple of machine epsilon.
    #[inline]
    fn tol_floor(requested: f64) -> Self {
        let eps = Self::default_epsilon() * Self::lit(64.0);
        let req = Self::lit(requested);
        if req > eps {
            req
        } else {
            eps
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

/// `exp(-i x)` for real `x`.
#[inline]
pub(crate) fn expmi<T: Real>(x: T) -> C<T> {
    Complex::new(x.cos(), -x.sin())
}

/// Squared Euclidean norm of an amplitude vector.
pub(crate) fn norm_sqr<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
}

/// `<a|b>` with the first argument conjugated.
pub(crate) fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex::new(re, im)
}
