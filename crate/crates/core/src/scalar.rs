//! Minimal algebraic traits shared by the exact and floating-point code paths.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type GaussianRational = Complex<BigRational>;

/// Commutative ring with identity.
pub trait Ring:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
}

/// Ring in which division by a nonzero integer is defined.
pub trait QAlgebra: Ring {
    fn div_int(&self, k: i64) -> Self;
}

pub trait Field: QAlgebra + Div<Output = Self> {}

impl<T: QAlgebra + Div<Output = T>> Field for T {}

impl Ring for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl QAlgebra for f64 {
    fn div_int(&self, k: i64) -> Self {
        self / k as f64
    }
}

impl Ring for Complex64 {
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
}

impl QAlgebra for Complex64 {
    fn div_int(&self, k: i64) -> Self {
        self / k as f64
    }
}

impl Ring for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
}

impl Ring for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

impl QAlgebra for BigRational {
    fn div_int(&self, k: i64) -> Self {
        self / BigRational::from_integer(BigInt::from(k))
    }
}

impl Ring for GaussianRational {
    fn from_i64(v: i64) -> Self {
        Complex::new(BigRational::from_i64(v), BigRational::zero())
    }
}

impl QAlgebra for GaussianRational {
    fn div_int(&self, k: i64) -> Self {
        let k = BigRational::from_i64(k);
        Complex::new(&self.re / &k, &self.im / &k)
    }
}

/// Exact rational `num/den`.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn gaussian_to_complex(z: &GaussianRational) -> Complex64 {
    Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im))
}

/// Division that may fail: by zero, or when the quotient leaves the ring.
pub trait ExactDiv: Ring {
    fn exact_div(&self, d: &Self) -> Option<Self>;
}

impl ExactDiv for f64 {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        (*d != 0.0).then(|| self / d)
    }
}

impl ExactDiv for Complex64 {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        (!d.is_zero()).then(|| self / d)
    }
}

impl ExactDiv for BigRational {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        (!d.is_zero()).then(|| self / d)
    }
}

impl ExactDiv for GaussianRational {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        (!d.is_zero()).then(|| self / d)
    }
}
