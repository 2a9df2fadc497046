//! Exact univariate polynomials over Q and truncated power series over any
//! [`QAlgebra`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::scalar::{ExactDiv, QAlgebra, Ring};

/// Polynomial with rational coefficients, stored in ascending order with no
/// trailing zeros.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Poly {
    coeffs: Vec<BigRational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| BigRational::from_i64(c)).collect())
    }

    pub fn constant(c: BigRational) -> Self {
        Poly::new(vec![c])
    }

    /// The indeterminate itself.
    pub fn var() -> Self {
        Poly::new(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Horner evaluation in any ring containing Q.
    pub fn eval<R: QAlgebra>(&self, x: &R, embed: impl Fn(&BigRational) -> R) -> R {
        let mut acc = R::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + embed(c);
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.eval(&x, crate::scalar::rational_to_f64)
    }
}

impl Zero for Poly {
    fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl One for Poly {
    fn one() -> Self {
        Poly::from_ints(&[1])
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { coeffs: self.coeffs.into_iter().map(|c| -c).collect() }
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Ring for Poly {
    fn from_i64(v: i64) -> Self {
        Poly::from_ints(&[v])
    }
}

impl QAlgebra for Poly {
    fn div_int(&self, k: i64) -> Self {
        self.scale(&BigRational::new(1.into(), k.into()))
    }
}

impl ExactDiv for Poly {
    /// Polynomial long division; `None` unless the remainder vanishes.
    fn exact_div(&self, d: &Self) -> Option<Self> {
        let dd = d.degree()?;
        let lead = d.coeffs[dd].clone();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return self.is_zero().then(Poly::zero);
        }
        let mut quot = vec![BigRational::zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] / &lead;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= &c * dc;
            }
            quot[k] = c;
        }
        rem.iter().all(|c| c.is_zero()).then(|| Poly::new(quot))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            let show_coeff = k == 0 || !mag.is_one();
            if show_coeff {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => write!(f, "u")?,
                _ => write!(f, "u^{k}")?,
            }
        }
        Ok(())
    }
}

/// Power series truncated after `len` coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct Series<R> {
    pub coeffs: Vec<R>,
}

impl<R: QAlgebra> Series<R> {
    pub fn new(mut coeffs: Vec<R>, len: usize) -> Self {
        coeffs.resize(len, R::zero());
        Series { coeffs }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> R) -> Self {
        Series { coeffs: (0..len).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Series::from_fn(self.len(), |k| self.coeffs[k].clone() + other.coeffs[k].clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Series::from_fn(self.len(), |k| self.coeffs[k].clone() - other.coeffs[k].clone())
    }

    pub fn scale(&self, c: &R) -> Self {
        Series::from_fn(self.len(), |k| self.coeffs[k].clone() * c.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.len();
        let mut out = vec![R::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for j in 0..n - i {
                out[i + j] = out[i + j].clone() + a.clone() * other.coeffs[j].clone();
            }
        }
        Series { coeffs: out }
    }

    /// Multiplicative inverse; the constant term must be one.
    pub fn inverse(&self) -> Self {
        assert!(self.coeffs[0].is_one(), "series inverse needs unit constant term");
        let n = self.len();
        let mut inv = vec![R::zero(); n];
        inv[0] = R::one();
        for k in 1..n {
            let mut acc = R::zero();
            for j in 1..=k {
                acc = acc + self.coeffs[j].clone() * inv[k - j].clone();
            }
            inv[k] = -acc;
        }
        Series { coeffs: inv }
    }

    pub fn derivative(&self) -> Self {
        let n = self.len();
        Series::from_fn(n, |k| {
            if k + 1 < n {
                self.coeffs[k + 1].clone() * R::from_i64(k as i64 + 1)
            } else {
                R::zero()
            }
        })
    }

    /// Antiderivative with zero constant term.
    pub fn integral(&self) -> Self {
        Series::from_fn(self.len(), |k| {
            if k == 0 {
                R::zero()
            } else {
                self.coeffs[k - 1].div_int(k as i64)
            }
        })
    }

    /// Logarithm of a series with unit constant term.
    pub fn log(&self) -> Self {
        self.derivative().mul(&self.inverse()).integral()
    }

    /// Exponential of a series with zero constant term.
    pub fn exp(&self) -> Self {
        assert!(self.coeffs[0].is_zero(), "series exp needs zero constant term");
        let n = self.len();
        let mut e = vec![R::zero(); n];
        e[0] = R::one();
        for k in 1..n {
            let mut acc = R::zero();
            for j in 1..=k {
                acc = acc + self.coeffs[j].clone() * R::from_i64(j as i64) * e[k - j].clone();
            }
            e[k] = acc.div_int(k as i64);
        }
        Series { coeffs: e }
    }
}
