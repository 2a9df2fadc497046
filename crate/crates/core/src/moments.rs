//! Moment method: exact large-q moments, the moments → Lanczos recursion and
//! the continued-fraction inverse.
//!
//! Moments follow `C(t) = Σ m_n (it)ⁿ/n!`, so that
//! `Σ zⁿ m_n = 1/(1 − a₀z − b₁²z²/(1 − a₁z − …))`.

use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::krylov::TridiagonalCoeffs;
use crate::scalar::{ExactDiv, GaussianRational, Ring};
use crate::series::{Poly, Series};

/// Lanczos coefficients with `b_n²` kept instead of `b_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTridiagonal<F> {
    /// `a_0..a_n`.
    pub a: Vec<F>,
    /// `b_1²..b_n²`.
    pub b_sq: Vec<F>,
}

impl<F> ExactTridiagonal<F> {
    /// Floating-point coefficients; `b_n` is the principal square root.
    pub fn to_coeffs(&self, conv: impl Fn(&F) -> Complex64) -> TridiagonalCoeffs {
        TridiagonalCoeffs {
            a: self.a.iter().map(&conv).collect(),
            b: self.b_sq.iter().map(|b| conv(b).sqrt()).collect(),
        }
    }
}

fn factorial(n: usize) -> BigRational {
    (1..=n).fold(BigRational::one(), |acc, k| acc * BigRational::from_i64(k as i64))
}

/// `F(s) = cos(αs) − (u/2α) sin(αs)` with `α² = 1 − u²/4`, as a series in s
/// with coefficients in `Q[u]`. With `s = it` and `u = iμ̃` this is
/// `cosh(αt+γ)/α` at `𝒥 = 1`.
fn cosh_factor(len: usize) -> Series<Poly> {
    let alpha_sq = Poly::new(vec![BigRational::one(), BigRational::zero(), BigRational::new((-1).into(), 4.into())]);
    let u_half = Poly::var().scale(&BigRational::new(1.into(), 2.into()));
    let mut pow = Poly::one();
    let mut coeffs = vec![Poly::zero(); len];
    for k in 0..len.div_ceil(2) {
        let sign = if k % 2 == 0 { Poly::one() } else { -Poly::one() };
        let term = sign * pow.clone();
        if 2 * k < len {
            coeffs[2 * k] = term.scale(&factorial(2 * k).recip());
        }
        if 2 * k + 1 < len {
            coeffs[2 * k + 1] = -(u_half.clone() * term).scale(&factorial(2 * k + 1).recip());
        }
        pow = pow * alpha_sq.clone();
    }
    Series { coeffs }
}

/// `m̃_n` for `n = 0..=n_max` (index 0 holds the zero polynomial): the
/// scaled Taylor coefficients of the order-1/q autocorrelation, as exact
/// polynomials in `u = iμ̃` at `𝒥 = 1`.
pub fn moments_from_g(n_max: usize) -> Vec<Poly> {
    let log_f = cosh_factor(n_max + 1).log();
    (0..=n_max).map(|n| -log_f.coeffs[n].scale(&factorial(n))).collect()
}

/// Every monomial of `p` has the parity of `n`.
pub fn has_parity(p: &Poly, n: usize) -> bool {
    p.coeffs().iter().enumerate().all(|(k, c)| c.is_zero() || k % 2 == n % 2)
}

/// Full moments `m_0 = 1`, `m_n = (2/q) m̃_n(u)` at a given `u = iμ̃`.
pub fn large_q_moments(polys: &[Poly], q: &BigRational, u: &GaussianRational) -> Vec<GaussianRational> {
    let two_over_q = BigRational::from_i64(2) / q;
    let embed = |c: &BigRational| Complex::new(c.clone(), BigRational::zero());
    polys
        .iter()
        .enumerate()
        .map(|(n, p)| {
            if n == 0 {
                GaussianRational::one()
            } else {
                let v = p.eval(u, embed);
                Complex::new(v.re * &two_over_q, v.im * &two_over_q)
            }
        })
        .collect()
}

/// Moments → Lanczos coefficients via the `M_k^{(n)}`, `L_k^{(n)}` recursion.
/// Needs `m_0..m_{2n_max+1}` with `m_0 = 1`.
pub fn moments_to_tridiagonal<F: ExactDiv>(m: &[F], n_max: usize) -> Result<ExactTridiagonal<F>> {
    let need = 2 * n_max + 2;
    if m.len() < need {
        return Err(Error::Insufficient { needed: need, have: m.len() });
    }
    if !m[0].is_one() {
        return Err(Error::InvalidModel("moment sequence must start with m_0 = 1".into()));
    }
    let kmax = 2 * n_max + 1;
    let sgn = |k: usize| if k % 2 == 0 { F::one() } else { -F::one() };
    let mut mm: Vec<F> = (0..=kmax).map(|k| sgn(k) * m[k].clone()).collect();
    let mut ll: Vec<F> = (0..kmax).map(|k| sgn(k + 1) * m[k + 1].clone()).collect();
    let mut a = vec![-ll[0].clone()];
    let mut b_sq = Vec::new();
    for n in 1..=n_max {
        let denom_prev = mm[n - 1].clone();
        let lead = ll[n - 1].clone();
        let mut m_new = vec![F::zero(); kmax + 1];
        for k in n..=kmax - n {
            let ratio = mm[k].exact_div(&denom_prev).ok_or(Error::MomentDegeneracy { n, k: n - 1 })?;
            m_new[k] = ll[k].clone() - lead.clone() * ratio;
        }
        let denom = m_new[n].clone();
        let mut l_new = vec![F::zero(); kmax];
        for k in n..=kmax - n - 1 {
            let r1 = m_new[k + 1].exact_div(&denom).ok_or(Error::MomentDegeneracy { n, k: n })?;
            let r0 = mm[k].exact_div(&denom_prev).ok_or(Error::MomentDegeneracy { n, k: n - 1 })?;
            l_new[k] = r1 - r0;
        }
        b_sq.push(denom);
        a.push(-l_new[n].clone());
        mm = m_new;
        ll = l_new;
    }
    Ok(ExactTridiagonal { a, b_sq })
}

/// Power-series coefficients `m_0..m_{n_max}` of the continued fraction,
/// computed as `(Tⁿ)_{00}` for the chain with diagonal `a`, superdiagonal
/// `b²` and unit subdiagonal. Missing trailing `b²` are taken as zero.
pub fn tridiagonal_to_series<R: Ring>(a: &[R], b_sq: &[R], n_max: usize) -> Vec<R> {
    let len = a.len().min(n_max / 2 + 2).max(1);
    let coef_a = |k: usize| a.get(k).cloned().unwrap_or_else(R::zero);
    let coef_b = |k: usize| b_sq.get(k).cloned().unwrap_or_else(R::zero);
    let mut v = vec![R::zero(); len];
    v[0] = R::one();
    let mut out = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        out.push(v[0].clone());
        let mut next = vec![R::zero(); len];
        for k in 0..len {
            let mut acc = coef_a(k) * v[k].clone();
            if k + 1 < len {
                acc = acc + coef_b(k) * v[k + 1].clone();
            }
            if k > 0 {
                acc = acc + v[k - 1].clone();
            }
            next[k] = acc;
        }
        v = next;
    }
    out
}

/// Chain whose continued fraction generates `Σ m̃_{n+2} zⁿ`:
/// `a_k = (k+1)u`, `b_k² = k(k+1)`.
pub fn large_q_shifted_chain(n_max: usize) -> ExactTridiagonal<Poly> {
    ExactTridiagonal {
        a: (0..=n_max).map(|k| Poly::var().scale(&BigRational::from_i64(k as i64 + 1))).collect(),
        b_sq: (1..=n_max).map(|k| Poly::from_i64((k * (k + 1)) as i64)).collect(),
    }
}

/// Moments of the Meixner chain, from the exact series of
/// `φ₀(t) = sech^η(t) (1 + u tanh t)^{−η}`.
pub fn meixner_moments(u: &BigRational, eta: &BigRational, n_max: usize) -> Vec<GaussianRational> {
    let len = n_max + 1;
    let cosh = Series::from_fn(len, |k| if k % 2 == 0 { factorial(k).recip() } else { BigRational::zero() });
    let sinh = Series::from_fn(len, |k| if k % 2 == 1 { factorial(k).recip() } else { BigRational::zero() });
    let tanh = sinh.mul(&cosh.inverse());
    let mut one_plus = tanh.scale(u);
    one_plus.coeffs[0] = BigRational::one();
    let log_phi = cosh.log().add(&one_plus.log()).scale(&-eta.clone());
    let phi = log_phi.exp();
    // m_n = n! [tⁿ]φ₀ / iⁿ
    let minus_i_pow = |n: usize| -> GaussianRational {
        let (re, im) = match n % 4 {
            0 => (1, 0),
            1 => (0, -1),
            2 => (-1, 0),
            _ => (0, 1),
        };
        Complex::new(BigRational::from_i64(re), BigRational::from_i64(im))
    };
    (0..len)
        .map(|n| {
            let c = &phi.coeffs[n] * factorial(n);
            let z = minus_i_pow(n);
            Complex::new(&z.re * &c, &z.im * &c)
        })
        .collect()
}

/// Exact Meixner coefficients `a_n = iu(2n+η)`, `b_n² = (1−u²) n (n−1+η)`.
pub fn meixner_tridiagonal(u: &BigRational, eta: &BigRational, n_max: usize) -> ExactTridiagonal<GaussianRational> {
    let one = BigRational::one();
    ExactTridiagonal {
        a: (0..=n_max)
            .map(|n| Complex::new(BigRational::zero(), u * (BigRational::from_i64(2 * n as i64) + eta)))
            .collect(),
        b_sq: (1..=n_max)
            .map(|n| {
                let nn = BigRational::from_i64(n as i64);
                let v = (&one - u * u) * &nn * (&nn - &one + eta);
                Complex::new(v, BigRational::zero())
            })
            .collect(),
    }
}
