//! Arnoldi and Lanczos iteration over an abstract superoperator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::majorana::{DenseOperator, OperatorVector};

/// Vector space operations needed by the iteration.
pub trait KrylovVector: Clone {
    fn inner(&self, other: &Self) -> Complex64;
    fn axpy(&mut self, a: Complex64, x: &Self);
    fn scale(&mut self, a: Complex64);
    fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

/// Linear map on a [`KrylovVector`] space.
pub trait Superoperator<V> {
    fn apply(&self, v: &V) -> V;
}

impl<V, F: Fn(&V) -> V> Superoperator<V> for F {
    fn apply(&self, v: &V) -> V {
        self(v)
    }
}

impl KrylovVector for Vec<Complex64> {
    fn inner(&self, other: &Self) -> Complex64 {
        self.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }
    fn axpy(&mut self, a: Complex64, x: &Self) {
        self.iter_mut().zip(x).for_each(|(y, xv)| *y += a * xv);
    }
    fn scale(&mut self, a: Complex64) {
        self.iter_mut().for_each(|y| *y *= a);
    }
}

impl KrylovVector for OperatorVector {
    fn inner(&self, other: &Self) -> Complex64 {
        self.inner_product(other).expect("Krylov vectors share one operator space")
    }
    fn axpy(&mut self, a: Complex64, x: &Self) {
        OperatorVector::axpy(self, a, x);
    }
    fn scale(&mut self, a: Complex64) {
        *self = self.scaled(a);
    }
    fn norm(&self) -> f64 {
        OperatorVector::norm(self)
    }
}

impl KrylovVector for DenseOperator {
    fn inner(&self, other: &Self) -> Complex64 {
        DenseOperator::inner(self, other)
    }
    fn axpy(&mut self, a: Complex64, x: &Self) {
        DenseOperator::axpy(self, a, x);
    }
    fn scale(&mut self, a: Complex64) {
        DenseOperator::scale(self, a);
    }
    fn norm(&self) -> f64 {
        DenseOperator::norm(self)
    }
}

/// Lanczos coefficients; `b[k]` holds `b_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TridiagonalCoeffs {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl TridiagonalCoeffs {
    pub fn new(a: Vec<Complex64>, b: Vec<Complex64>) -> Result<Self> {
        if a.len() != b.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "tridiagonal lengths inconsistent: |a| = {}, |b| = {}",
                a.len(),
                b.len()
            )));
        }
        Ok(TridiagonalCoeffs { a, b })
    }

    /// Real chain from closures `a(n)`, `b(n)` for `n ≤ n_max`.
    pub fn from_fn(n_max: usize, a: impl Fn(usize) -> Complex64, b: impl Fn(usize) -> Complex64) -> Self {
        TridiagonalCoeffs { a: (0..=n_max).map(a).collect(), b: (1..=n_max).map(b).collect() }
    }

    /// Largest n with coefficients.
    pub fn n_max(&self) -> usize {
        self.b.len()
    }

    /// `b_n`, for `n ≥ 1`.
    pub fn b_n(&self, n: usize) -> Complex64 {
        self.b[n - 1]
    }
}

#[derive(Clone, Debug)]
pub struct HessenbergMatrix {
    /// `(n_max+1)×(n_max+1)`, zero below the first subdiagonal.
    pub h: DMatrix<Complex64>,
    /// Number of Krylov vectors actually produced.
    pub basis_dim: usize,
    /// Norm of the residual left after the last column.
    pub residual: f64,
    pub reorth: bool,
    /// Column at which the iteration closed early, if it did.
    pub breakdown: Option<usize>,
}

/// Result of a least-squares line fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::FitWindow { points: n, required: 2 });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitWindow { points: 1, required: 2 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { slope, intercept, r2, points: n })
}

impl HessenbergMatrix {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.h[(m, n)]
    }

    /// `h_{n,n}` for the computed columns.
    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.basis_dim).map(|n| self.h[(n, n)]).collect()
    }

    /// `h_{n+1,n}`.
    pub fn subdiagonal(&self) -> Vec<Complex64> {
        (1..self.basis_dim).map(|n| self.h[(n, n - 1)]).collect()
    }

    /// `h_{n,n+1}`.
    pub fn superdiagonal(&self) -> Vec<Complex64> {
        (1..self.basis_dim).map(|n| self.h[(n - 1, n)]).collect()
    }

    /// `ε_n` for `n = 1..basis_dim`, with
    /// `ε_n² = |h_{n−1,n} − h_{n,n−1}|² + Σ_{k<n−1} |h_{k,n}|²`.
    pub fn hessenberg_error(&self) -> Vec<f64> {
        (1..self.basis_dim)
            .map(|n| {
                let d = (self.h[(n - 1, n)] - self.h[(n, n - 1)]).norm_sqr();
                let rest: f64 = (0..n.saturating_sub(1)).map(|k| self.h[(k, n)].norm_sqr()).sum();
                (d + rest).sqrt()
            })
            .collect()
    }

    /// Least-squares fit of `Im h_{n,n}` against n over `n ∈ [lo, hi]`.
    pub fn diagonal_slope_fit(&self, lo: usize, hi: usize, min_points: usize) -> Result<LinearFit> {
        let hi = hi.min(self.basis_dim.saturating_sub(1));
        let ns: Vec<usize> = (lo..=hi).collect();
        if ns.len() < min_points {
            return Err(Error::FitWindow { points: ns.len(), required: min_points });
        }
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| self.h[(n, n)].im).collect();
        linear_fit(&xs, &ys)
    }

    /// Default fit window `[1, floor(N/q)]`.
    pub fn default_window(n: usize, q: usize) -> (usize, usize) {
        (1, n / q)
    }

    pub fn tridiagonal(&self) -> TridiagonalCoeffs {
        TridiagonalCoeffs { a: self.diagonal(), b: self.subdiagonal() }
    }

    /// Square block over the computed basis.
    pub fn active(&self) -> DMatrix<Complex64> {
        self.h.view((0, 0), (self.basis_dim, self.basis_dim)).into_owned()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ArnoldiOptions {
    pub n_max: usize,
    pub reorth: bool,
    /// Breakdown when `h_{k,k−1} < breakdown_rel · ‖𝓛O₀‖`.
    pub breakdown_rel: f64,
}

impl ArnoldiOptions {
    pub fn new(n_max: usize) -> Self {
        ArnoldiOptions { n_max, reorth: true, breakdown_rel: 1e-10 }
    }
}

/// Arnoldi iteration from a unit-norm start vector.
pub fn arnoldi<V: KrylovVector, S: Superoperator<V> + ?Sized>(
    op: &S,
    o0: &V,
    opts: ArnoldiOptions,
) -> Result<(HessenbergMatrix, Vec<V>)> {
    let norm0 = o0.norm();
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm: norm0 });
    }
    let dim = opts.n_max + 1;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let mut basis = vec![o0.clone()];
    let mut breakdown = None;
    let mut residual = 0.0;
    let mut scale = 0.0;
    for col in 0..dim {
        let mut u = op.apply(&basis[col]);
        if col == 0 {
            scale = u.norm();
        }
        let passes = if opts.reorth { 2 } else { 1 };
        for _ in 0..passes {
            for (j, v) in basis.iter().enumerate() {
                let c = v.inner(&u);
                h[(j, col)] += c;
                u.axpy(-c, v);
            }
        }
        let beta = u.norm();
        residual = beta;
        if col + 1 == dim {
            break;
        }
        if beta <= opts.breakdown_rel * scale || beta == 0.0 {
            breakdown = Some(col + 1);
            break;
        }
        h[(col + 1, col)] = Complex64::new(beta, 0.0);
        u.scale(Complex64::new(1.0 / beta, 0.0));
        basis.push(u);
    }
    let basis_dim = basis.len();
    Ok((HessenbergMatrix { h, basis_dim, residual, reorth: opts.reorth, breakdown }, basis))
}

/// Largest `|(V_i|V_j) − δ_ij|`.
pub fn orthonormality_defect<V: KrylovVector>(basis: &[V]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - target).norm());
        }
    }
    worst
}

/// Output of [`lanczos`].
#[derive(Clone, Debug)]
pub struct LanczosOutput<V> {
    pub coeffs: TridiagonalCoeffs,
    pub basis: Vec<V>,
    pub breakdown: Option<usize>,
}

/// Lanczos for a superoperator Hermitian under the vector inner product,
/// run as fully reorthogonalised Arnoldi with a symmetry check per column.
pub fn lanczos<V: KrylovVector, S: Superoperator<V> + ?Sized>(
    op: &S,
    o0: &V,
    n_max: usize,
    tol: f64,
) -> Result<LanczosOutput<V>> {
    let (hm, basis) = arnoldi(op, o0, ArnoldiOptions::new(n_max))?;
    let scale = (0..hm.basis_dim)
        .flat_map(|n| (0..hm.basis_dim).map(move |m| (m, n)))
        .map(|(m, n)| hm.h[(m, n)].norm())
        .fold(1.0, f64::max);
    for n in 0..hm.basis_dim {
        let mut asym = hm.h[(n, n)].im.abs();
        if n > 0 {
            asym = asym.max((hm.h[(n - 1, n)] - hm.h[(n, n - 1)].conj()).norm());
        }
        for k in 0..n.saturating_sub(1) {
            asym = asym.max(hm.h[(k, n)].norm());
        }
        if asym > tol * scale {
            return Err(Error::NotHermitian { step: n, asymmetry: asym });
        }
    }
    Ok(LanczosOutput { coeffs: hm.tridiagonal(), basis, breakdown: hm.breakdown })
}
