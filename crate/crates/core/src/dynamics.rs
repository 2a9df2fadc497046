//! Evolution of Krylov-chain amplitudes
//! `∂ₜφ_n = i a_n φ_n − b_{n+1} φ_{n+1} + b_n φ_{n−1}`, `φ_n(0) = δ_{n0}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::krylov::{linear_fit, HessenbergMatrix, KrylovVector, LinearFit, TridiagonalCoeffs};

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub t: f64,
    pub phi: Vec<Complex64>,
}

impl ChainState {
    pub fn initial(n_trunc: usize) -> Self {
        let mut phi = vec![Complex64::default(); n_trunc + 1];
        phi[0] = Complex64::new(1.0, 0.0);
        ChainState { t: 0.0, phi }
    }

    pub fn n_trunc(&self) -> usize {
        self.phi.len() - 1
    }

    /// `|φ_{n_trunc}| / max_n |φ_n|`.
    pub fn spill(&self) -> f64 {
        spill(&self.phi)
    }
}

fn spill(phi: &[Complex64]) -> f64 {
    let top = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        0.0
    } else {
        phi[phi.len() - 1].norm() / top
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvolveOptions {
    /// Componentwise tolerance `atol + rtol |φ_n|`.
    pub rtol: f64,
    pub atol: f64,
    pub spill_tol: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { rtol: 1e-10, atol: 1e-14, spill_tol: 1e-8, max_steps: 50_000_000 }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Banded right-hand side of the chain equation.
struct Chain {
    diag: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl Chain {
    fn new(c: &TridiagonalCoeffs, n_trunc: usize) -> Result<Self> {
        if c.a.len() < n_trunc + 1 || c.b.len() < n_trunc {
            return Err(Error::Insufficient { needed: n_trunc + 1, have: c.a.len().min(c.b.len() + 1) });
        }
        Ok(Chain {
            diag: c.a[..=n_trunc].iter().map(|a| Complex64::i() * a).collect(),
            b: c.b[..n_trunc].to_vec(),
        })
    }

    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) {
        let n = y.len();
        for k in 0..n {
            let mut v = self.diag[k] * y[k];
            if k + 1 < n {
                v -= self.b[k] * y[k + 1];
            }
            if k > 0 {
                v += self.b[k - 1] * y[k - 1];
            }
            out[k] = v;
        }
    }

    /// Crude spectral radius bound for the initial step.
    fn radius(&self) -> f64 {
        let bmax = self.b.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let amax = self.diag.iter().map(|a| a.norm()).fold(0.0, f64::max);
        2.0 * bmax + amax
    }
}

/// Integrates from `φ_n = δ_{n0}` with an adaptive Dormand–Prince 5(4) pair,
/// landing exactly on each time in `t_grid` (increasing, from 0).
pub fn evolve_chain(
    c: &TridiagonalCoeffs,
    t_grid: &[f64],
    n_trunc: usize,
    opts: &EvolveOptions,
) -> Result<Vec<ChainState>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidModel("time grid must be non-decreasing and start at t >= 0".into()));
    }
    let chain = Chain::new(c, n_trunc)?;
    let n = n_trunc + 1;
    let mut y = ChainState::initial(n_trunc).phi;
    let mut t = 0.0;
    let mut h = (0.5 / chain.radius().max(1.0)).min(0.1);
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); n]; 7];
    let mut stage = vec![Complex64::default(); n];
    let mut y_new = vec![Complex64::default(); n];
    chain.rhs(&y, &mut k[0]);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut steps = 0usize;
    for &target in t_grid {
        while t < target {
            let last = t + h >= target;
            let dt = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (dt * A[s][j]);
                        }
                    }
                    stage[i] = acc;
                }
                chain.rhs(&stage, &mut k[s]);
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            // stage 7 is evaluated at the fifth-order solution (FSAL)
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = k[6][i] * E[6];
                for j in 0..6 {
                    if E[j] != 0.0 {
                        e += k[j][i] * E[j];
                    }
                }
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max((e * dt).norm() / scale);
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integrator(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
            }
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite error estimate at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + dt };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let spill = spill(&y);
                if spill > opts.spill_tol {
                    return Err(Error::Truncation { t, spill, n_trunc });
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = dt * factor;
            }
        }
        out.push(ChainState { t, phi: y.clone() });
    }
    Ok(out)
}

/// Runs [`evolve_chain`] with an automatic truncation: start at
/// `max(4ξ, 50)` (or 50 without ξ) and double on spill until `cap`.
pub fn evolve_chain_auto(
    coeffs: impl Fn(usize) -> TridiagonalCoeffs,
    t_grid: &[f64],
    xi: Option<f64>,
    cap: usize,
    opts: &EvolveOptions,
) -> Result<(usize, Vec<ChainState>)> {
    let mut n_trunc = match xi {
        Some(x) if x.is_finite() => ((4.0 * x).ceil() as usize).max(50),
        _ => 50,
    }
    .min(cap);
    loop {
        match evolve_chain(&coeffs(n_trunc), t_grid, n_trunc, opts) {
            Ok(states) => return Ok((n_trunc, states)),
            Err(Error::Truncation { t, spill, .. }) => {
                if n_trunc >= cap {
                    return Err(Error::Truncation { t, spill, n_trunc });
                }
                n_trunc = (2 * n_trunc).min(cap);
            }
            Err(e) => return Err(e),
        }
    }
}

/// `(K, variance, Z)` of the normalised distribution `|φ_n|²/Z`.
pub fn k_complexity_numeric(s: &ChainState) -> Result<(f64, f64, f64)> {
    let z: f64 = s.phi.iter().map(|p| p.norm_sqr()).sum();
    if !(z >= 1e-300) {
        return Err(Error::Underflow { z });
    }
    let k = s.phi.iter().enumerate().map(|(n, p)| n as f64 * p.norm_sqr()).sum::<f64>() / z;
    let var = s.phi.iter().enumerate().map(|(n, p)| (n as f64 - k).powi(2) * p.norm_sqr()).sum::<f64>() / z;
    Ok((k, var.max(0.0), z))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailFit {
    /// Decay length ξ of `|φ_n| ∝ e^{−n/ξ}`.
    pub xi: f64,
    pub fit: LinearFit,
}

/// Least-squares decay length of `|φ_n|` over `n ∈ [lo, hi]`. With `eta`
/// supplied, the factor `√((η)_n/n!) ∼ n^{(η−1)/2}` is divided out first.
pub fn stationary_tail_fit(s: &ChainState, lo: usize, hi: usize, eta: Option<f64>) -> Result<TailFit> {
    let hi = hi.min(s.n_trunc());
    if hi <= lo + 1 {
        return Err(Error::FitWindow { points: hi.saturating_sub(lo) + 1, required: 3 });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in lo..=hi {
        let mut v = s.phi[n].norm().ln();
        if let Some(eta) = eta {
            let nf = n as f64;
            v -= 0.5 * (ln_gamma(eta + nf) - ln_gamma(eta) - ln_gamma(nf + 1.0));
        }
        if ys.last().is_some_and(|&prev: &f64| !(v < prev)) || !v.is_finite() {
            return Err(Error::NonMonotoneTail { n });
        }
        xs.push(n as f64);
        ys.push(v);
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit { xi: -1.0 / fit.slope, fit })
}

/// Generator `G_{mn} = i^{n+1−m} h_{mn}` of the amplitudes on a Hessenberg
/// basis, reducing to the chain equation when h is tridiagonal.
pub fn hessenberg_generator(h: &HessenbergMatrix) -> DMatrix<Complex64> {
    let m = h.active();
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        let p = (c as i64 + 1 - r as i64).rem_euclid(4) as i32;
        m[(r, c)] * Complex64::i().powi(p)
    })
}

/// Amplitudes `φ(t) = exp(Gt) e₀` by dense matrix exponential.
pub fn evolve_hessenberg(h: &HessenbergMatrix, t: f64) -> Vec<Complex64> {
    let g = hessenberg_generator(h) * Complex64::new(t, 0.0);
    g.exp().column(0).iter().copied().collect()
}

/// K(t) measured on the Arnoldi basis and on a second (closed-system)
/// orthonormal basis, for the same evolved operator.
#[derive(Clone, Debug, Serialize)]
pub struct BasisComparison {
    pub t: Vec<f64>,
    pub k_arnoldi: Vec<f64>,
    pub k_closed: Vec<f64>,
}

pub fn compare_bases<V: KrylovVector>(
    h: &HessenbergMatrix,
    arnoldi_basis: &[V],
    closed_basis: &[V],
    t_grid: &[f64],
) -> Result<BasisComparison> {
    let mut k_arnoldi = Vec::new();
    let mut k_closed = Vec::new();
    for &t in t_grid {
        let phi = evolve_hessenberg(h, t);
        let sa = ChainState { t, phi: phi.clone() };
        k_arnoldi.push(k_complexity_numeric(&sa)?.0);
        // O(t) = Σ iⁿ φ_n V_n
        let mut o = arnoldi_basis[0].clone();
        o.scale(Complex64::default());
        for (n, (p, v)) in phi.iter().zip(arnoldi_basis).enumerate() {
            o.axpy(Complex64::i().powi(n as i32) * p, v);
        }
        let proj: Vec<Complex64> = closed_basis
            .iter()
            .enumerate()
            .map(|(n, w)| w.inner(&o) * Complex64::i().powi(-(n as i32)))
            .collect();
        k_closed.push(k_complexity_numeric(&ChainState { t, phi: proj })?.0);
    }
    Ok(BasisComparison { t: t_grid.to_vec(), k_arnoldi, k_closed })
}
