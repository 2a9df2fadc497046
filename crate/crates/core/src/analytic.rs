//! Closed-form large-q results: the autocorrelation `g(t)`, the exactly
//! solvable Meixner chain and continuum saturation estimates.

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::krylov::TridiagonalCoeffs;

/// Numerically stable `ln cosh x`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `g(t) = ln[α² / (𝒥² cosh²(αt+γ))]` with `α = √((μ̃/2)² + 𝒥²)` and
/// `γ = asinh(μ̃/2𝒥)`.
pub fn g_function(t: f64, j_script: f64, mu_tilde: f64) -> f64 {
    let alpha = ((mu_tilde / 2.0).powi(2) + j_script * j_script).sqrt();
    let gamma = (mu_tilde / (2.0 * j_script)).asinh();
    2.0 * (alpha / j_script).ln() - 2.0 * ln_cosh(alpha * t + gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MeixnerParams {
    pub u: f64,
    pub eta: f64,
}

impl MeixnerParams {
    pub fn new(u: f64, eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidModel(format!("u must lie in [0, 1), got {u}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidModel(format!("eta must be positive, got {eta}")));
        }
        Ok(MeixnerParams { u, eta })
    }

    /// Large-q SYK identification `η = 2/q`, `u = μ̃/2`.
    pub fn from_syk(q: usize, mu_tilde: f64) -> Result<Self> {
        Self::new(mu_tilde / 2.0, 2.0 / q as f64)
    }

    /// Closed-system growth rate `α = 1 − u²`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.u * self.u
    }

    pub fn chi_mu(&self) -> f64 {
        2.0 * self.u
    }

    pub fn continuum(&self) -> ContinuumParams {
        ContinuumParams { alpha: self.alpha(), chi_mu: self.chi_mu() }
    }

    /// `a_n = iu(2n+η)`, `b_n = √((1−u²) n (n−1+η))`.
    pub fn coeffs(&self, n_max: usize) -> TridiagonalCoeffs {
        let (u, eta) = (self.u, self.eta);
        TridiagonalCoeffs::from_fn(
            n_max,
            |n| Complex64::new(0.0, u * (2.0 * n as f64 + eta)),
            |n| Complex64::new(((1.0 - u * u) * n as f64 * (n as f64 - 1.0 + eta)).sqrt(), 0.0),
        )
    }

    /// `e^{y₀} = (1−u²) (tanh t / (1 + u tanh t))²`.
    pub fn e_y0(&self, t: f64) -> f64 {
        let th = t.tanh();
        self.alpha() * (th / (1.0 + self.u * th)).powi(2)
    }
}

/// `ln φ_n(t)`; the amplitude itself is positive.
pub fn meixner_ln_amplitude(n: usize, t: f64, p: &MeixnerParams) -> f64 {
    let th = t.tanh();
    let nf = n as f64;
    let base = -p.eta * ln_cosh(t) - p.eta * (1.0 + p.u * th).ln();
    let poch = 0.5 * (ln_gamma(p.eta + nf) - ln_gamma(p.eta) - ln_gamma(nf + 1.0));
    let geo = if n == 0 { 0.0 } else { nf * (0.5 * p.alpha().ln() + (th / (1.0 + p.u * th)).ln()) };
    base + poch + geo
}

/// Exact chain amplitude `φ_n(t)`.
pub fn meixner_wavefunction(n: usize, t: f64, p: &MeixnerParams) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(if n == 0 { 1.0 } else { 0.0 }, 0.0);
    }
    Complex64::new(meixner_ln_amplitude(n, t, p).exp(), 0.0)
}

/// `1 + 2u tanh t − (1−2u²)tanh²t`, written as `sech²t + 2u tanh t (1 + u tanh t)`
/// to keep relative accuracy at large t.
fn denom(t: f64, u: f64) -> f64 {
    let th = t.tanh();
    (1.0 / t.cosh()).powi(2) + 2.0 * u * th * (1.0 + u * th)
}

/// `K(t) = η(1−u²)tanh²t / (1 + 2u tanh t − (1−2u²)tanh²t)`.
pub fn k_complexity_exact(t: f64, p: &MeixnerParams) -> f64 {
    let th = t.tanh();
    p.eta * p.alpha() * th * th / denom(t, p.u)
}

/// Normalised position variance of the exact wavefunction.
pub fn variance_exact(t: f64, p: &MeixnerParams) -> f64 {
    let th = t.tanh();
    let d = denom(t, p.u);
    p.eta * p.alpha() * th * th * (p.u * th + 1.0).powi(2) / (d * d)
}

/// K from the generating function: `∂_y ln (1−e^y)^{−η}` at `y₀`.
pub fn k_from_generating_function(t: f64, p: &MeixnerParams) -> f64 {
    let x = p.e_y0(t);
    p.eta * x / (1.0 - x)
}

/// Variance from the generating function: `∂_y² ln (1−e^y)^{−η}` at `y₀`.
pub fn variance_from_generating_function(t: f64, p: &MeixnerParams) -> f64 {
    let x = p.e_y0(t);
    p.eta * x / (1.0 - x).powi(2)
}

/// `K(∞) = η/(2u) − η/2`.
pub fn k_infinity(p: &MeixnerParams) -> Result<f64> {
    if p.u == 0.0 {
        return Err(Error::UndefinedSaturation);
    }
    Ok(p.eta / (2.0 * p.u) - p.eta / 2.0)
}

/// Exact late-time variance `η(1−u²)/(4u²)`.
pub fn variance_plateau(p: &MeixnerParams) -> Result<f64> {
    if p.u == 0.0 {
        return Err(Error::UndefinedSaturation);
    }
    Ok(p.eta * p.alpha() / (4.0 * p.u * p.u))
}

/// Leading small-u form `η/(4u²)` of the variance plateau.
pub fn variance_plateau_leading(p: &MeixnerParams) -> Result<f64> {
    if p.u == 0.0 {
        return Err(Error::UndefinedSaturation);
    }
    Ok(p.eta / (4.0 * p.u * p.u))
}

/// Stationary inverse tail width `ln((1+u)/√(1−u²))`.
pub fn tail_decay_rate(p: &MeixnerParams) -> f64 {
    ((1.0 + p.u) / p.alpha().sqrt()).ln()
}

/// `(K, variance, Z)` of `|φ_n|²` by direct summation over `n ≤ n_max`,
/// accumulated relative to the largest term.
pub fn direct_summation(t: f64, p: &MeixnerParams, n_max: usize) -> (f64, f64, f64) {
    let ln: Vec<f64> = (0..=n_max).map(|n| 2.0 * meixner_ln_amplitude(n, t, p)).collect();
    let top = ln.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let k = w.iter().enumerate().map(|(n, x)| n as f64 * x).sum::<f64>() / z;
    let var = w.iter().enumerate().map(|(n, x)| (n as f64 - k).powi(2) * x).sum::<f64>() / z;
    (k, var, z * top.exp())
}

/// Time at which the exact K(t) reaches half its plateau, by bisection.
pub fn half_plateau_time(p: &MeixnerParams) -> Result<f64> {
    let target = 0.5 * k_infinity(p)?;
    let (mut lo, mut hi) = (0.0, 1.0);
    while k_complexity_exact(hi, p) < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Integrator("half-plateau time not bracketed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k_complexity_exact(mid, p) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Crossover estimate `ln(2/u)/2` from equating `u` with `2e^{−2t}`.
pub fn crossover_estimate(u: f64) -> f64 {
    (2.0 / u).ln() / 2.0
}

/// Continuum description of a chain with `b_n ≈ αn`, `Im a_n ≈ χμ n`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ContinuumParams {
    pub alpha: f64,
    pub chi_mu: f64,
}

impl ContinuumParams {
    pub fn new(alpha: f64, chi_mu: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(chi_mu >= 0.0) {
            return Err(Error::InvalidModel(format!("need alpha > 0 and chi_mu >= 0, got {alpha}, {chi_mu}")));
        }
        Ok(ContinuumParams { alpha, chi_mu })
    }

    /// Stationary tail width `ξ = 2α/(χμ)`.
    pub fn xi(&self) -> Result<f64> {
        if self.chi_mu == 0.0 {
            return Err(Error::UndefinedSaturation);
        }
        Ok(2.0 * self.alpha / self.chi_mu)
    }

    /// `t* = ln(2α/χμ)/(2α)`.
    pub fn t_star(&self) -> Result<f64> {
        Ok(self.xi()?.ln() / (2.0 * self.alpha))
    }

    /// Piecewise reference curve: `e^{2αt}` before `t*`, `ξ` after.
    pub fn prediction(&self, t: f64) -> f64 {
        let growth = (2.0 * self.alpha * t).exp();
        match self.xi() {
            Ok(xi) => growth.min(xi),
            Err(_) => growth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(u: f64, eta: f64) -> MeixnerParams {
        MeixnerParams::new(u, eta).unwrap()
    }

    #[test]
    fn g_basics() {
        for &(j, mu) in &[(1.0, 0.0), (0.7, 0.3), (1.0, 2.0)] {
            assert!(g_function(0.0, j, mu).abs() < 1e-14);
        }
        for &t in &[0.3, 1.0, 4.0, 40.0] {
            let sech = 1.0 / f64::cosh(0.8 * t);
            if sech > 0.0 {
                assert_relative_eq!(g_function(t, 0.8, 0.0), 2.0 * sech.ln(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn wavefunction_limits() {
        let q = p(0.2, 1.5);
        assert_eq!(meixner_wavefunction(0, 0.0, &q).re, 1.0);
        assert_eq!(meixner_wavefunction(3, 0.0, &q).re, 0.0);
        let closed = p(0.0, 1.0);
        for &t in &[0.2f64, 1.3] {
            for n in 0..6 {
                let expect = t.tanh().powi(n as i32) / t.cosh();
                assert_relative_eq!(meixner_wavefunction(n, t, &closed).re, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn k_and_variance_closed_forms() {
        for &t in &[0.0f64, 0.5, 2.0, 4.0] {
            let closed = p(0.0, 1.5);
            assert_relative_eq!(k_complexity_exact(t, &closed), 1.5 * t.sinh().powi(2), max_relative = 1e-10, epsilon = 1e-15);
        }
        let q = p(0.05, 1.5);
        assert_relative_eq!(k_complexity_exact(30.0, &q), k_infinity(&q).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(variance_exact(30.0, &q), variance_plateau(&q).unwrap(), max_relative = 1e-12);
        let lead = variance_plateau_leading(&q).unwrap();
        assert_relative_eq!((lead - variance_plateau(&q).unwrap()) / lead, q.u * q.u, max_relative = 1e-12);
        assert_eq!(variance_exact(0.0, &q), 0.0);
    }

    #[test]
    fn generating_function_matches_closed_form() {
        for &u in &[0.0, 0.01, 0.3, 0.9] {
            for &eta in &[0.5, 1.0, 2.5] {
                for &t in &[0.1, 0.7, 2.0, 5.0] {
                    let q = p(u, eta);
                    assert_relative_eq!(k_from_generating_function(t, &q), k_complexity_exact(t, &q), max_relative = 1e-12);
                    assert_relative_eq!(
                        variance_from_generating_function(t, &q),
                        variance_exact(t, &q),
                        max_relative = 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn direct_summation_oracle() {
        let q = p(0.05, 1.5);
        for &t in &[0.5, 2.0, 10.0] {
            let (k, var, _) = direct_summation(t, &q, 10_000);
            assert_relative_eq!(k, k_complexity_exact(t, &q), max_relative = 1e-8);
            assert_relative_eq!(var, variance_exact(t, &q), max_relative = 1e-8);
        }
    }

    #[test]
    fn monotone_k() {
        let q = p(0.1, 1.5);
        let mut last = 0.0;
        for i in 0..400 {
            let k = k_complexity_exact(i as f64 * 0.05, &q);
            assert!(k >= last - 1e-15);
            last = k;
        }
    }

    #[test]
    fn continuum() {
        let c = ContinuumParams::new(1.0, 0.02).unwrap();
        assert_relative_eq!(c.xi().unwrap(), 100.0, max_relative = 1e-14);
        assert_relative_eq!(c.t_star().unwrap(), 100f64.ln() / 2.0, max_relative = 1e-14);
        let c0 = ContinuumParams::new(1.0, 0.0).unwrap();
        assert!(matches!(c0.xi(), Err(Error::UndefinedSaturation)));
        assert_relative_eq!(c0.prediction(3.0), 6f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn half_plateau_vs_estimate() {
        let q = p(0.1, 1.5);
        let t = half_plateau_time(&q).unwrap();
        assert!((t - crossover_estimate(0.1)).abs() < 1.0, "t = {t}");
    }
}
