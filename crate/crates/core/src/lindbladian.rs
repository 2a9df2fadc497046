//! Lindbladian `𝓛 = 𝓛_H + 𝓛_D` of the SYK model with jump operators
//! `L_k = √μ ψ_k`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::krylov::Superoperator;
use crate::majorana::{DenseOperator, MajoranaString, OperatorVector, SykHamiltonian};

#[derive(Clone, Debug)]
pub struct DissipativeModel {
    pub hamiltonian: SykHamiltonian,
    pub mu: f64,
}

impl DissipativeModel {
    pub fn new(hamiltonian: SykHamiltonian, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidModel(format!("mu must be finite and non-negative, got {mu}")));
        }
        Ok(DissipativeModel { hamiltonian, mu })
    }

    pub fn n(&self) -> usize {
        self.hamiltonian.n
    }

    /// `μ̃ = μ q`.
    pub fn mu_tilde(&self) -> f64 {
        self.mu * self.hamiltonian.q as f64
    }

    fn check(&self, o: &OperatorVector) -> Result<()> {
        if o.n() != self.n() {
            return Err(Error::IncompatibleSpace { left: self.n(), right: o.n() });
        }
        Ok(())
    }

    /// Closed form: each string of size s is scaled by `iμs`.
    pub fn dissipator_apply(&self, o: &OperatorVector) -> Result<OperatorVector> {
        self.check(o)?;
        let terms = o.iter().map(|(s, c)| (s, c * Complex64::new(0.0, self.mu * s.size() as f64)));
        Ok(OperatorVector::from_terms(self.n(), terms).with_prune(o.prune_threshold()))
    }

    /// Literal jump-operator sum
    /// `−i Σ_k [∓ L_k† O L_k − ½{L_k†L_k, O}]`, lower sign for fermionic O.
    pub fn dissipator_oracle(&self, o: &OperatorVector) -> Result<OperatorVector> {
        self.check(o)?;
        let odd = o.parity().ok_or(Error::MixedParity)?;
        let n = self.n();
        let sign = if odd { -1.0 } else { 1.0 };
        let amp = Complex64::new((self.mu / 2.0).sqrt(), 0.0);
        let mut acc = OperatorVector::zero(n).with_prune(o.prune_threshold());
        for k in 0..n {
            let l = OperatorVector::basis(n, MajoranaString::single(k)).scaled(amp);
            let ld = l.adjoint();
            let sandwich = ld.mul(o)?.mul(&l)?;
            let ll = ld.mul(&l)?;
            let anti = ll.mul(o)?.add(&o.mul(&ll)?)?;
            acc.axpy(Complex64::new(sign, 0.0), &sandwich);
            acc.axpy(Complex64::new(-0.5, 0.0), &anti);
        }
        Ok(acc.scaled(Complex64::new(0.0, -1.0)))
    }

    pub fn liouvillian_apply(&self, o: &OperatorVector) -> Result<OperatorVector> {
        self.hamiltonian.liouvillian_apply(o)
    }

    pub fn lindbladian_apply(&self, o: &OperatorVector) -> Result<OperatorVector> {
        self.liouvillian_apply(o)?.add(&self.dissipator_apply(o)?)
    }

    pub fn lindbladian_apply_dense(&self, o: &DenseOperator) -> DenseOperator {
        let mut out = self.hamiltonian.liouvillian_apply_dense(o);
        if self.mu != 0.0 {
            let mu = self.mu;
            out.amps.par_iter_mut().zip(o.amps.par_iter()).enumerate().for_each(|(m, (y, x))| {
                *y += x * Complex64::new(0.0, mu * (m as u64).count_ones() as f64);
            });
        }
        out
    }

    /// Sparse-representation superoperator.
    pub fn sparse(&self) -> SparseLindbladian<'_> {
        SparseLindbladian(self)
    }

    /// Dense-representation superoperator for the Arnoldi hot path.
    pub fn dense(&self) -> DenseLindbladian<'_> {
        DenseLindbladian(self)
    }
}

pub struct SparseLindbladian<'a>(pub &'a DissipativeModel);

impl Superoperator<OperatorVector> for SparseLindbladian<'_> {
    fn apply(&self, v: &OperatorVector) -> OperatorVector {
        self.0.lindbladian_apply(v).expect("operator space checked at construction")
    }
}

pub struct DenseLindbladian<'a>(pub &'a DissipativeModel);

impl Superoperator<DenseOperator> for DenseLindbladian<'_> {
    fn apply(&self, v: &DenseOperator) -> DenseOperator {
        self.0.lindbladian_apply_dense(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorana::dense;
    use nalgebra::DMatrix;

    fn s(idx: &[usize]) -> MajoranaString {
        MajoranaString::from_indices(idx)
    }

    fn model(n: usize, mu: f64) -> DissipativeModel {
        DissipativeModel::new(SykHamiltonian::sample(n, 4, 1.0, 9).unwrap(), mu).unwrap()
    }

    #[test]
    fn dissipator_examples() {
        let m = model(6, 0.3);
        let i = Complex64::i();
        assert!(m.dissipator_apply(&OperatorVector::identity(6)).unwrap().is_empty());
        let g1 = OperatorVector::basis(6, s(&[1]));
        assert_eq!(m.dissipator_apply(&g1).unwrap(), g1.scaled(i * 0.3));
        let g123 = OperatorVector::basis(6, s(&[1, 2, 3]));
        let out = m.dissipator_apply(&g123).unwrap();
        assert!((out.get(s(&[1, 2, 3])) - i * 0.9).norm() < 1e-15);
    }

    #[test]
    fn oracle_cases() {
        let m = model(6, 0.3);
        let i = Complex64::i();
        let g1 = OperatorVector::basis(6, s(&[1]));
        assert!(m.dissipator_oracle(&g1).unwrap().sub(&g1.scaled(i * 0.3)).unwrap().norm() < 1e-12);
        let g12 = OperatorVector::basis(6, s(&[1, 2]));
        assert!(m.dissipator_oracle(&g12).unwrap().sub(&g12.scaled(i * 0.6)).unwrap().norm() < 1e-12);
        let half = OperatorVector::basis(6, s(&[0, 1, 2]));
        assert!(m.dissipator_oracle(&half).unwrap().sub(&half.scaled(i * 0.9)).unwrap().norm() < 1e-12);
        let mixed = g1.add(&g12).unwrap();
        assert!(matches!(m.dissipator_oracle(&mixed), Err(Error::MixedParity)));
    }

    #[test]
    fn stationarity_and_linearity() {
        let m = model(8, 0.2);
        assert!(m.lindbladian_apply(&OperatorVector::identity(8)).unwrap().is_empty());
        let a = OperatorVector::basis(8, s(&[0]));
        let b = OperatorVector::basis(8, s(&[2, 3, 5]));
        let (al, be) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let lhs = m.lindbladian_apply(&a.scaled(al).add(&b.scaled(be)).unwrap()).unwrap();
        let rhs = m
            .lindbladian_apply(&a)
            .unwrap()
            .scaled(al)
            .add(&m.lindbladian_apply(&b).unwrap().scaled(be))
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_and_zero_mu() {
        let m = model(6, 0.1);
        let h0 = DissipativeModel::new(m.hamiltonian.zeroed(), 0.1).unwrap();
        let g1 = OperatorVector::basis(6, s(&[1]));
        assert_eq!(h0.lindbladian_apply(&g1).unwrap(), g1.scaled(Complex64::new(0.0, 0.1)));
        let closed = DissipativeModel::new(m.hamiltonian.clone(), 0.0).unwrap();
        assert_eq!(closed.lindbladian_apply(&g1).unwrap(), closed.liouvillian_apply(&g1).unwrap());
    }

    /// Hilbert-space Lindbladian acting on the Jordan–Wigner matrix of O.
    fn dense_lindbladian(m: &DissipativeModel, o: &OperatorVector) -> OperatorVector {
        let n = m.n();
        let hm = dense::matrix(&m.hamiltonian.as_operator());
        let om = dense::matrix(o);
        let sign = if o.parity() == Some(true) { -1.0 } else { 1.0 };
        let mut out: DMatrix<Complex64> = &hm * &om - &om * &hm;
        for k in 0..n {
            let l = dense::gamma(n, k) * Complex64::new((m.mu / 2.0).sqrt(), 0.0);
            let ld = l.adjoint();
            let ll = &ld * &l;
            let d = (&ld * &om * &l) * Complex64::new(sign, 0.0) - (&ll * &om + &om * &ll) * Complex64::new(0.5, 0.0);
            out += d * Complex64::new(0.0, -1.0);
        }
        dense::decompose(n, &out, 1e-14)
    }

    #[test]
    fn matches_dense_vectorised_oracle() {
        let m = model(6, 0.1);
        let g1 = OperatorVector::basis(6, s(&[1]));
        let fast = m.lindbladian_apply(&g1).unwrap();
        assert!(fast.sub(&dense_lindbladian(&m, &g1)).unwrap().norm() < 1e-12);
        let dense_path = m.lindbladian_apply_dense(&g1.to_dense()).to_sparse(1e-14);
        assert!(fast.sub(&dense_path).unwrap().norm() < 1e-13);
    }

    #[test]
    fn rejects_negative_mu() {
        let h = SykHamiltonian::sample(6, 4, 1.0, 1).unwrap();
        assert!(DissipativeModel::new(h, -0.1).is_err());
    }
}
