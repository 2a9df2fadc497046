//! Finite-N Majorana-string algebra.
//!
//! Strings use the normalisation `γᵢ = √2 ψᵢ`, so `γᵢ² = 1` and distinct
//! strings are orthonormal under `(A|B) = Tr[A†B]/Tr[1]`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PRUNE: f64 = 1e-14;

/// Largest supported fermion count for bitmask strings.
pub const MAX_N: usize = 64;

/// Product of distinct Majoranas in ascending index order, encoded as a mask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MajoranaString(pub u64);

impl MajoranaString {
    pub const IDENTITY: MajoranaString = MajoranaString(0);

    pub fn single(i: usize) -> Self {
        MajoranaString(1u64 << i)
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        MajoranaString(idx.iter().fold(0u64, |m, &i| m | (1u64 << i)))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_odd(self) -> bool {
        self.0.count_ones() & 1 == 1
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn indices(self) -> Vec<usize> {
        (0..64).filter(|&i| self.contains(i)).collect()
    }

    /// `γ_A γ_B = phase · γ_{A⊕B}`.
    pub fn multiply(self, other: MajoranaString) -> (f64, MajoranaString) {
        (product_sign(self.0, other.0), MajoranaString(self.0 ^ other.0))
    }

    /// Sign picked up by the adjoint: `γ_S† = (−1)^{s(s−1)/2} γ_S`.
    pub fn adjoint_sign(self) -> f64 {
        let s = self.size();
        if (s * (s.saturating_sub(1)) / 2) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `[γ_A, γ_B] = c · γ_{A⊕B}`, with `c ∈ {0, ±2}`.
    pub fn commutator(self, other: MajoranaString) -> (f64, MajoranaString) {
        let sab = product_sign(self.0, other.0);
        let sba = product_sign(other.0, self.0);
        (sab - sba, MajoranaString(self.0 ^ other.0))
    }
}

impl fmt::Debug for MajoranaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "γ{:?}", self.indices())
    }
}

/// Sign of reordering `γ_A γ_B` into ascending order: the parity of pairs
/// `(a, b)` with `a ∈ A`, `b ∈ B`, `a > b`.
#[inline]
pub fn product_sign(a: u64, b: u64) -> f64 {
    let mut swaps = 0u32;
    let mut rest = a;
    while rest != 0 {
        let i = rest.trailing_zeros();
        swaps += (b & ((1u64 << i) - 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sparse operator expanded on Majorana strings.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorVector {
    n: usize,
    terms: BTreeMap<MajoranaString, Complex64>,
    prune: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonTerm {
    mask: String,
    amplitude: [f64; 2],
}

impl OperatorVector {
    pub fn zero(n: usize) -> Self {
        OperatorVector { n, terms: BTreeMap::new(), prune: DEFAULT_PRUNE }
    }

    pub fn basis(n: usize, s: MajoranaString) -> Self {
        let mut v = Self::zero(n);
        v.terms.insert(s, Complex64::new(1.0, 0.0));
        v
    }

    pub fn identity(n: usize) -> Self {
        Self::basis(n, MajoranaString::IDENTITY)
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MajoranaString, Complex64)>) -> Self {
        let mut v = Self::zero(n);
        for (s, c) in terms {
            v.add_term(s, c);
        }
        v.prune_small();
        v
    }

    pub fn with_prune(mut self, threshold: f64) -> Self {
        self.prune = threshold;
        self.prune_small();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, s: MajoranaString) -> Complex64 {
        self.terms.get(&s).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MajoranaString, Complex64)> + '_ {
        self.terms.iter().map(|(&s, &c)| (s, c))
    }

    /// Accumulates without pruning; call [`prune_small`](Self::prune_small) afterwards.
    pub fn add_term(&mut self, s: MajoranaString, c: Complex64) {
        *self.terms.entry(s).or_default() += c;
    }

    pub fn prune_small(&mut self) {
        let thr = self.prune;
        self.terms.retain(|_, c| c.norm() >= thr);
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::IncompatibleSpace { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// `(self|other) = Σ conj(self[m]) other[m]`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check(other)?;
        let (small, large, flip) =
            if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = Complex64::default();
        for (s, &c) in &small.terms {
            if let Some(&d) = large.terms.get(s) {
                acc += if flip { d.conj() * c } else { c.conj() * d };
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut v = self.clone();
        v.terms.values_mut().for_each(|c| *c *= a);
        v.prune_small();
        v
    }

    /// `self + a·x`.
    pub fn axpy(&mut self, a: Complex64, x: &Self) {
        for (&s, &c) in &x.terms {
            self.add_term(s, a * c);
        }
        self.prune_small();
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut v = self.clone();
        v.axpy(Complex64::new(1.0, 0.0), other);
        Ok(v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut v = self.clone();
        v.axpy(Complex64::new(-1.0, 0.0), other);
        Ok(v)
    }

    pub fn adjoint(&self) -> Self {
        let terms = self.terms.iter().map(|(&s, &c)| (s, c.conj() * s.adjoint_sign())).collect();
        OperatorVector { n: self.n, terms, prune: self.prune }
    }

    /// Full operator product, `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zero(self.n).with_prune(self.prune);
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &other.terms {
                let (sg, c) = a.multiply(b);
                out.add_term(c, ca * cb * sg);
            }
        }
        out.prune_small();
        Ok(out)
    }

    /// Splits into (even, odd) fermion-parity components.
    pub fn split_parity(&self) -> (Self, Self) {
        let mut even = Self::zero(self.n).with_prune(self.prune);
        let mut odd = even.clone();
        for (&s, &c) in &self.terms {
            if s.is_odd() {
                odd.terms.insert(s, c);
            } else {
                even.terms.insert(s, c);
            }
        }
        (even, odd)
    }

    /// `Some(true)` for purely odd, `Some(false)` for purely even, `None`
    /// when mixed. The zero vector counts as even.
    pub fn parity(&self) -> Option<bool> {
        let mut it = self.terms.keys().map(|s| s.is_odd());
        let first = it.next().unwrap_or(false);
        it.all(|p| p == first).then_some(first)
    }

    /// Squared weight per operator size.
    pub fn size_distribution(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (s, c) in self.iter() {
            *out.entry(s.size()).or_insert(0.0) += c.norm_sqr();
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (s, c) in self.iter() {
            let t = JsonTerm { mask: format!("{:#x}", s.0), amplitude: [c.re, c.im] };
            out.push_str(&serde_json::to_string(&t).expect("plain struct serialises"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(n: usize, text: &str) -> Result<Self> {
        let mut v = Self::zero(n);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let t: JsonTerm = serde_json::from_str(line)?;
            let mask = u64::from_str_radix(t.mask.trim_start_matches("0x"), 16)
                .map_err(|e| Error::InvalidModel(format!("bad mask {}: {e}", t.mask)))?;
            if n < 64 && mask >> n != 0 {
                return Err(Error::InvalidModel(format!("mask {} exceeds N = {n}", t.mask)));
            }
            v.add_term(MajoranaString(mask), Complex64::new(t.amplitude[0], t.amplitude[1]));
        }
        Ok(v)
    }

    pub fn to_dense(&self) -> DenseOperator {
        let mut d = DenseOperator::zero(self.n);
        for (s, c) in self.iter() {
            d.amps[s.0 as usize] = c;
        }
        d
    }
}

/// Operator stored as a full `2^N` amplitude array indexed by mask. Used on
/// the finite-N Arnoldi hot path.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub n: usize,
    pub amps: Vec<Complex64>,
}

impl DenseOperator {
    pub fn zero(n: usize) -> Self {
        assert!(n <= 30, "dense operator space too large for N = {n}");
        DenseOperator { n, amps: vec![Complex64::default(); 1usize << n] }
    }

    pub fn basis(n: usize, s: MajoranaString) -> Self {
        let mut d = Self::zero(n);
        d.amps[s.0 as usize] = Complex64::new(1.0, 0.0);
        d
    }

    pub fn to_sparse(&self, prune: f64) -> OperatorVector {
        let terms = self
            .amps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() >= prune)
            .map(|(m, &c)| (MajoranaString(m as u64), c));
        OperatorVector::from_terms(self.n, terms).with_prune(prune)
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.par_iter().zip(other.amps.par_iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.amps.par_iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn axpy(&mut self, a: Complex64, x: &Self) {
        self.amps.par_iter_mut().zip(x.amps.par_iter()).for_each(|(y, xv)| *y += a * xv);
    }

    pub fn scale(&mut self, a: Complex64) {
        self.amps.par_iter_mut().for_each(|y| *y *= a);
    }

    pub fn size_distribution(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (m, c) in self.amps.iter().enumerate() {
            if c.norm_sqr() > 0.0 {
                *out.entry((m as u64).count_ones() as usize).or_insert(0.0) += c.norm_sqr();
            }
        }
        out
    }
}

/// Random q-body SYK Hamiltonian `H = i^{q/2} Σ J_A ψ_A`.
#[derive(Clone, Debug)]
pub struct SykHamiltonian {
    pub n: usize,
    pub q: usize,
    pub j: f64,
    pub seed: u64,
    /// Couplings `J_A` in lexicographic subset order.
    pub couplings: Vec<(MajoranaString, f64)>,
}

/// Name of the generator used by [`SykHamiltonian::sample`], recorded in outputs.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha), seed_from_u64, standard normal via rand_distr, subsets in lexicographic order";

pub fn validate_model(n: usize, q: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidModel(format!("N must be even and positive, got {n}")));
    }
    if q == 0 || q % 2 == 1 {
        return Err(Error::InvalidModel(format!("q must be even and positive, got {q}")));
    }
    if q > n {
        return Err(Error::InvalidModel(format!("q = {q} exceeds N = {n}")));
    }
    if n > MAX_N {
        return Err(Error::InvalidModel(format!("N = {n} exceeds bitmask width {MAX_N}")));
    }
    Ok(())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<MajoranaString> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(MajoranaString::from_indices(&idx));
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

impl SykHamiltonian {
    pub fn sample(n: usize, q: usize, j: f64, seed: u64) -> Result<Self> {
        validate_model(n, q)?;
        if !j.is_finite() {
            return Err(Error::InvalidModel(format!("coupling J must be finite, got {j}")));
        }
        let var = Self::coupling_variance(n, q, j);
        let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::InvalidModel(e.to_string()))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let couplings = subsets(n, q).into_iter().map(|s| (s, normal.sample(&mut rng))).collect();
        Ok(SykHamiltonian { n, q, j, seed, couplings })
    }

    /// Target `⟨J_A²⟩ = (q−1)! J² / N^{q−1}`.
    pub fn coupling_variance(n: usize, q: usize, j: f64) -> f64 {
        factorial(q - 1) * j * j / (n as f64).powi(q as i32 - 1)
    }

    /// `𝒥² = 2^{1−q} q J²`.
    pub fn script_j_sq(&self) -> f64 {
        2f64.powi(1 - self.q as i32) * self.q as f64 * self.j * self.j
    }

    /// Coefficient `i^{q/2} 2^{−q/2}` turning `J_A` into the γ-string amplitude.
    pub fn prefactor(&self) -> Complex64 {
        Complex64::i().powi((self.q / 2) as i32) * 2f64.powf(-(self.q as f64) / 2.0)
    }

    /// Same realisation with every coupling set to zero.
    pub fn zeroed(&self) -> Self {
        let mut h = self.clone();
        h.couplings.iter_mut().for_each(|(_, c)| *c = 0.0);
        h
    }

    /// String amplitudes of H.
    pub fn terms(&self) -> Vec<(MajoranaString, Complex64)> {
        let p = self.prefactor();
        self.couplings.iter().map(|&(s, c)| (s, p * c)).collect()
    }

    pub fn as_operator(&self) -> OperatorVector {
        OperatorVector::from_terms(self.n, self.terms())
    }

    /// Max termwise deviation of `H†` from `H`.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = self.as_operator();
        let d = h.adjoint();
        h.iter().map(|(s, c)| (c - d.get(s)).norm()).fold(0.0, f64::max)
    }

    /// `𝓛_H O = [H, O]` on the sparse representation.
    pub fn liouvillian_apply(&self, o: &OperatorVector) -> Result<OperatorVector> {
        if o.n() != self.n {
            return Err(Error::IncompatibleSpace { left: self.n, right: o.n() });
        }
        let mut out = OperatorVector::zero(self.n).with_prune(o.prune_threshold());
        for (a, h) in self.terms() {
            for (b, c) in o.iter() {
                let (k, s) = a.commutator(b);
                if k != 0.0 {
                    out.add_term(s, h * c * k);
                }
            }
        }
        out.prune_small();
        Ok(out)
    }

    /// `[H, O]` on a dense amplitude array. Gather form: for every output
    /// string `m` and coupling `A`, read the input at `m ⊕ A`.
    pub fn liouvillian_apply_dense(&self, o: &DenseOperator) -> DenseOperator {
        assert_eq!(o.n, self.n, "operator space mismatch");
        let terms = self.terms();
        let mut out = DenseOperator::zero(self.n);
        out.amps.par_iter_mut().enumerate().for_each(|(m, slot)| {
            let m = m as u64;
            let mut acc = Complex64::default();
            for &(a, h) in &terms {
                let b = m ^ a.0;
                let c = o.amps[b as usize];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let k = product_sign(a.0, b) - product_sign(b, a.0);
                if k != 0.0 {
                    acc += h * c * k;
                }
            }
            *slot = acc;
        });
        out
    }
}

/// Jordan–Wigner matrices for small N; test oracle only.
pub mod dense {
    use super::*;

    fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a.kronecker(b)
    }

    fn pauli(which: char) -> DMatrix<Complex64> {
        let z = Complex64::default();
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::i();
        match which {
            'x' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            'y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            'z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
            _ => DMatrix::identity(2, 2),
        }
    }

    /// `γ_{2k} = Z⋯Z X_k`, `γ_{2k+1} = Z⋯Z Y_k` on `N/2` qubits.
    pub fn gamma(n: usize, i: usize) -> DMatrix<Complex64> {
        let qubits = n / 2;
        let k = i / 2;
        let mut m = DMatrix::identity(1, 1);
        for site in 0..qubits {
            let p = match site.cmp(&k) {
                std::cmp::Ordering::Less => pauli('z'),
                std::cmp::Ordering::Equal => pauli(if i % 2 == 0 { 'x' } else { 'y' }),
                std::cmp::Ordering::Greater => pauli('i'),
            };
            m = kron(&m, &p);
        }
        m
    }

    pub fn string(n: usize, s: MajoranaString) -> DMatrix<Complex64> {
        let dim = 1usize << (n / 2);
        s.indices().iter().fold(DMatrix::identity(dim, dim), |acc, &i| acc * gamma(n, i))
    }

    pub fn matrix(o: &OperatorVector) -> DMatrix<Complex64> {
        let dim = 1usize << (o.n() / 2);
        let mut m = DMatrix::zeros(dim, dim);
        for (s, c) in o.iter() {
            m += string(o.n(), s) * c;
        }
        m
    }

    /// Normalised trace inner product `Tr[A†B]/Tr[1]`.
    pub fn trace_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
        (a.adjoint() * b).trace() / a.nrows() as f64
    }

    /// Expands a matrix back onto the string basis.
    pub fn decompose(n: usize, m: &DMatrix<Complex64>, prune: f64) -> OperatorVector {
        let terms = (0..1u64 << n).map(|mask| {
            let s = MajoranaString(mask);
            (s, trace_inner(&string(n, s), m))
        });
        OperatorVector::from_terms(n, terms).with_prune(prune)
    }
}
