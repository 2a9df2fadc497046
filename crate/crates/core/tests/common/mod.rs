//! Algebra-law checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use dsyk::diagrams::{DiagramEngine, DiagramState, QMode, DEFAULT_MAX_TREES};
use dsyk::krylov::{arnoldi, orthonormality_defect, ArnoldiOptions, KrylovVector};
use dsyk::lindbladian::DissipativeModel;
use dsyk::majorana::DenseOperator;
use dsyk::{Complex64, MajoranaString, OperatorVector, SykHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_operator(n: usize, terms: usize, rng: &mut impl Rng) -> OperatorVector {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    OperatorVector::from_terms(
        n,
        (0..terms).map(|_| {
            let s = MajoranaString(rng.random::<u64>() & full);
            (s, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        }),
    )
}

pub fn anticommutation(a: usize, b: usize) -> Check {
    let (ga, gb) = (MajoranaString::single(a), MajoranaString::single(b));
    let (pab, sab) = ga.multiply(gb);
    let (pba, sba) = gb.multiply(ga);
    let ok = if a == b { pab == 1.0 && sab == MajoranaString::IDENTITY } else { pab == -pba && sab == sba };
    ok.then_some(()).ok_or_else(|| format!("γ{a} γ{b}: phases {pab}, {pba}"))
}

pub fn associativity(a: u64, b: u64, c: u64) -> Check {
    let (a, b, c) = (MajoranaString(a), MajoranaString(b), MajoranaString(c));
    let (p1, ab) = a.multiply(b);
    let (p2, left) = ab.multiply(c);
    let (p3, bc) = b.multiply(c);
    let (p4, right) = a.multiply(bc);
    (left == right && p1 * p2 == p3 * p4)
        .then_some(())
        .ok_or_else(|| format!("({a:?} {b:?}) {c:?} ≠ {a:?} ({b:?} {c:?})"))
}

/// `H† = H` termwise and `(A|[H,B]) = ([H,A]|B)`.
pub fn hamiltonian_hermiticity(n: usize, seed: u64) -> Check {
    let h = SykHamiltonian::sample(n, 4, 1.0, seed).map_err(|e| e.to_string())?;
    let d = h.hermiticity_defect();
    if d > 1e-12 {
        return Err(format!("N = {n}, seed {seed}: |H − H†| = {d:e}"));
    }
    let mut r = rng(seed);
    let a = random_operator(n, 12, &mut r);
    let b = random_operator(n, 12, &mut r);
    let lhs = a.inner_product(&h.liouvillian_apply(&b).unwrap()).unwrap();
    let rhs = h.liouvillian_apply(&a).unwrap().inner_product(&b).unwrap();
    let err = (lhs - rhs).norm();
    (err <= 1e-12 * (1.0 + lhs.norm()))
        .then_some(())
        .ok_or_else(|| format!("N = {n}, seed {seed}: (A|[H,B]) − ([H,A]|B) = {err:e}"))
}

fn random_state(e: &DiagramEngine, g_max: usize, r: &mut impl Rng) -> DiagramState<Complex64> {
    DiagramState::from_terms((0..=g_max).flat_map(|g| e.generation(g).to_vec()).filter_map(|t| {
        r.random_bool(0.5).then(|| (t, Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))))
    }))
}

/// `(x|𝓛₊y) = (𝓛₋x|y)` on random diagram states.
pub fn ladder_adjointness(e: &DiagramEngine, seed: u64) -> Check {
    let mut r = rng(seed);
    let g = e.generations() - 1;
    let x = random_state(e, g, &mut r);
    let y = random_state(e, g, &mut r);
    let lhs = e.l_minus(&x).inner(&y);
    let rhs = x.inner(&e.l_plus(&y).map_err(|e| e.to_string())?);
    let err = (lhs - rhs).norm();
    (err <= 1e-12 * (1.0 + lhs.norm()))
        .then_some(())
        .ok_or_else(|| format!("{:?}, seed {seed}: {err:e}", e.mode()))
}

pub fn ladder_engines() -> Vec<DiagramEngine> {
    [QMode::Infinite, QMode::Finite(4), QMode::Finite(6)]
        .into_iter()
        .map(|m| DiagramEngine::build(m, 8, 0.5, DEFAULT_MAX_TREES).unwrap())
        .collect()
}

/// Reorthogonalised Arnoldi basis stays orthonormal to 1e−10.
pub fn orthonormality(n: usize, mu: f64, n_max: usize, seed: u64) -> Check {
    let h = SykHamiltonian::sample(n, 4, 1.0, seed).map_err(|e| e.to_string())?;
    let m = DissipativeModel::new(h, mu).map_err(|e| e.to_string())?;
    let op = m.dense();
    let (_, basis) = arnoldi(&op, &DenseOperator::basis(n, MajoranaString::single(0)), ArnoldiOptions::new(n_max))
        .map_err(|e| e.to_string())?;
    let d = orthonormality_defect(&basis);
    (d <= 1e-10).then_some(()).ok_or_else(|| format!("N = {n}, μ = {mu}, seed {seed}: defect {d:e}"))
}
