//! Large-N operator growth on rooted trees.
//!
//! A Krylov state at large N is a combination of open melon diagrams. Each
//! diagram is an unordered rooted tree, one vertex per arc. The empty tree
//! stands for `ψ₁` itself. `𝓛₊` attaches an arc, `𝓛₋` is its adjoint.
//!
//! Weights. In the attachment basis a tree T carries norm²
//! `W(T) = |Aut T| · ∏_v (q−1)_{k_v} · (η𝒥²)^n`, where `(x)_k` is the falling
//! factorial, `k_v` the child count of v and `η = 2/q`. A vertex with q−1
//! children is full. In the `q → ∞` limit the relative weights become
//! `|Aut T| (2𝒥²)^{n−1}` and the link to the empty tree decouples.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::krylov::{arnoldi, lanczos, ArnoldiOptions, HessenbergMatrix, KrylovVector, TridiagonalCoeffs};
use crate::scalar::Ring;

pub const DEFAULT_MAX_TREES: usize = 2_000_000;

/// Canonical rooted unordered tree.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    children: Vec<Tree>,
}

impl Tree {
    pub fn leaf() -> Self {
        Tree { children: Vec::new() }
    }

    pub fn with_children(mut children: Vec<Tree>) -> Self {
        children.sort();
        Tree { children }
    }

    pub fn path(n: usize) -> Self {
        assert!(n >= 1);
        (1..n).fold(Tree::leaf(), |t, _| Tree::with_children(vec![t]))
    }

    pub fn star(leaves: usize) -> Self {
        Tree::with_children(vec![Tree::leaf(); leaves])
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    pub fn n_arcs(&self) -> usize {
        1 + self.children.iter().map(Tree::n_arcs).sum::<usize>()
    }

    pub fn max_children(&self) -> usize {
        self.children.iter().map(Tree::max_children).fold(self.children.len(), usize::max)
    }

    /// Parenthesis string with children in sorted order, e.g. `(()(()))`.
    pub fn encode(&self) -> String {
        let mut s = String::new();
        self.encode_into(&mut s);
        s
    }

    fn encode_into(&self, s: &mut String) {
        let mut parts: Vec<String> = self.children.iter().map(Tree::encode).collect();
        parts.sort();
        s.push('(');
        for p in parts {
            s.push_str(&p);
        }
        s.push(')');
    }

    pub fn decode(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        let (t, end) = Self::parse(bytes, 0)?;
        if end != bytes.len() {
            return Err(Error::InvalidModel(format!("trailing input in tree encoding {s:?}")));
        }
        Ok(t)
    }

    fn parse(b: &[u8], mut i: usize) -> Result<(Tree, usize)> {
        let bad = || Error::InvalidModel(format!("malformed tree encoding at byte {i}"));
        if b.get(i) != Some(&b'(') {
            return Err(bad());
        }
        i += 1;
        let mut children = Vec::new();
        while b.get(i) == Some(&b'(') {
            let (c, j) = Self::parse(b, i)?;
            children.push(c);
            i = j;
        }
        if b.get(i) != Some(&b')') {
            return Err(Error::InvalidModel(format!("malformed tree encoding at byte {i}")));
        }
        Ok((Tree::with_children(children), i + 1))
    }

    /// Product of all subtree sizes.
    pub fn hook_product(&self) -> u128 {
        self.n_arcs() as u128 * self.children.iter().map(Tree::hook_product).product::<u128>()
    }

    pub fn automorphisms(&self) -> u128 {
        let mut total: u128 = self.children.iter().map(Tree::automorphisms).product();
        let mut i = 0;
        while i < self.children.len() {
            let j = i + self.children[i..].iter().take_while(|c| **c == self.children[i]).count();
            total *= factorial(j - i);
            i = j;
        }
        total
    }

    /// Orderings of the vertices in which every vertex precedes its
    /// children, vertices treated as distinguishable: `n!/∏ subtree sizes`.
    pub fn linear_extensions(&self) -> u128 {
        factorial(self.n_arcs()) / self.hook_product()
    }

    /// Distinct ways to grow the tree from one vertex by adding a leaf at a
    /// time: [`Self::linear_extensions`] divided by the automorphism count.
    pub fn build_orderings(&self) -> u128 {
        self.linear_extensions() / self.automorphisms()
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TreeId(pub u32);

impl TreeId {
    /// The zero-vertex diagram, i.e. `ψ₁`.
    pub const EMPTY: TreeId = TreeId(0);
    pub const SINGLE: TreeId = TreeId(1);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum QMode {
    Infinite,
    Finite(usize),
}

impl QMode {
    fn cap(self) -> Option<usize> {
        match self {
            QMode::Infinite => None,
            QMode::Finite(q) => Some(q - 1),
        }
    }
}

struct Node {
    children: Box<[TreeId]>,
    n_arcs: u32,
    aut: u128,
    /// `∏_v (q−1)_{k_v}`; 1 in infinite mode.
    slots: f64,
}

/// All trees up to a generation, interned, with their attachment and
/// leaf-removal relations.
pub struct DiagramEngine {
    mode: QMode,
    script_j_sq: f64,
    generations: usize,
    nodes: Vec<Node>,
    by_gen: Vec<Vec<TreeId>>,
    /// `(T', A)`: A vertices of T whose new leaf gives T'.
    attach: Vec<Arc<[(TreeId, u64)]>>,
    /// `(T, R)`: R leaves of T' whose removal gives T.
    remove: Vec<Vec<(TreeId, u64)>>,
}

impl DiagramEngine {
    /// Enumerates every admissible tree with at most `generations` vertices.
    pub fn build(mode: QMode, generations: usize, script_j_sq: f64, max_trees: usize) -> Result<Self> {
        if let QMode::Finite(q) = mode {
            if q < 4 || q % 2 != 0 {
                return Err(Error::InvalidModel(format!("q must be even and at least 4, got {q}")));
            }
        }
        if !(script_j_sq > 0.0 && script_j_sq.is_finite()) {
            return Err(Error::InvalidModel(format!("coupling must be positive, got {script_j_sq}")));
        }
        let cap = mode.cap();
        let mut index: HashMap<Box<[TreeId]>, TreeId> = HashMap::new();
        let mut nodes = vec![
            Node { children: Box::new([]), n_arcs: 0, aut: 1, slots: 1.0 },
            Node { children: Box::new([]), n_arcs: 1, aut: 1, slots: 1.0 },
        ];
        index.insert(Box::new([]), TreeId::SINGLE);
        let mut by_gen = vec![vec![TreeId::EMPTY], vec![TreeId::SINGLE]];
        let mut attach: Vec<Arc<[(TreeId, u64)]>> = vec![Arc::from(vec![(TreeId::SINGLE, 1)])];
        for g in 1..generations {
            let mut next = Vec::new();
            for &t in &by_gen[g] {
                let out = Self::attach_one(t, cap, &mut nodes, &mut index, &mut next, &attach, mode);
                attach.push(out.into());
                if nodes.len() > max_trees {
                    return Err(Error::TreeBudget { trees: nodes.len(), achieved: g });
                }
            }
            by_gen.push(next);
        }
        let mut remove = vec![Vec::new(); nodes.len()];
        for (t, outs) in attach.iter().enumerate() {
            let t = TreeId(t as u32);
            let aut_t = nodes[t.0 as usize].aut;
            for &(tp, a) in outs.iter() {
                let num = a as u128 * nodes[tp.0 as usize].aut;
                debug_assert_eq!(num % aut_t, 0);
                remove[tp.0 as usize].push((t, (num / aut_t) as u64));
            }
        }
        Ok(DiagramEngine { mode, script_j_sq, generations, nodes, by_gen, attach, remove })
    }

    fn intern(
        children: Vec<TreeId>,
        nodes: &mut Vec<Node>,
        index: &mut HashMap<Box<[TreeId]>, TreeId>,
        next: &mut Vec<TreeId>,
        mode: QMode,
    ) -> TreeId {
        if let Some(&id) = index.get(children.as_slice()) {
            return id;
        }
        let id = TreeId(nodes.len() as u32);
        let mut aut: u128 = 1;
        let mut slots = match mode {
            QMode::Infinite => 1.0,
            QMode::Finite(q) => (0..children.len()).map(|i| (q - 1 - i) as f64).product(),
        };
        let mut n_arcs = 1;
        let mut i = 0;
        while i < children.len() {
            let c = &nodes[children[i].0 as usize];
            let j = i + children[i..].iter().take_while(|&&x| x == children[i]).count();
            let m = (j - i) as u32;
            aut *= c.aut.pow(m) * factorial(j - i);
            slots *= c.slots.powi(m as i32);
            n_arcs += c.n_arcs * m;
            i = j;
        }
        let key: Box<[TreeId]> = children.into_boxed_slice();
        nodes.push(Node { children: key.clone(), n_arcs, aut, slots });
        index.insert(key, id);
        next.push(id);
        id
    }

    fn attach_one(
        t: TreeId,
        cap: Option<usize>,
        nodes: &mut Vec<Node>,
        index: &mut HashMap<Box<[TreeId]>, TreeId>,
        next: &mut Vec<TreeId>,
        attach: &[Arc<[(TreeId, u64)]>],
        mode: QMode,
    ) -> Vec<(TreeId, u64)> {
        let children = nodes[t.0 as usize].children.to_vec();
        let mut out: Vec<(TreeId, u64)> = Vec::new();
        if cap.is_none_or(|c| children.len() < c) {
            let mut ch = children.clone();
            let pos = ch.partition_point(|&x| x <= TreeId::SINGLE);
            ch.insert(pos, TreeId::SINGLE);
            out.push((Self::intern(ch, nodes, index, next, mode), 1));
        }
        let mut i = 0;
        while i < children.len() {
            let c = children[i];
            let j = i + children[i..].iter().take_while(|&&x| x == c).count();
            let m = (j - i) as u64;
            for &(cp, a) in attach[c.0 as usize].iter() {
                let mut ch = children.clone();
                ch.remove(i);
                let pos = ch.partition_point(|&x| x <= cp);
                ch.insert(pos, cp);
                out.push((Self::intern(ch, nodes, index, next, mode), m * a));
            }
            i = j;
        }
        out.sort_unstable_by_key(|p| p.0);
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        out
    }

    pub fn mode(&self) -> QMode {
        self.mode
    }

    pub fn script_j_sq(&self) -> f64 {
        self.script_j_sq
    }

    /// Largest vertex count present.
    pub fn generations(&self) -> usize {
        self.generations
    }

    pub fn tree_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn generation(&self, g: usize) -> &[TreeId] {
        &self.by_gen[g]
    }

    pub fn n_arcs(&self, t: TreeId) -> usize {
        self.nodes[t.0 as usize].n_arcs as usize
    }

    pub fn automorphisms(&self, t: TreeId) -> u128 {
        self.nodes[t.0 as usize].aut
    }

    pub fn lookup(&self, tree: &Tree) -> Option<TreeId> {
        let ch = tree.children().iter().map(|c| self.lookup(c)).collect::<Option<Vec<_>>>()?;
        let mut ch = ch;
        ch.sort();
        // linear scan of one generation is fine for lookups from tests and dumps
        self.by_gen.get(tree.n_arcs())?.iter().copied().find(|&id| *self.nodes[id.0 as usize].children == *ch)
    }

    pub fn tree(&self, t: TreeId) -> Option<Tree> {
        if t == TreeId::EMPTY {
            return None;
        }
        Some(Tree::with_children(self.nodes[t.0 as usize].children.iter().filter_map(|&c| self.tree(c)).collect()))
    }

    pub fn encode(&self, t: TreeId) -> String {
        self.tree(t).map(|t| t.encode()).unwrap_or_default()
    }

    /// `(T', A)` pairs for attaching one leaf to T.
    pub fn attachments(&self, t: TreeId) -> &[(TreeId, u64)] {
        self.attach.get(t.0 as usize).map(|a| &a[..]).unwrap_or(&[])
    }

    /// `(T, R)` pairs for removing one leaf from T'.
    pub fn removals(&self, t: TreeId) -> &[(TreeId, u64)] {
        &self.remove[t.0 as usize]
    }

    /// `W(T')/W(T)` for T' obtained from T by one attachment.
    fn weight_ratio(&self, t: TreeId, tp: TreeId) -> f64 {
        let (a, b) = (&self.nodes[t.0 as usize], &self.nodes[tp.0 as usize]);
        let aut = b.aut as f64 / a.aut as f64;
        match self.mode {
            QMode::Infinite if t == TreeId::EMPTY => 0.0,
            QMode::Infinite => aut * 2.0 * self.script_j_sq,
            QMode::Finite(q) => aut * (2.0 / q as f64) * self.script_j_sq * b.slots / a.slots,
        }
    }

    /// Operator size `(q−2) n + 1` of a generation-n diagram.
    pub fn size_of(&self, t: TreeId) -> Option<usize> {
        match self.mode {
            QMode::Infinite => None,
            QMode::Finite(q) => Some((q - 2) * self.n_arcs(t) + 1),
        }
    }

    fn check_room(&self, s: &[(TreeId, impl Sized)], step: usize) -> Result<()> {
        match s.iter().map(|(t, _)| self.n_arcs(*t)).max() {
            Some(g) if g + step > self.generations => {
                Err(Error::Insufficient { needed: g + step, have: self.generations })
            }
            _ => Ok(()),
        }
    }

    // ---- exact arithmetic in the attachment basis ----

    /// `𝓛₊` with integer attachment multiplicities.
    pub fn l_plus_exact<C: Ring + Send + Sync>(&self, s: &DiagramState<C>) -> Result<DiagramState<C>> {
        self.check_room(&s.terms, 1)?;
        Ok(self.expand(s, |t| self.attachments(t).iter().map(|&(tp, a)| (tp, C::from_i64(a as i64))).collect()))
    }

    /// Leaf-removal part of `𝓛₋`, without the `2𝒥²` factor and without the
    /// link back to the empty tree.
    pub fn leaf_removal_exact<C: Ring + Send + Sync>(&self, s: &DiagramState<C>) -> DiagramState<C> {
        self.expand(s, |t| {
            self.removals(t)
                .iter()
                .filter(|(tt, _)| *tt != TreeId::EMPTY)
                .map(|&(tt, r)| (tt, C::from_i64(r as i64)))
                .collect()
        })
    }

    /// `⟨x, y⟩ = Σ x_T y_T W(T)` with the infinite-q weights `|Aut T| (2𝒥²)^{n−1}`.
    pub fn inner_exact(&self, x: &DiagramState<BigRational>, y: &DiagramState<BigRational>, two_j_sq: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        merge_join(&x.terms, &y.terms, |id, a, b| {
            let n = self.n_arcs(id);
            let w = BigRational::from_integer(BigInt::from(self.automorphisms(id))) * pow(two_j_sq, n.saturating_sub(1));
            acc += a.clone() * b.clone() * w;
        });
        acc
    }

    fn expand<C: Ring + Send + Sync>(&self, s: &DiagramState<C>, f: impl Fn(TreeId) -> Vec<(TreeId, C)> + Sync) -> DiagramState<C> {
        let mut pairs: Vec<(TreeId, C)> = s
            .terms
            .par_iter()
            .flat_map_iter(|(t, c)| f(*t).into_iter().map(move |(tp, w)| (tp, c.clone() * w)))
            .collect();
        pairs.par_sort_by_key(|p| p.0);
        DiagramState::from_sorted(pairs)
    }

    // ---- floating point in the orthonormal basis ----

    pub fn l_plus(&self, s: &DiagramState<Complex64>) -> Result<DiagramState<Complex64>> {
        self.check_room(&s.terms, 1)?;
        Ok(self.expand(s, |t| {
            self.attachments(t)
                .iter()
                .map(|&(tp, a)| (tp, Complex64::new(a as f64 * self.weight_ratio(t, tp).sqrt(), 0.0)))
                .filter(|(_, w)| w.re != 0.0)
                .collect()
        }))
    }

    pub fn l_minus(&self, s: &DiagramState<Complex64>) -> DiagramState<Complex64> {
        self.expand(s, |tp| {
            self.removals(tp)
                .iter()
                .map(|&(t, r)| {
                    let ratio = self.weight_ratio(t, tp);
                    // A = R |Aut T| / |Aut T'|, matrix element A √ratio
                    let a = r as f64 * self.automorphisms(t) as f64 / self.automorphisms(tp) as f64;
                    (t, Complex64::new(a * ratio.sqrt(), 0.0))
                })
                .filter(|(_, w)| w.re != 0.0)
                .collect()
        })
    }

    /// `𝓛_H = 𝓛₊ + 𝓛₋`.
    pub fn liouvillian(&self, s: &DiagramState<Complex64>) -> Result<DiagramState<Complex64>> {
        let mut out = self.l_plus(s)?;
        out.axpy(Complex64::new(1.0, 0.0), &self.l_minus(s));
        Ok(out)
    }

    /// `𝓛_H + iμ((q−2)n+1)`, the dissipator acting on the concentrated size.
    pub fn lindbladian(&self, s: &DiagramState<Complex64>, mu: f64) -> Result<DiagramState<Complex64>> {
        let mut out = self.liouvillian(s)?;
        if mu != 0.0 {
            let q = match self.mode {
                QMode::Finite(q) => q,
                QMode::Infinite => {
                    return Err(Error::InvalidModel("dissipation needs a finite q".into()));
                }
            };
            let diag = DiagramState::from_sorted(
                s.terms
                    .iter()
                    .map(|(t, c)| (*t, c * Complex64::new(0.0, mu * ((q - 2) * self.n_arcs(*t) + 1) as f64)))
                    .collect(),
            );
            out.axpy(Complex64::new(1.0, 0.0), &diag);
        }
        Ok(out)
    }

    /// Converts infinite-q attachment-basis coefficients to orthonormal ones.
    pub fn to_orthonormal(&self, s: &DiagramState<BigRational>, two_j_sq: f64) -> DiagramState<Complex64> {
        DiagramState::from_sorted(
            s.terms
                .iter()
                .map(|(t, c)| {
                    let n = self.n_arcs(*t);
                    let w = self.automorphisms(*t) as f64 * two_j_sq.powi(n.saturating_sub(1) as i32);
                    (*t, Complex64::new(c.to_f64().unwrap_or(f64::NAN) * w.sqrt(), 0.0))
                })
                .collect(),
        )
    }

    /// Weight per generation of a normalised orthonormal-basis state.
    pub fn generation_weights(&self, s: &DiagramState<Complex64>) -> Vec<f64> {
        let mut w = vec![0.0; self.generations + 1];
        for (t, c) in &s.terms {
            w[self.n_arcs(*t)] += c.norm_sqr();
        }
        w
    }

    pub fn size_distribution(&self, s: &DiagramState<Complex64>, q: usize) -> Result<SizeDistribution> {
        let w = self.generation_weights(s);
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm: total.sqrt() });
        }
        let p: Vec<(usize, f64)> =
            w.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(g, &x)| ((q - 2) * g + 1, x)).collect();
        let mean: f64 = p.iter().map(|&(s, x)| s as f64 * x).sum();
        let var: f64 = p.iter().map(|&(s, x)| (s as f64 - mean).powi(2) * x).sum();
        Ok(SizeDistribution { p, mean, std: var.max(0.0).sqrt() })
    }
}

fn pow(x: &BigRational, n: usize) -> BigRational {
    (0..n).fold(BigRational::one(), |acc, _| acc * x)
}

fn merge_join<A, B>(x: &[(TreeId, A)], y: &[(TreeId, B)], mut f: impl FnMut(TreeId, &A, &B)) {
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(x[i].0, &x[i].1, &y[j].1);
                i += 1;
                j += 1;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SizeDistribution {
    /// `(size, probability)`, increasing size.
    pub p: Vec<(usize, f64)>,
    pub mean: f64,
    pub std: f64,
}

/// Sparse combination of trees, sorted by id, no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagramState<C> {
    terms: Vec<(TreeId, C)>,
}

impl<C: Ring> DiagramState<C> {
    pub fn zero() -> Self {
        DiagramState { terms: Vec::new() }
    }

    pub fn basis(t: TreeId) -> Self {
        DiagramState { terms: vec![(t, C::one())] }
    }

    /// `ψ₁`.
    pub fn psi() -> Self {
        Self::basis(TreeId::EMPTY)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (TreeId, C)>) -> Self {
        let mut v: Vec<_> = terms.into_iter().collect();
        v.sort_by_key(|p| p.0);
        Self::from_sorted(v)
    }

    fn from_sorted(pairs: Vec<(TreeId, C)>) -> Self {
        let mut terms: Vec<(TreeId, C)> = Vec::with_capacity(pairs.len());
        for (t, c) in pairs {
            match terms.last_mut() {
                Some(last) if last.0 == t => last.1 = last.1.clone() + c,
                _ => terms.push((t, c)),
            }
        }
        terms.retain(|(_, c)| !c.is_zero());
        DiagramState { terms }
    }

    pub fn terms(&self) -> &[(TreeId, C)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, t: TreeId) -> C {
        self.terms.binary_search_by_key(&t, |p| p.0).map(|i| self.terms[i].1.clone()).unwrap_or_else(|_| C::zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(C::one(), other)
    }

    pub fn scaled(&self, a: &C) -> Self {
        Self::from_sorted(self.terms.iter().map(|(t, c)| (*t, c.clone() * a.clone())).collect())
    }

    /// `self + a·other`.
    pub fn combine(&self, a: C, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (x, y) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        while i < x.len() || j < y.len() {
            if j == y.len() || (i < x.len() && x[i].0 < y[j].0) {
                out.push(x[i].clone());
                i += 1;
            } else if i == x.len() || y[j].0 < x[i].0 {
                out.push((y[j].0, a.clone() * y[j].1.clone()));
                j += 1;
            } else {
                out.push((x[i].0, x[i].1.clone() + a.clone() * y[j].1.clone()));
                i += 1;
                j += 1;
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        DiagramState { terms: out }
    }

    /// Canonical-encoding/coefficient pairs.
    pub fn dump(&self, engine: &DiagramEngine) -> Vec<(String, C)> {
        self.terms.iter().map(|(t, c)| (engine.encode(*t), c.clone())).collect()
    }
}

impl KrylovVector for DiagramState<Complex64> {
    fn inner(&self, other: &Self) -> Complex64 {
        let mut acc = Complex64::default();
        merge_join(&self.terms, &other.terms, |_, a, b| acc += a.conj() * b);
        acc
    }

    fn axpy(&mut self, a: Complex64, x: &Self) {
        *self = self.combine(a, x);
    }

    fn scale(&mut self, a: Complex64) {
        if a == Complex64::default() {
            self.terms.clear();
        } else {
            for (_, c) in &mut self.terms {
                *c *= a;
            }
        }
    }
}

/// Exact infinite-q Lanczos chain started at the single-vertex diagram.
#[derive(Clone, Debug)]
pub struct ExactLanczos {
    /// `a_n` for `n = 1..=n_max`.
    pub a: Vec<BigRational>,
    /// `b_n²` for `n = 2..=n_max`; `b_sq[0]` is `b_2²`.
    pub b_sq: Vec<BigRational>,
    /// `q b_1²`, the only surviving trace of the link to `ψ₁`.
    pub q_b1_sq: BigRational,
    /// Monic Krylov states `P_1 … P_{n_max}` in the attachment basis.
    pub states: Vec<DiagramState<BigRational>>,
}

impl ExactLanczos {
    pub fn b_sq_at(&self, n: usize) -> Option<&BigRational> {
        n.checked_sub(2).and_then(|i| self.b_sq.get(i))
    }
}

/// Monic three-term recursion `P_{n+1} = 𝓛P_n − a_n P_n − b_n² P_{n−1}` in
/// exact rationals with `𝓛₋ = 2𝒥² × leaf removal`.
pub fn lanczos_large_q_exact(n_max: usize, script_j_sq: &BigRational, max_trees: usize) -> Result<ExactLanczos> {
    if n_max < 1 {
        return Err(Error::InvalidModel("n_max must be at least 1".into()));
    }
    let j_f = script_j_sq.to_f64().unwrap_or(f64::NAN);
    let engine = DiagramEngine::build(QMode::Infinite, n_max + 1, j_f, max_trees)?;
    let two_j = script_j_sq * BigRational::from_integer(2.into());
    let apply = |p: &DiagramState<BigRational>| -> Result<DiagramState<BigRational>> {
        Ok(engine.l_plus_exact(p)?.combine(two_j.clone(), &engine.leaf_removal_exact(p)))
    };
    let mut states = vec![DiagramState::basis(TreeId::SINGLE)];
    let mut norms = vec![engine.inner_exact(&states[0], &states[0], &two_j)];
    let mut a = Vec::new();
    let mut b_sq = Vec::new();
    for n in 0..n_max {
        let lp = apply(&states[n])?;
        let an = engine.inner_exact(&states[n], &lp, &two_j) / norms[n].clone();
        let mut next = lp.combine(-an.clone(), &states[n]);
        if n > 0 {
            let bn = norms[n].clone() / norms[n - 1].clone();
            next = next.combine(-bn.clone(), &states[n - 1]);
            b_sq.push(bn);
        }
        a.push(an);
        if n + 1 < n_max {
            norms.push(engine.inner_exact(&next, &next, &two_j));
            states.push(next);
        }
    }
    if n_max > 1 && b_sq.len() < n_max - 1 {
        b_sq.push(norms[n_max - 1].clone() / norms[n_max - 2].clone());
    }
    Ok(ExactLanczos { a, b_sq, q_b1_sq: two_j, states })
}

#[derive(Clone, Debug)]
pub struct LargeNLanczos {
    pub coeffs: TridiagonalCoeffs,
    /// Orthonormal Krylov states `O_0 … O_{n_max}`.
    pub states: Vec<DiagramState<Complex64>>,
}

/// Finite-q large-N Lanczos from `ψ₁` with full reorthogonalisation.
pub fn lanczos_large_n(engine: &DiagramEngine, n_max: usize) -> Result<LargeNLanczos> {
    if engine.mode == QMode::Infinite {
        return Err(Error::InvalidModel("use lanczos_large_q_exact for the infinite-q chain".into()));
    }
    if engine.generations < n_max + 1 {
        return Err(Error::Insufficient { needed: n_max + 1, have: engine.generations });
    }
    let op = |v: &DiagramState<Complex64>| engine.liouvillian(v).expect("generations checked above");
    let out = lanczos(&op, &DiagramState::psi(), n_max, 1e-10)?;
    Ok(LargeNLanczos { coeffs: out.coeffs, states: out.basis })
}

/// Large-N Arnoldi with dissipation `μ` (not `μ̃`).
pub fn arnoldi_large_n(engine: &DiagramEngine, n_max: usize, mu: f64) -> Result<(HessenbergMatrix, Vec<DiagramState<Complex64>>)> {
    if engine.generations < n_max + 1 {
        return Err(Error::Insufficient { needed: n_max + 1, have: engine.generations });
    }
    engine.lindbladian(&DiagramState::psi(), mu)?;
    let op = |v: &DiagramState<Complex64>| engine.lindbladian(v, mu).expect("generations checked above");
    arnoldi(&op, &DiagramState::psi(), ArnoldiOptions::new(n_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::orthonormality_defect;
    use num_traits::FromPrimitive;
    use std::collections::BTreeMap;

    fn cherry() -> Tree {
        Tree::star(2)
    }

    /// Root with two children, one of which has a child.
    fn caterpillar4() -> Tree {
        Tree::with_children(vec![Tree::leaf(), Tree::path(2)])
    }

    #[test]
    fn encoding_is_canonical() {
        let a = Tree::with_children(vec![Tree::path(3), Tree::leaf(), cherry()]);
        let b = Tree::with_children(vec![cherry(), Tree::path(3), Tree::leaf()]);
        assert_eq!(a.encode(), b.encode());
        assert_eq!(Tree::decode(&a.encode()).unwrap(), a);
        assert_eq!(Tree::path(3).encode(), "((()))");
        assert_ne!(Tree::path(3).encode(), cherry().encode());
        assert!(Tree::decode("(()").is_err());
        assert!(Tree::decode("()()").is_err());
    }

    #[test]
    fn counting_examples() {
        assert_eq!(Tree::path(3).linear_extensions(), 1);
        assert_eq!(caterpillar4().linear_extensions(), 3);
        assert_eq!(caterpillar4().build_orderings(), 3);
        assert_eq!(Tree::star(3).linear_extensions(), 6);
        assert_eq!(Tree::star(3).build_orderings(), 1);
        assert_eq!(Tree::star(3).automorphisms(), 6);
        assert_eq!(Tree::with_children(vec![cherry(), cherry()]).automorphisms(), 8);
    }

    /// Every build sequence: vertex k picks a parent among the first k.
    fn enumerate_builds(n: usize) -> BTreeMap<Tree, u128> {
        fn rec(parents: &mut Vec<usize>, n: usize, out: &mut BTreeMap<Tree, u128>) {
            if parents.len() + 1 == n {
                let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
                for (k, &p) in parents.iter().enumerate() {
                    kids[p].push(k + 1);
                }
                fn build(v: usize, kids: &[Vec<usize>]) -> Tree {
                    Tree::with_children(kids[v].iter().map(|&c| build(c, kids)).collect())
                }
                *out.entry(build(0, &kids)).or_default() += 1;
                return;
            }
            for p in 0..=parents.len() {
                parents.push(p);
                rec(parents, n, out);
                parents.pop();
            }
        }
        let mut out = BTreeMap::new();
        rec(&mut Vec::new(), n, &mut out);
        out
    }

    /// Every labelled vertex order respecting the tree order.
    fn brute_linear_extensions(t: &Tree) -> u128 {
        fn flatten(t: &Tree, parent: Option<usize>, out: &mut Vec<Option<usize>>) {
            let me = out.len();
            out.push(parent);
            for c in t.children() {
                flatten(c, Some(me), out);
            }
        }
        let mut parent = Vec::new();
        flatten(t, None, &mut parent);
        fn count(placed: &mut Vec<bool>, parent: &[Option<usize>]) -> u128 {
            if placed.iter().all(|&p| p) {
                return 1;
            }
            let mut total = 0;
            for v in 0..parent.len() {
                if !placed[v] && parent[v].is_none_or(|p| placed[p]) {
                    placed[v] = true;
                    total += count(placed, parent);
                    placed[v] = false;
                }
            }
            total
        }
        count(&mut vec![false; parent.len()], &parent)
    }

    #[test]
    fn build_orderings_match_enumeration() {
        for n in 1..=7 {
            let shapes = enumerate_builds(n);
            let total: u128 = shapes.values().sum();
            assert_eq!(total, factorial(n - 1));
            for (t, &count) in &shapes {
                assert_eq!(t.build_orderings(), count, "{t:?}");
                assert_eq!(t.linear_extensions(), brute_linear_extensions(t), "{t:?}");
            }
        }
    }

    #[test]
    fn engine_counts_trees() {
        // rooted unlabelled trees: 1, 1, 2, 4, 9, 20, 48, 115
        let e = DiagramEngine::build(QMode::Infinite, 8, 0.5, DEFAULT_MAX_TREES).unwrap();
        let counts: Vec<usize> = (1..=8).map(|g| e.generation(g).len()).collect();
        assert_eq!(counts, [1, 1, 2, 4, 9, 20, 48, 115]);
        // at most three children per vertex
        let e4 = DiagramEngine::build(QMode::Finite(4), 8, 0.5, DEFAULT_MAX_TREES).unwrap();
        for g in 1..=8 {
            for &t in e4.generation(g) {
                assert!(e4.tree(t).unwrap().max_children() <= 3);
            }
        }
        assert_eq!(e4.generation(5).len(), 8);
        for g in 1..=8 {
            for &t in e.generation(g) {
                let tree = e.tree(t).unwrap();
                assert_eq!(e.lookup(&tree), Some(t));
                assert_eq!(e.automorphisms(t), tree.automorphisms());
            }
        }
    }

    #[test]
    fn removal_counts_match_direct_leaf_removal() {
        fn remove_leaves(t: &Tree) -> Vec<Tree> {
            let mut out = Vec::new();
            for (i, c) in t.children().iter().enumerate() {
                let mut rest: Vec<Tree> = t.children().to_vec();
                if c.children().is_empty() {
                    rest.remove(i);
                    out.push(Tree::with_children(rest));
                } else {
                    for cc in remove_leaves(c) {
                        let mut r = rest.clone();
                        r[i] = cc;
                        out.push(Tree::with_children(r));
                    }
                }
            }
            out
        }
        let e = DiagramEngine::build(QMode::Infinite, 7, 0.5, DEFAULT_MAX_TREES).unwrap();
        for g in 2..=7 {
            for &tp in e.generation(g) {
                let mut direct: BTreeMap<TreeId, u64> = BTreeMap::new();
                for t in remove_leaves(&e.tree(tp).unwrap()) {
                    *direct.entry(e.lookup(&t).unwrap()).or_default() += 1;
                }
                let via: BTreeMap<TreeId, u64> = e.removals(tp).iter().copied().collect();
                assert_eq!(direct, via);
            }
        }
    }

    #[test]
    fn l_plus_powers_count_build_orderings() {
        let e = DiagramEngine::build(QMode::Infinite, 8, 0.5, DEFAULT_MAX_TREES).unwrap();
        let mut s = DiagramState::<BigInt>::psi();
        for n in 1..=8 {
            s = e.l_plus_exact(&s).unwrap();
            assert_eq!(s.len(), e.generation(n).len());
            for (t, c) in s.terms() {
                assert_eq!(*c, BigInt::from(e.tree(*t).unwrap().build_orderings()));
            }
        }
        assert!(matches!(e.l_plus_exact(&s), Err(Error::Insufficient { needed: 9, have: 8 })));
    }

    #[test]
    fn central_identity_small_n() {
        let e = DiagramEngine::build(QMode::Infinite, 9, 0.5, DEFAULT_MAX_TREES).unwrap();
        let mut powers = vec![DiagramState::<BigInt>::psi()];
        for _ in 0..9 {
            powers.push(e.l_plus_exact(powers.last().unwrap()).unwrap());
        }
        for n in 1..=8 {
            let lhs = e.leaf_removal_exact(&powers[n + 1]);
            assert_eq!(lhs, powers[n].scaled(&BigInt::from(n * (n + 1) / 2)), "n = {n}");
        }
    }

    fn random_state(e: &DiagramEngine, g_max: usize, seed: u64) -> DiagramState<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DiagramState::from_terms((0..=g_max).flat_map(|g| e.generation(g).to_vec()).filter_map(|t| {
            rng.random_bool(0.5).then(|| (t, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        }))
    }

    #[test]
    fn l_minus_is_adjoint() {
        for mode in [QMode::Infinite, QMode::Finite(4), QMode::Finite(6)] {
            let e = DiagramEngine::build(mode, 8, 0.5, DEFAULT_MAX_TREES).unwrap();
            for seed in 0..4 {
                let x = random_state(&e, 7, seed);
                let y = random_state(&e, 7, seed + 100);
                let lhs = e.l_minus(&x).inner(&y);
                let rhs = x.inner(&e.l_plus(&y).unwrap());
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "{mode:?}");
            }
        }
    }

    #[test]
    fn exact_adjoint_with_weights() {
        let e = DiagramEngine::build(QMode::Infinite, 7, 0.5, DEFAULT_MAX_TREES).unwrap();
        let two_j = BigRational::from_f64(0.75).unwrap();
        let mk = |k: i64| {
            DiagramState::from_terms(
                (2..=6).flat_map(|g| e.generation(g).to_vec()).enumerate().map(|(i, t)| {
                    (t, BigRational::new(BigInt::from((i as i64 * k) % 7 - 3), BigInt::from(1 + i as i64 % 3)))
                }),
            )
        };
        let (x, y) = (mk(3), mk(5));
        let lhs = e.inner_exact(&e.leaf_removal_exact(&x).scaled(&two_j), &y, &two_j);
        let rhs = e.inner_exact(&x, &e.l_plus_exact(&y).unwrap(), &two_j);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn large_q_lanczos_exact() {
        let j_sq = BigRational::new(1.into(), 2.into());
        let out = lanczos_large_q_exact(10, &j_sq, DEFAULT_MAX_TREES).unwrap();
        assert!(out.a.iter().all(Zero::is_zero));
        for n in 2..=10 {
            assert_eq!(*out.b_sq_at(n).unwrap(), BigRational::from_integer(BigInt::from(n * (n - 1) / 2)));
        }
        assert_eq!(out.q_b1_sq, BigRational::one());
        let j3 = BigRational::from_integer(3.into());
        let out = lanczos_large_q_exact(6, &j3, DEFAULT_MAX_TREES).unwrap();
        assert_eq!(*out.b_sq_at(4).unwrap(), BigRational::from_integer(36.into()));
    }

    #[test]
    fn finite_q_chain_start_and_tridiagonality() {
        let mut last_gap = f64::INFINITY;
        for q in [4, 6, 8, 16] {
            let e = DiagramEngine::build(QMode::Finite(q), 11, 0.5, DEFAULT_MAX_TREES).unwrap();
            let out = lanczos_large_n(&e, 10).unwrap();
            assert!((out.coeffs.b[0].re - (0.5f64 * 2.0 / q as f64).sqrt()).abs() < 1e-14);
            assert!(out.coeffs.a.iter().all(|a| a.norm() < 1e-12));
            assert!(orthonormality_defect(&out.states) < 1e-10);
            // b_n approaches the infinite-q value sqrt(n(n-1)/2) as q grows
            let gap = 1.0 - out.coeffs.b[4].re / (10.0f64).sqrt();
            assert!(gap > 0.0 && gap < last_gap && gap < 2.0 / q as f64, "q = {q}: {gap}");
            last_gap = gap;
        }
    }

    /// Taylor series of `C` from `Ċ(t) = −b₁² ∫₀ᵗ C(t−s)^{q−1} C(s) ds`, then
    /// moments `m_{2k} = (−1)^k (2k)! c_{2k}` through the moment recursion.
    fn memory_kernel_b_sq(q: usize, j_sq: BigRational, n_max: usize) -> Vec<BigRational> {
        use crate::moments::moments_to_tridiagonal;
        let k_max = 2 * n_max + 1;
        let int = |v: u128| BigRational::from_integer(BigInt::from(v));
        let b1_sq = j_sq * int(2) / int(q as u128);
        let mut c = vec![BigRational::zero(); k_max + 1];
        c[0] = BigRational::one();
        for k in 1..=k_max {
            let mut f = vec![BigRational::one()];
            for _ in 0..q - 1 {
                f = (0..k).map(|i| (0..=i.min(f.len() - 1)).map(|j| f[j].clone() * c[i - j].clone()).sum()).collect();
            }
            let mut acc = BigRational::zero();
            for i in 0..k - 1 {
                let j = k - 2 - i;
                acc += f[i].clone() * c[j].clone() * int(factorial(i) * factorial(j)) / int(factorial(i + j + 1));
            }
            c[k] = -b1_sq.clone() * acc / int(k as u128);
        }
        let m: Vec<BigRational> = (0..=k_max)
            .map(|k| {
                let sign = if k % 4 == 2 { -BigRational::one() } else { BigRational::one() };
                sign * int(factorial(k)) * c[k].clone()
            })
            .collect();
        moments_to_tridiagonal(&m, n_max).unwrap().b_sq
    }

    #[test]
    fn finite_q_matches_memory_kernel() {
        for q in [4, 6] {
            let oracle = memory_kernel_b_sq(q, BigRational::new(1.into(), 2.into()), 8);
            let e = DiagramEngine::build(QMode::Finite(q), 9, 0.5, DEFAULT_MAX_TREES).unwrap();
            let out = lanczos_large_n(&e, 8).unwrap();
            for (n, b_sq) in oracle.iter().enumerate() {
                let got = out.coeffs.b[n].norm_sqr();
                let want = b_sq.to_f64().unwrap();
                assert!((got - want).abs() < 1e-12 * want, "q = {q}, n = {}: {got} vs {want}", n + 1);
            }
        }
    }

    #[test]
    fn b1_against_disorder_average() {
        use crate::majorana::{OperatorVector, MajoranaString, SykHamiltonian};
        let (n, q, seeds) = (10, 4, 200);
        let g = OperatorVector::basis(n, MajoranaString::single(0));
        let mut mean = 0.0;
        let mut j_sq = 0.0;
        for seed in 0..seeds {
            let h = SykHamiltonian::sample(n, q, 1.0, seed).unwrap();
            mean += h.liouvillian_apply(&g).unwrap().norm_sqr() / seeds as f64;
            j_sq = h.script_j_sq();
        }
        let e = DiagramEngine::build(QMode::Finite(q), 2, j_sq, DEFAULT_MAX_TREES).unwrap();
        let b1_sq = lanczos_large_n(&e, 1).unwrap().coeffs.b[0].norm_sqr();
        // finite-N count of couplings containing the index: C(N−1, q−1)(q−1)!/N^{q−1}
        let finite_n = (9.0 * 8.0 * 7.0) / 1000.0;
        assert!((mean / (b1_sq * finite_n) - 1.0).abs() < 0.05, "{mean} vs {}", b1_sq * finite_n);
    }

    #[test]
    fn concentration_breaks_at_five() {
        for q in [4, 6, 8] {
            let e = DiagramEngine::build(QMode::Finite(q), 9, 0.5, DEFAULT_MAX_TREES).unwrap();
            let out = lanczos_large_n(&e, 8).unwrap();
            for (n, o) in out.states.iter().enumerate() {
                let w = e.generation_weights(o);
                let lower: f64 = w[..n].iter().sum();
                assert!(w[n + 1..].iter().all(|&x| x == 0.0));
                if n <= 4 {
                    assert!(lower < 1e-24, "q = {q}, n = {n}: {lower}");
                } else {
                    assert!(lower > 1e-12, "q = {q}, n = {n}: {lower}");
                }
                let d = e.size_distribution(o, q).unwrap();
                assert!((d.mean - ((q - 2) * n + 1) as f64).abs() < 0.01 * d.mean);
            }
        }
    }

    #[test]
    fn dissipative_diagonal() {
        let e = DiagramEngine::build(QMode::Finite(4), 7, 0.5, DEFAULT_MAX_TREES).unwrap();
        let (h, _) = arnoldi_large_n(&e, 6, 0.25).unwrap();
        assert!((h.get(0, 0) - Complex64::new(0.0, 0.25)).norm() < 1e-14);
        assert!((h.get(1, 1) - Complex64::new(0.0, 0.75)).norm() < 1e-14);
        let e_inf = DiagramEngine::build(QMode::Infinite, 3, 0.5, DEFAULT_MAX_TREES).unwrap();
        assert!(e_inf.lindbladian(&DiagramState::psi(), 0.1).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        match DiagramEngine::build(QMode::Infinite, 12, 0.5, 500) {
            Err(Error::TreeBudget { trees, achieved }) => {
                assert!(trees > 500);
                assert!((1..12).contains(&achieved));
            }
            other => panic!("expected budget error, got {:?}", other.map(|e| e.tree_count())),
        }
    }

    #[test]
    fn size_distribution_requires_normalisation() {
        let e = DiagramEngine::build(QMode::Finite(4), 3, 0.5, DEFAULT_MAX_TREES).unwrap();
        let s = DiagramState::basis(TreeId::SINGLE).scaled(&Complex64::new(2.0, 0.0));
        assert!(matches!(e.size_distribution(&s, 4), Err(Error::NotNormalized { .. })));
        let d = e.size_distribution(&DiagramState::basis(TreeId::SINGLE), 4).unwrap();
        assert_eq!(d.p, vec![(3, 1.0)]);
        assert_eq!(d.std, 0.0);
    }
}
