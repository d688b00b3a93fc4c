//! The associative front-end: dg algebras, operation families m_n, the
//! dictionary between them and coderivations on the deconcatenation
//! cooperad's cofree slices, residuals of the higher-associativity
//! relations, the transfer-to-homology pipeline, and triple Massey
//! products.
//!
//! Because the slice labels carry all suspension bookkeeping (their degrees
//! and the cocomposition signs), the dictionary between an operation
//! m_n: V^{⊗n} -> V of degree n - 2 and the arity-n coderivation term is
//! coefficient-identical: no sign table appears here either. That this is
//! the right dictionary is not taken on faith; the residual of an operation
//! family can be computed twice, once through the slice machinery and once
//! by direct word-level expansion with explicit suspension markers, and the
//! two must agree exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::codercalc::{mixed_arity, square_arity, ArityCoderivation, ArityMorphism};
use crate::cooperad::{CofreeData, Cooperad};
use crate::field::Field;
use crate::gradedcx::homology::homology;
use crate::gradedcx::{Basis, ChainComplex, Degree, GradedMap, GradedModule, Window};
use crate::linalg::{self, Matrix, PivotPolicy, SparseVec};
use crate::transfer::{
    transfer_down, StructureSide, TransferError, TransferProblem, TransferResult,
};

/// A multilinear operation source^{⊗n} -> target of one homogeneous degree,
/// stored per source basis word.
#[derive(Clone, Debug)]
pub struct MultiMap<F> {
    arity: usize,
    degree: Degree,
    source: Arc<Basis>,
    target: Arc<Basis>,
    entries: BTreeMap<Vec<usize>, SparseVec<F>>,
}

impl<F: Field> MultiMap<F> {
    pub fn new(arity: usize, degree: Degree, source: Arc<Basis>, target: Arc<Basis>) -> Self {
        assert!(arity >= 1);
        MultiMap { arity, degree, source, target, entries: BTreeMap::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn add_entry(&mut self, word: Vec<usize>, target_index: usize, coeff: F) {
        if coeff.is_zero() {
            return;
        }
        assert_eq!(word.len(), self.arity);
        let word_degree: Degree = word.iter().map(|&w| self.source.degree(w)).sum();
        assert_eq!(
            self.target.degree(target_index),
            word_degree + self.degree,
            "entry violates homogeneity"
        );
        self.entries.entry(word).or_default().add(target_index, coeff);
        self.entries.retain(|_, v| !v.is_empty());
    }

    pub fn value(&self, word: &[usize]) -> SparseVec<F> {
        self.entries.get(word).cloned().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &SparseVec<F>)> {
        self.entries.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|v| v.is_empty())
    }

    /// Multilinear extension to sparse arguments.
    pub fn eval(&self, args: &[&SparseVec<F>]) -> SparseVec<F> {
        assert_eq!(args.len(), self.arity);
        let mut words: Vec<(Vec<usize>, F)> = vec![(Vec::with_capacity(self.arity), F::one())];
        for arg in args {
            let mut next = Vec::with_capacity(words.len() * arg.len().max(1));
            for (prefix, c) in &words {
                for (i, v) in arg.iter() {
                    let mut w = prefix.clone();
                    w.push(*i);
                    next.push((w, c.clone() * v.clone()));
                }
            }
            words = next;
        }
        let mut out = SparseVec::new();
        for (word, c) in words {
            for (t, v) in self.value(&word).iter() {
                out.add(*t, c.clone() * v.clone());
            }
        }
        out
    }

    pub fn eq_multimap(&self, other: &MultiMap<F>) -> bool {
        if self.arity != other.arity || self.degree != other.degree {
            return false;
        }
        let keys: std::collections::BTreeSet<_> =
            self.entries.keys().chain(other.entries.keys()).collect();
        for k in keys {
            let mut diff = self.value(k);
            for (i, v) in other.value(k).iter() {
                diff.add(*i, -v.clone());
            }
            if !diff.is_empty() {
                return false;
            }
        }
        true
    }
}

/// The differential as an arity-1 operation.
pub fn differential_multimap<F: Field>(complex: &ChainComplex<F>) -> MultiMap<F> {
    let mut mm = MultiMap::new(1, -1, complex.basis().clone(), complex.basis().clone());
    for (j, i, c) in complex.differential.nonzero_entries() {
        mm.add_entry(vec![j], i, c);
    }
    mm
}

/// A dg algebra presentation: a chain complex with an associative degree-0
/// product satisfying the Leibniz rule, both checked at construction.
#[derive(Clone, Debug)]
pub struct DgAlgebra<F: Field> {
    pub complex: ChainComplex<F>,
    pub product: MultiMap<F>,
    pub unit: Option<usize>,
}

impl<F: Field> DgAlgebra<F> {
    pub fn new(
        complex: ChainComplex<F>,
        product: MultiMap<F>,
        unit: Option<usize>,
    ) -> Result<Self, String> {
        if product.arity() != 2 || product.degree() != 0 {
            return Err("product must be a degree-0 binary operation".into());
        }
        let dim = complex.module.dim();
        let name = |i: usize| complex.module.name(i).to_string();
        for a in 0..dim {
            for b in 0..dim {
                let ab = product.value(&[a, b]);
                for c in 0..dim {
                    let bc = product.value(&[b, c]);
                    let left = product.eval(&[&ab, &SparseVec::unit(c, F::one())]);
                    let right = product.eval(&[&SparseVec::unit(a, F::one()), &bc]);
                    let mut diff = left;
                    for (i, v) in right.iter() {
                        diff.add(*i, -v.clone());
                    }
                    if !diff.is_empty() {
                        return Err(format!(
                            "product is not associative on ({}, {}, {})",
                            name(a),
                            name(b),
                            name(c)
                        ));
                    }
                }
            }
        }
        let d = &complex.differential;
        for a in 0..dim {
            let da = d.apply_index(a);
            let sign_a = complex.module.basis.degree(a).rem_euclid(2) == 1;
            for b in 0..dim {
                let db = d.apply_index(b);
                let d_ab = d.apply_sparse(&product.value(&[a, b]));
                let mut rhs = product.eval(&[&da, &SparseVec::unit(b, F::one())]);
                let a_db = product.eval(&[&SparseVec::unit(a, F::one()), &db]);
                for (i, v) in a_db.iter() {
                    let v = if sign_a { -v.clone() } else { v.clone() };
                    rhs.add(*i, v);
                }
                let mut diff = d_ab;
                for (i, v) in rhs.iter() {
                    diff.add(*i, -v.clone());
                }
                if !diff.is_empty() {
                    return Err(format!("Leibniz rule fails on ({}, {})", name(a), name(b)));
                }
            }
        }
        if let Some(u) = unit {
            if complex.module.basis.degree(u) != 0 {
                return Err("unit must sit in degree 0".into());
            }
            if !d.apply_index(u).is_empty() {
                return Err("unit must be a cycle".into());
            }
            for a in 0..dim {
                let ua = product.value(&[u, a]);
                let au = product.value(&[a, u]);
                let expected = SparseVec::unit(a, F::one());
                if ua != expected || au != expected {
                    return Err(format!("'{}' is not a two-sided unit", name(u)));
                }
            }
        }
        Ok(DgAlgebra { complex, product, unit })
    }
}

/// Operations m_n: V^{⊗n} -> V of degree n - 2, with m_1 the differential.
/// Transferred structures over homology have m_1 = 0.
#[derive(Clone)]
pub struct AInfinityStructure<F: Field> {
    pub complex: ChainComplex<F>,
    pub ops: Vec<MultiMap<F>>,
}

impl<F: Field> AInfinityStructure<F> {
    pub fn op(&self, n: usize) -> Option<&MultiMap<F>> {
        self.ops.get(n - 1)
    }
}

/// Components f_n: V^{⊗n} -> W of degree n - 1 of an infinity-morphism.
#[derive(Clone)]
pub struct AInfinityMorphismData<F: Field> {
    pub components: Vec<MultiMap<F>>,
}

/// Truncated cofree data of the deconcatenation cooperad over a complex,
/// the carrier for the dictionaries below.
pub fn deconcatenation_data<F: Field>(
    complex: &ChainComplex<F>,
    max_arity: usize,
) -> Arc<CofreeData<F>> {
    let coop = Cooperad::<F>::deconcatenation(max_arity);
    let window = Window::around(complex.basis());
    Arc::new(CofreeData::new(coop, complex.clone(), max_arity, window))
}

/// Dictionary: a multilinear operation as an arity term on the slice. The
/// coefficients are untouched; the slice basis carries the suspensions.
pub fn multilinear_to_term<F: Field>(
    mm: &MultiMap<F>,
    data: &CofreeData<F>,
    target: Arc<Basis>,
) -> GradedMap<F> {
    let n = mm.arity();
    let slice = data.slice(n);
    assert_eq!(slice.label_count(), 1, "dictionary needs one-dimensional pieces");
    let term_degree = mm.degree() - (n as Degree - 1);
    let mut out = GradedMap::zero(slice.basis.clone(), target, term_degree);
    for (word, vec) in mm.entries() {
        let idx = slice.encode(0, word);
        for (t, c) in vec.iter() {
            out.add_entry(idx, *t, c.clone());
        }
    }
    out
}

/// Dictionary in the other direction.
pub fn term_to_multilinear<F: Field>(
    term: &GradedMap<F>,
    data: &CofreeData<F>,
    n: usize,
    source: Arc<Basis>,
    target: Arc<Basis>,
) -> MultiMap<F> {
    let slice = data.slice(n);
    let mm_degree = term.degree() + (n as Degree - 1);
    let mut out = MultiMap::new(n, mm_degree, source, target);
    for (j, i, c) in term.nonzero_entries() {
        let (label, word) = slice.decode(j);
        assert_eq!(label, 0);
        out.add_entry(word, i, c);
    }
    out
}

/// Encode an operation family as a coderivation on the truncated cofree
/// coalgebra; round-trips exactly with `operations_from_coderivation`.
pub fn operations_to_coderivation<F: Field>(
    ops: &[MultiMap<F>],
    data: &Arc<CofreeData<F>>,
) -> ArityCoderivation<F> {
    let mut coder = ArityCoderivation::self_coderivation(data.clone(), -1);
    for mm in ops {
        assert_eq!(mm.degree(), mm.arity() as Degree - 2, "operation degrees must be n - 2");
        if mm.is_zero() {
            continue;
        }
        let term = multilinear_to_term(mm, data, data.complex.basis().clone());
        coder.set_term(mm.arity(), term);
    }
    coder
}

pub fn operations_from_coderivation<F: Field>(
    coder: &ArityCoderivation<F>,
    max_arity: usize,
) -> Vec<MultiMap<F>> {
    let data = &coder.source;
    let module = data.complex.basis().clone();
    (1..=max_arity)
        .map(|n| match coder.term(n) {
            Some(t) => term_to_multilinear(t, data, n, module.clone(), module.clone()),
            None => MultiMap::new(n, n as Degree - 2, module.clone(), module.clone()),
        })
        .collect()
}

/// A dg algebra as a coderivation: arity-1 term the differential, arity-2
/// term the product, nothing else. Square-zero at every arity by the
/// Leibniz rule and associativity.
pub fn dga_to_coderivation<F: Field>(
    algebra: &DgAlgebra<F>,
    data: &Arc<CofreeData<F>>,
) -> ArityCoderivation<F> {
    let mut coder = ArityCoderivation::from_differential(data.clone());
    if data.max_arity() >= 2 {
        let term = multilinear_to_term(&algebra.product, data, data.complex.basis().clone());
        coder.set_term(2, term);
    }
    coder
}

/// The arity-n associativity residual through the slice machinery: encode,
/// square, decode.
pub fn stasheff_residual<F: Field>(
    ops: &[MultiMap<F>],
    data: &Arc<CofreeData<F>>,
    n: usize,
) -> MultiMap<F> {
    let coder = operations_to_coderivation(ops, data);
    let sq = square_arity(&coder, n);
    term_to_multilinear(&sq, data, n, data.complex.basis().clone(), data.complex.basis().clone())
}

fn parity(x: Degree) -> bool {
    x.rem_euclid(2) == 1
}

fn kappa(degs: &[Degree]) -> bool {
    let n = degs.len() as i64;
    let total: i64 = degs.iter().enumerate().map(|(j, &d)| (n - 1 - j as i64) * d).sum();
    parity(total)
}

/// Parity of desuspending a word letterwise: the marker of letter j crosses
/// the j - 1 earlier suspended letters, and writing the m odd marker maps
/// as one tensor tuple (rather than m nested single insertions) costs the
/// interchange parity m(m-1)/2 on top.
fn kappa_tilde(degs: &[Degree]) -> bool {
    let n = degs.len() as i64;
    let letters: i64 =
        degs.iter().enumerate().map(|(j, &d)| (n - 1 - j as i64) * (d + 1)).sum();
    parity(letters + n * (n - 1) / 2)
}

/// The same residual expanded directly on words with explicit suspension
/// markers, never touching the cooperad machinery: suspend the word, insert
/// each inner operation in each slot (odd once suspended), desuspend around
/// both operations. This is the independent sign oracle.
pub fn stasheff_residual_direct<F: Field>(
    ops: &[MultiMap<F>],
    module: &Arc<Basis>,
    n: usize,
) -> MultiMap<F> {
    let op =
        |m: usize| -> Option<&MultiMap<F>> { ops.iter().find(|o| o.arity() == m && !o.is_zero()) };
    let mut out = MultiMap::new(n, n as Degree - 3, module.clone(), module.clone());
    let dim = module.dim();
    if dim == 0 {
        return out;
    }
    let mut word = vec![0usize; n];
    loop {
        let degs: Vec<Degree> = word.iter().map(|&w| module.degree(w)).collect();
        let mut acc: SparseVec<F> = SparseVec::new();
        for s in 1..=n {
            let Some(inner) = op(s) else {
                continue;
            };
            for r in 0..=(n - s) {
                let k = n - s + 1;
                let Some(outer) = op(k) else {
                    continue;
                };
                let block = &word[r..r + s];
                let inner_out = inner.value(block);
                if inner_out.is_empty() {
                    continue;
                }
                let mut sign = kappa(&degs);
                // The suspended inner operation is odd: it crosses the r
                // suspended letters before its slot.
                let crossed: Degree = degs[..r].iter().map(|&d| d + 1).sum();
                sign ^= parity(crossed);
                sign ^= kappa_tilde(&degs[r..r + s]);
                for (u, c) in inner_out.iter() {
                    let mut outer_word = Vec::with_capacity(k);
                    outer_word.extend_from_slice(&word[..r]);
                    outer_word.push(*u);
                    outer_word.extend_from_slice(&word[r + s..]);
                    let outer_degs: Vec<Degree> =
                        outer_word.iter().map(|&w| module.degree(w)).collect();
                    let total_sign = sign ^ kappa_tilde(&outer_degs);
                    for (t, v) in outer.value(&outer_word).iter() {
                        let cv = c.clone() * v.clone();
                        acc.add(*t, if total_sign { -cv } else { cv });
                    }
                }
            }
        }
        for (t, v) in acc.iter() {
            out.add_entry(word.clone(), *t, v.clone());
        }
        let mut slot = n;
        let mut done = true;
        while slot > 0 {
            slot -= 1;
            word[slot] += 1;
            if word[slot] < dim {
                done = false;
                break;
            }
            word[slot] = 0;
        }
        if done {
            break;
        }
    }
    out
}

/// Everything the homotopy transfer pipeline produces for a dg algebra.
pub struct HomotopyTransfer<F: Field> {
    pub problem: TransferProblem<F>,
    pub result: TransferResult<F>,
    /// The cycle-choosing quasi-isomorphism H -> A and its splitting.
    pub representatives: GradedMap<F>,
    pub projection: GradedMap<F>,
    pub structure: AInfinityStructure<F>,
    pub morphism: AInfinityMorphismData<F>,
}

/// Homology, cycle choice, encoding, transfer and decoding in one call:
/// the minimal-model pipeline for a dg algebra over a field.
pub fn transfer_to_homology<F: Field>(
    algebra: &DgAlgebra<F>,
    max_arity: usize,
    policy: PivotPolicy,
) -> Result<HomotopyTransfer<F>, TransferError<F>> {
    let window = Window::around(algebra.complex.basis());
    let h = homology(&algebra.complex, window);
    let cooperad = Cooperad::<F>::deconcatenation(max_arity);
    let problem = TransferProblem::new(
        cooperad,
        h.complex.clone(),
        algebra.complex.clone(),
        h.representatives.clone(),
        StructureSide::Target,
        max_arity,
        |w_data| {
            if w_data.max_arity() >= 2 {
                let term = multilinear_to_term(
                    &algebra.product,
                    w_data,
                    w_data.complex.basis().clone(),
                );
                vec![(2, term)]
            } else {
                Vec::new()
            }
        },
    )
    .expect("homology pipeline builds a valid problem");
    let result = transfer_down(&problem, policy)?;
    let ops = operations_from_coderivation(&result.coderivation, max_arity);
    let structure = AInfinityStructure { complex: h.complex.clone(), ops };
    let components = (1..=max_arity)
        .map(|n| match result.morphism.term(n) {
            Some(t) => term_to_multilinear(
                t,
                &problem.v,
                n,
                h.complex.basis().clone(),
                algebra.complex.basis().clone(),
            ),
            None => MultiMap::new(
                n,
                n as Degree - 1,
                h.complex.basis().clone(),
                algebra.complex.basis().clone(),
            ),
        })
        .collect();
    Ok(HomotopyTransfer {
        problem,
        result,
        representatives: h.representatives,
        projection: h.projection,
        structure,
        morphism: AInfinityMorphismData { components },
    })
}

/// A triple Massey product: the class of m_3 on three homology classes with
/// vanishing pairwise m_2 products, with the indeterminacy subspace
/// a·H + H·c. The class is canonical up to the global sign convention and
/// modulo the reported subspace.
#[derive(Clone, Debug)]
pub struct MasseyProduct<F> {
    pub class: SparseVec<F>,
    pub degree: Degree,
    pub indeterminacy: Vec<SparseVec<F>>,
}

pub fn massey_triple<F: Field>(
    structure: &AInfinityStructure<F>,
    a: &SparseVec<F>,
    b: &SparseVec<F>,
    c: &SparseVec<F>,
) -> Result<MasseyProduct<F>, String> {
    let h = structure.complex.basis();
    if structure.op(1).is_some_and(|m| !m.is_zero()) {
        return Err("Massey products need a structure with zero differential".into());
    }
    let m2 = structure.op(2).ok_or("structure has no binary operation")?;
    let deg_of = |v: &SparseVec<F>, name: &str| -> Result<Degree, String> {
        let mut degs = v.iter().map(|(i, _)| h.degree(*i));
        let first = degs.next().ok_or(format!("class {name} is zero"))?;
        if degs.all(|d| d == first) {
            Ok(first)
        } else {
            Err(format!("class {name} is not homogeneous"))
        }
    };
    let (da, db, dc) = (deg_of(a, "a")?, deg_of(b, "b")?, deg_of(c, "c")?);
    let _ = db;
    let ab = m2.eval(&[a, b]);
    if !ab.is_empty() {
        return Err(format!(
            "m2(a, b) is nonzero (leading term {})",
            structure.complex.module.name(*ab.iter().next().map(|(i, _)| i).unwrap())
        ));
    }
    let bc = m2.eval(&[b, c]);
    if !bc.is_empty() {
        return Err(format!(
            "m2(b, c) is nonzero (leading term {})",
            structure.complex.module.name(*bc.iter().next().map(|(i, _)| i).unwrap())
        ));
    }
    let degree = da + db + dc + 1;
    let class = match structure.op(3) {
        Some(m3) => m3.eval(&[a, b, c]),
        None => SparseVec::new(),
    };
    let dim = h.dim();
    let dense = |v: &SparseVec<F>| -> Vec<F> {
        let mut out = vec![F::zero(); dim];
        for (i, c) in v.iter() {
            out[*i] = c.clone();
        }
        out
    };
    let mut columns: Vec<Vec<F>> = Vec::new();
    for &i in h.indices_in(degree - da) {
        let img = m2.eval(&[a, &SparseVec::unit(i, F::one())]);
        if !img.is_empty() {
            columns.push(dense(&img));
        }
    }
    for &i in h.indices_in(degree - dc) {
        let img = m2.eval(&[&SparseVec::unit(i, F::one()), c]);
        if !img.is_empty() {
            columns.push(dense(&img));
        }
    }
    let indeterminacy = if columns.is_empty() {
        Vec::new()
    } else {
        let m = Matrix::from_columns(dim, columns.clone());
        let red = linalg::rref(&m);
        red.pivots
            .iter()
            .map(|&p| {
                SparseVec::from_entries(columns[p].iter().cloned().enumerate().collect::<Vec<_>>())
            })
            .collect()
    };
    Ok(MasseyProduct { class, degree, indeterminacy })
}

/// Whether a class lies in the span of the indeterminacy subspace.
pub fn in_indeterminacy<F: Field>(
    product: &MasseyProduct<F>,
    candidate: &SparseVec<F>,
    dim: usize,
) -> bool {
    if candidate.is_empty() {
        return true;
    }
    if product.indeterminacy.is_empty() {
        return false;
    }
    let dense = |v: &SparseVec<F>| -> Vec<F> {
        let mut out = vec![F::zero(); dim];
        for (i, c) in v.iter() {
            out[*i] = c.clone();
        }
        out
    };
    let m = Matrix::from_columns(dim, product.indeterminacy.iter().map(dense).collect());
    linalg::solve(&m, &dense(candidate), PivotPolicy::Forward).is_some()
}

/// Replay the chain relation of a completed transfer.
pub fn morphism_relation_holds<F: Field>(
    transfer: &HomotopyTransfer<F>,
    max_arity: usize,
) -> bool {
    let mu = &transfer.result.coderivation;
    let nu = &transfer.problem.given;
    (1..=max_arity).all(|n| mixed_arity(&transfer.result.morphism, mu, nu, n).is_zero())
}

/// Convenience for tests that need a bare morphism from a linear map.
pub fn linear_morphism<F: Field>(
    source: &Arc<CofreeData<F>>,
    target: &Arc<CofreeData<F>>,
    f: &GradedMap<F>,
) -> ArityMorphism<F> {
    ArityMorphism::from_linear(source.clone(), target.clone(), f)
}

/// Re-present a dg algebra over a new basis: each new element is a
/// homogeneous combination of old ones, the matrix of which must be
/// invertible. The conjugated presentation describes the same algebra; its
/// structure constants (and hence every echelon-driven choice downstream)
/// can look entirely different. Everything is re-validated.
pub fn change_basis<F: Field>(
    algebra: &DgAlgebra<F>,
    new_basis: &[(&str, Vec<(&str, i64)>)],
) -> Result<DgAlgebra<F>, String> {
    let old = &algebra.complex.module;
    let dim = old.dim();
    if new_basis.len() != dim {
        return Err("basis change must have full size".into());
    }
    let mut columns: Vec<Vec<F>> = Vec::with_capacity(dim);
    let mut elements: Vec<(String, Degree)> = Vec::with_capacity(dim);
    for (name, combo) in new_basis {
        let mut col = vec![F::zero(); dim];
        let mut degree: Option<Degree> = None;
        for (old_name, c) in combo {
            let i = old
                .index_of(old_name)
                .ok_or_else(|| format!("unknown element '{old_name}'"))?;
            match degree {
                None => degree = Some(old.basis.degree(i)),
                Some(d) if d == old.basis.degree(i) => {}
                Some(_) => return Err(format!("'{name}' is not homogeneous")),
            }
            col[i] = col[i].clone() + F::from_int(*c);
        }
        let degree = degree.ok_or_else(|| format!("'{name}' is empty"))?;
        columns.push(col);
        elements.push((name.to_string(), degree));
    }
    let p = Matrix::from_columns(dim, columns);
    let red = linalg::rref(&p.hstack(&Matrix::identity(dim)));
    if red.pivots.len() != dim || red.pivots.iter().enumerate().any(|(i, &c)| i != c) {
        return Err("basis change is not invertible".into());
    }
    let p_inv = {
        let mut m = Matrix::zero(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, red.rref.get(i, dim + j).clone());
            }
        }
        m
    };
    let module = GradedModule::new(elements)?;
    let to_old = |j: usize| -> SparseVec<F> {
        SparseVec::from_entries(
            (0..dim).map(|i| (i, p.get(i, j).clone())).collect::<Vec<_>>(),
        )
    };
    let to_new = |v: &SparseVec<F>| -> SparseVec<F> {
        let mut out = SparseVec::new();
        for (i, c) in v.iter() {
            for k in 0..dim {
                out.add(k, p_inv.get(k, *i).clone() * c.clone());
            }
        }
        out
    };
    let mut d = GradedMap::zero(module.basis.clone(), module.basis.clone(), -1);
    for j in 0..dim {
        let image = to_new(&algebra.complex.differential.apply_sparse(&to_old(j)));
        for (t, c) in image.iter() {
            d.add_entry(j, *t, c.clone());
        }
    }
    let complex = ChainComplex::new(module.clone(), d)?;
    let mut product = MultiMap::new(2, 0, module.basis.clone(), module.basis.clone());
    for j1 in 0..dim {
        for j2 in 0..dim {
            let image = to_new(&algebra.product.eval(&[&to_old(j1), &to_old(j2)]));
            for (t, c) in image.iter() {
                product.add_entry(vec![j1, j2], *t, c.clone());
            }
        }
    }
    let unit = algebra.unit.and_then(|u| {
        // The unit survives only if it is a basis vector of the new
        // presentation.
        let e = SparseVec::unit(u, F::one());
        (0..dim).find(|&j| {
            let mut diff = to_old(j);
            for (i, c) in e.iter() {
                diff.add(*i, -c.clone());
            }
            diff.is_empty()
        })
    });
    DgAlgebra::new(complex, product, unit)
}

/// Build a square-free monomial dg algebra from generators with degrees and
/// a differential on generators. The product carries the Koszul sign of the
/// interleaving; the differential extends by the Leibniz rule. Everything
/// is re-validated by `DgAlgebra::new`.
pub fn monomial_dga<F: Field>(
    generators: &[(&str, Degree)],
    differential: &[(&str, Vec<(&str, i64)>)],
) -> Result<DgAlgebra<F>, String> {
    let g = generators.len();
    let mut subsets: Vec<Vec<usize>> = (0..(1usize << g))
        .map(|mask| (0..g).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by_key(|s| (s.len(), s.clone()));
    let name_of = |s: &[usize]| -> String {
        if s.is_empty() {
            "1".to_string()
        } else {
            s.iter().map(|&i| generators[i].0).collect::<Vec<_>>().join("")
        }
    };
    let degree_of = |s: &[usize]| -> Degree { s.iter().map(|&i| generators[i].1).sum() };
    let elements: Vec<(String, Degree)> =
        subsets.iter().map(|s| (name_of(s), degree_of(s))).collect();
    let module = GradedModule::new(elements)?;
    let index_of =
        |s: &[usize]| -> usize { subsets.iter().position(|t| t == s).expect("subset") };

    let mul = |s: &[usize], t: &[usize]| -> Option<(usize, bool)> {
        if s.iter().any(|i| t.contains(i)) {
            return None;
        }
        let mut sign = false;
        for &a in s {
            for &b in t {
                if a > b && parity(generators[a].1) && parity(generators[b].1) {
                    sign ^= true;
                }
            }
        }
        let mut merged: Vec<usize> = s.iter().chain(t.iter()).copied().collect();
        merged.sort_unstable();
        Some((index_of(&merged), sign))
    };

    let mut product = MultiMap::<F>::new(2, 0, module.basis.clone(), module.basis.clone());
    for (si, s) in subsets.iter().enumerate() {
        for (ti, t) in subsets.iter().enumerate() {
            if let Some((idx, sign)) = mul(s, t) {
                let c = if sign { -F::one() } else { F::one() };
                product.add_entry(vec![si, ti], idx, c);
            }
        }
    }

    let mut d_gen: Vec<SparseVec<F>> = vec![SparseVec::new(); g];
    for (gen, value) in differential {
        let gi = generators
            .iter()
            .position(|(n, _)| n == gen)
            .ok_or_else(|| format!("unknown generator '{gen}'"))?;
        for (mono, coeff) in value {
            let target = (0..module.dim())
                .find(|&i| module.name(i) == *mono)
                .ok_or_else(|| format!("unknown monomial '{mono}'"))?;
            d_gen[gi].add(target, F::from_int(*coeff));
        }
    }
    let mut d = GradedMap::zero(module.basis.clone(), module.basis.clone(), -1);
    for (si, s) in subsets.iter().enumerate() {
        let mut image: SparseVec<F> = SparseVec::new();
        for (pos, &gi) in s.iter().enumerate() {
            if d_gen[gi].is_empty() {
                continue;
            }
            let crossed: Degree = s[..pos].iter().map(|&j| generators[j].1).sum();
            let negate = parity(crossed);
            let prefix: Vec<usize> = s[..pos].to_vec();
            let suffix: Vec<usize> = s[pos + 1..].to_vec();
            for (mono, c) in d_gen[gi].iter() {
                let mono_subset = &subsets[*mono];
                let Some((pm, s1)) = mul(&prefix, mono_subset) else {
                    continue;
                };
                let Some((full, s2)) = mul(&subsets[pm], &suffix) else {
                    continue;
                };
                let mut coeff = c.clone();
                if negate ^ s1 ^ s2 {
                    coeff = -coeff;
                }
                image.add(full, coeff);
            }
        }
        for (t, c) in image.iter() {
            d.add_entry(si, *t, c.clone());
        }
    }
    let complex = ChainComplex::new(module, d)?;
    DgAlgebra::new(complex, product, Some(0))
}
