//! Tensor words over graded bases and the Koszul sign rule.
//!
//! Signs are never tabulated. Applying a tuple of homogeneous maps to a
//! tensor word costs (-1)^{sum_{i<j} |phi_j||x_i|}, and reordering graded
//! symbols costs one sign per crossing of odd symbols. Every sign in the
//! library is produced by one of the helpers here.

use std::sync::Arc;

use crate::field::Field;
use crate::linalg::SparseVec;

use super::{Basis, Degree, GradedMap};

/// Parity (true = odd) of the Koszul sign for applying maps of degrees
/// `map_degs` to a word with factor degrees `factor_degs`.
pub fn application_parity(map_degs: &[Degree], factor_degs: &[Degree]) -> bool {
    assert_eq!(map_degs.len(), factor_degs.len());
    let mut parity = 0i64;
    let mut prefix = 0i64;
    for (phi, x) in map_degs.iter().zip(factor_degs) {
        parity += phi * prefix;
        prefix += x;
    }
    parity.rem_euclid(2) == 1
}

/// Koszul sign of the permutation sending symbol `i` (degree `degs[i]`) to
/// position `target[i]`: one factor (-1)^{|a||b|} per inverted pair.
pub fn reorder_sign(degs: &[Degree], target: &[usize]) -> i64 {
    assert_eq!(degs.len(), target.len());
    let mut parity = 0i64;
    for i in 0..degs.len() {
        for j in (i + 1)..degs.len() {
            if target[i] > target[j] {
                parity += degs[i] * degs[j];
            }
        }
    }
    if parity.rem_euclid(2) == 1 {
        -1
    } else {
        1
    }
}

/// One factor of a map tuple: either an identity (kept symbolic so that big
/// bases never materialize identity matrices) or an actual graded map.
pub enum MapFactor<'a, F> {
    Identity(&'a Basis),
    Map(&'a GradedMap<F>),
}

impl<'a, F: Field> MapFactor<'a, F> {
    pub fn degree(&self) -> Degree {
        match self {
            MapFactor::Identity(_) => 0,
            MapFactor::Map(m) => m.degree(),
        }
    }

    fn source(&self) -> &Basis {
        match self {
            MapFactor::Identity(b) => b,
            MapFactor::Map(m) => m.src(),
        }
    }

    fn image(&self, idx: usize) -> SparseVec<F> {
        match self {
            MapFactor::Identity(_) => SparseVec::unit(idx, F::one()),
            MapFactor::Map(m) => m.apply_index(idx),
        }
    }
}

/// Apply a tuple of maps to one basis word, with the global Koszul sign.
/// Returns the expansion as (target word, coefficient) pairs in
/// lexicographic word order.
pub fn koszul_apply<F: Field>(
    maps: &[MapFactor<'_, F>],
    word: &[usize],
    coeff: &F,
) -> Vec<(Vec<usize>, F)> {
    assert_eq!(maps.len(), word.len(), "arity mismatch");
    let factor_degs: Vec<Degree> =
        maps.iter().zip(word).map(|(m, &i)| m.source().degree(i)).collect();
    let map_degs: Vec<Degree> = maps.iter().map(|m| m.degree()).collect();
    let mut c = coeff.clone();
    if application_parity(&map_degs, &factor_degs) {
        c = -c;
    }
    let mut expansion: Vec<(Vec<usize>, F)> = vec![(Vec::with_capacity(word.len()), c)];
    for (m, &i) in maps.iter().zip(word) {
        let image = m.image(i);
        if image.is_empty() {
            return Vec::new();
        }
        let mut next = Vec::with_capacity(expansion.len() * image.len());
        for (prefix, pc) in &expansion {
            for (t, tc) in image.iter() {
                let mut w = prefix.clone();
                w.push(*t);
                next.push((w, pc.clone() * tc.clone()));
            }
        }
        expansion = next;
    }
    expansion
}

/// A sparse element of a tensor product of graded bases, keyed by basis
/// words. This is the value-level counterpart of `koszul_apply` for tests
/// and oracles; hot paths work word by word instead.
#[derive(Clone, Debug)]
pub struct TensorElement<F> {
    pub factors: Vec<Arc<Basis>>,
    pub terms: std::collections::BTreeMap<Vec<usize>, F>,
}

impl<F: Field> TensorElement<F> {
    pub fn zero(factors: Vec<Arc<Basis>>) -> Self {
        TensorElement { factors, terms: Default::default() }
    }

    pub fn word(factors: Vec<Arc<Basis>>, word: Vec<usize>, coeff: F) -> Self {
        let mut t = TensorElement::zero(factors);
        t.add_word(word, coeff);
        t
    }

    pub fn add_word(&mut self, word: Vec<usize>, coeff: F) {
        assert_eq!(word.len(), self.factors.len());
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(word).or_insert_with(F::zero);
        *entry = entry.clone() + coeff;
        // Keep the support exact.
        self.terms.retain(|_, v| !v.is_zero());
    }

    pub fn degree_of(&self, word: &[usize]) -> Degree {
        word.iter().zip(&self.factors).map(|(&i, b)| b.degree(i)).sum()
    }

    pub fn apply(&self, maps: &[MapFactor<'_, F>]) -> TensorElement<F> {
        let out_factors: Vec<Arc<Basis>> = maps
            .iter()
            .zip(&self.factors)
            .map(|(m, b)| match m {
                MapFactor::Identity(_) => b.clone(),
                MapFactor::Map(g) => g.dst().clone(),
            })
            .collect();
        let mut out = TensorElement::zero(out_factors);
        for (word, c) in &self.terms {
            for (w, v) in koszul_apply(maps, word, c) {
                out.add_word(w, v);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Rational};
    use crate::gradedcx::GradedModule;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn degree_zero_maps_introduce_no_signs() {
        let m = GradedModule::new(vec![("v".into(), 3), ("w".into(), 5)]).unwrap();
        let id = GradedMap::<Rational>::identity(m.basis.clone());
        let out = koszul_apply(
            &[MapFactor::Map(&id), MapFactor::Map(&id)],
            &[0, 1],
            &q(1),
        );
        assert_eq!(out, vec![(vec![0, 1], q(1))]);
    }

    #[test]
    fn single_swap_sign() {
        // (id, d)(v ⊗ w) with |v| odd and |d| = -1 picks up one sign.
        let m = GradedModule::new(vec![("v".into(), 1), ("w".into(), 1), ("dw".into(), 0)])
            .unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(1, 2, q(1));
        let out = koszul_apply(
            &[MapFactor::Identity(&m.basis), MapFactor::Map(&d)],
            &[0, 1],
            &q(1),
        );
        assert_eq!(out, vec![(vec![0, 2], q(-1))]);
    }

    #[test]
    fn leibniz_shape_signs() {
        // (d, d·)(v⊗w), |v| = |w| = 1: applying (d ⊗ id) then (id ⊗ d) by
        // brute-force sign enumeration gives (dv ⊗ w) - (v ⊗ dw).
        let m = GradedModule::new(vec![
            ("v".into(), 1),
            ("w".into(), 1),
            ("dv".into(), 0),
            ("dw".into(), 0),
        ])
        .unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(0, 2, q(1));
        d.add_entry(1, 3, q(1));
        let first = koszul_apply(
            &[MapFactor::Map(&d), MapFactor::Identity(&m.basis)],
            &[0, 1],
            &q(1),
        );
        assert_eq!(first, vec![(vec![2, 1], q(1))]);
        let second = koszul_apply(
            &[MapFactor::Identity(&m.basis), MapFactor::Map(&d)],
            &[0, 1],
            &q(1),
        );
        assert_eq!(second, vec![(vec![0, 3], q(-1))]);
    }

    #[test]
    fn multiplicativity_brute_force() {
        // Applying phi∘psi factorwise equals two koszul_apply passes, with
        // the sign (-1)^{sum |phi_j||psi_i|} pattern absorbed by the rule.
        // Checked by enumerating words of arity <= 3 over a small module.
        let m = GradedModule::new(vec![("a".into(), 0), ("b".into(), 1), ("c".into(), 2)])
            .unwrap();
        let mut phi = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        phi.add_entry(1, 0, q(2));
        phi.add_entry(2, 1, q(3));
        let mut psi = GradedMap::zero(m.basis.clone(), m.basis.clone(), 1);
        psi.add_entry(0, 1, q(5));
        psi.add_entry(1, 2, q(7));
        let comp = phi.compose(&psi);

        for arity in 1..=3usize {
            let mut words = vec![vec![]];
            for _ in 0..arity {
                let mut next = Vec::new();
                for w in &words {
                    for i in 0..3 {
                        let mut v: Vec<usize> = w.clone();
                        v.push(i);
                        next.push(v);
                    }
                }
                words = next;
            }
            for word in words {
                let comp_maps: Vec<MapFactor<Rational>> =
                    (0..arity).map(|_| MapFactor::Map(&comp)).collect();
                let direct = koszul_apply(&comp_maps, &word, &q(1));

                let psi_maps: Vec<MapFactor<Rational>> =
                    (0..arity).map(|_| MapFactor::Map(&psi)).collect();
                let phi_maps: Vec<MapFactor<Rational>> =
                    (0..arity).map(|_| MapFactor::Map(&phi)).collect();
                let mut two_pass: std::collections::BTreeMap<Vec<usize>, Rational> =
                    Default::default();
                // Interchange sign: tensor-of-composites vs composite of
                // tensors costs (-1)^{sum_{i<j} |phi_j||psi_i|}.
                let interchange = application_parity(
                    &vec![-1; arity],
                    &vec![1; arity],
                );
                for (mid, c) in koszul_apply(&psi_maps, &word, &q(1)) {
                    for (end, c2) in koszul_apply(&phi_maps, &mid, &c) {
                        let signed = if interchange { -c2 } else { c2 };
                        let e = two_pass.entry(end).or_insert_with(|| q(0));
                        *e = e.clone() + signed;
                    }
                }
                two_pass.retain(|_, v| !num_traits::Zero::is_zero(v));
                let mut direct_map: std::collections::BTreeMap<Vec<usize>, Rational> =
                    Default::default();
                for (w, c) in direct {
                    direct_map.insert(w, c);
                }
                assert_eq!(direct_map, two_pass, "word {word:?}");
            }
        }
    }

    #[test]
    fn reorder_sign_counts_odd_crossings() {
        // Swapping two odd symbols is -1; even symbols commute freely.
        assert_eq!(reorder_sign(&[1, 1], &[1, 0]), -1);
        assert_eq!(reorder_sign(&[2, 1], &[1, 0]), 1);
        assert_eq!(reorder_sign(&[1, 1, 1], &[2, 1, 0]), -1);
        assert_eq!(reorder_sign(&[1, 1], &[0, 1]), 1);
    }
}
