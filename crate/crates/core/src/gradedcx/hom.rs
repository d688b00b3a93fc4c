//! The inner Hom complex of two chain complexes, one degree at a time.
//!
//! `Hom(M, N)_n = prod_k Hom(M_k, N_{n+k})` with differential
//! `∂f = d_N ∘ f - (-1)^n f ∘ d_M`. A `HomSlice` enumerates a basis of one
//! such degree so maps can be flattened into coordinate vectors for the
//! exact solvers, and `differential_matrix` realizes ∂ as a sparse system.
//! The source side is sparse because in the transfer the source is a cofree
//! slice, which can be large while only its low degrees matter.

use std::sync::Arc;

use crate::field::Field;
use crate::linalg::{SparseSystem, SparseVec};

use super::{Basis, Degree, GradedMap, SparseMap};

/// Basis enumeration of `Hom(src, dst)` in one map degree. Elements are
/// ordered by source degree, then source position, then target position.
#[derive(Clone, Debug)]
pub struct HomSlice {
    src: Arc<Basis>,
    dst: Arc<Basis>,
    degree: Degree,
    segments: Vec<Segment>,
}

#[derive(Clone, Debug)]
struct Segment {
    src_degree: Degree,
    offset: usize,
    src_dim: usize,
    dst_dim: usize,
}

impl HomSlice {
    pub fn new(src: Arc<Basis>, dst: Arc<Basis>, degree: Degree) -> Self {
        let mut segments = Vec::new();
        let mut offset = 0usize;
        for k in src.degrees_present() {
            let src_dim = src.dim_in(k);
            let dst_dim = dst.dim_in(k + degree);
            if src_dim == 0 || dst_dim == 0 {
                continue;
            }
            segments.push(Segment { src_degree: k, offset, src_dim, dst_dim });
            offset += src_dim * dst_dim;
        }
        HomSlice { src, dst, degree, segments }
    }

    pub fn dim(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.src_dim * s.dst_dim)
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    /// Source degrees contributing to this slice.
    pub fn source_degrees(&self) -> Vec<Degree> {
        self.segments.iter().map(|s| s.src_degree).collect()
    }

    fn segment(&self, src_degree: Degree) -> Option<&Segment> {
        self.segments.iter().find(|s| s.src_degree == src_degree)
    }

    /// Coordinate of the elementary map (source element `j` -> target
    /// element `i`), if that pair lives in this slice.
    pub fn position(&self, j: usize, i: usize) -> Option<usize> {
        let k = self.src.degree(j);
        if self.dst.degree(i) != k + self.degree {
            return None;
        }
        let seg = self.segment(k)?;
        Some(seg.offset + self.src.pos_in_degree(j) * seg.dst_dim + self.dst.pos_in_degree(i))
    }

    /// The (source element, target element) pair at a coordinate.
    pub fn pair_at(&self, pos: usize) -> (usize, usize) {
        for seg in &self.segments {
            let size = seg.src_dim * seg.dst_dim;
            if pos < seg.offset + size {
                let local = pos - seg.offset;
                let sp = local / seg.dst_dim;
                let dp = local % seg.dst_dim;
                let j = self.src.indices_in(seg.src_degree)[sp];
                let i = self.dst.indices_in(seg.src_degree + self.degree)[dp];
                return (j, i);
            }
        }
        panic!("position {pos} out of range");
    }

    pub fn flatten_sparse<F: Field>(&self, map: &GradedMap<F>) -> SparseVec<F> {
        assert_eq!(map.degree(), self.degree, "degree mismatch in flatten");
        let mut out = SparseVec::new();
        for (j, i, c) in map.nonzero_entries() {
            let pos = self
                .position(j, i)
                .unwrap_or_else(|| panic!("entry ({j},{i}) outside hom slice"));
            out.add(pos, c);
        }
        out
    }

    pub fn unflatten<F: Field>(&self, coords: &SparseVec<F>) -> GradedMap<F> {
        let mut map = GradedMap::zero(self.src.clone(), self.dst.clone(), self.degree);
        for (pos, c) in coords.iter() {
            let (j, i) = self.pair_at(*pos);
            map.add_entry(j, i, c.clone());
        }
        map
    }
}

/// ∂φ = d_dst ∘ φ - (-1)^{|φ|} φ ∘ d_src, both differentials module-sized.
pub fn hom_differential<F: Field>(
    phi: &GradedMap<F>,
    src_diff: &GradedMap<F>,
    dst_diff: &GradedMap<F>,
) -> GradedMap<F> {
    let left = dst_diff.compose(phi);
    let right = phi.compose(src_diff);
    if phi.degree().rem_euclid(2) == 0 {
        left.sub(&right)
    } else {
        left.add(&right)
    }
}

/// Same formula when the source carries a sparse induced differential.
pub fn hom_differential_sliced<F: Field>(
    phi: &GradedMap<F>,
    src_diff: &SparseMap<F>,
    dst_diff: &GradedMap<F>,
) -> GradedMap<F> {
    let left = dst_diff.compose(phi);
    let right = src_diff.then(phi);
    if phi.degree().rem_euclid(2) == 0 {
        left.sub(&right)
    } else {
        left.add(&right)
    }
}

/// The matrix of ∂ from map degree `degree` to `degree - 1`, as a sparse
/// system together with the two slices it connects. `src_diff` must carry
/// every column whose source degree contributes to either slice.
pub fn differential_matrix<F: Field>(
    src_diff: &SparseMap<F>,
    dst_diff: &GradedMap<F>,
    src: Arc<Basis>,
    dst: Arc<Basis>,
    degree: Degree,
) -> (HomSlice, HomSlice, SparseSystem<F>) {
    let domain = HomSlice::new(src.clone(), dst.clone(), degree);
    let codomain = HomSlice::new(src.clone(), dst.clone(), degree - 1);
    let mut sys = SparseSystem::new(codomain.dim(), domain.dim());
    let minus = degree.rem_euclid(2) == 0;

    // d_dst ∘ E, one batch per nonzero entry of d_dst.
    for (i, i2, c) in dst_diff.nonzero_entries() {
        let k = dst.degree(i) - degree;
        for &j in src.indices_in(k) {
            let (Some(p), Some(q)) = (domain.position(j, i), codomain.position(j, i2)) else {
                continue;
            };
            sys.columns[p].add(q, c.clone());
        }
    }

    // -(-1)^{deg} E ∘ d_src, one batch per nonzero column of the sparse
    // source differential landing in a domain degree.
    for (j2, col) in src_diff.columns() {
        for (j, c) in col.iter() {
            let kt = src.degree(*j) + degree;
            for &i in dst.indices_in(kt) {
                let (Some(p), Some(q)) = (domain.position(*j, i), codomain.position(j2, i))
                else {
                    continue;
                };
                let v = if minus { -c.clone() } else { c.clone() };
                sys.columns[p].add(q, v);
            }
        }
    }
    (domain, codomain, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Rational};
    use crate::gradedcx::{ChainComplex, GradedModule};

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn two_term() -> ChainComplex<Rational> {
        let m = GradedModule::new(vec![("x".into(), 1), ("y".into(), 0)]).unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(0, 1, q(1));
        ChainComplex::new(m, d).unwrap()
    }

    #[test]
    fn identity_is_a_cycle() {
        let c = two_term();
        let id = GradedMap::identity(c.basis().clone());
        let del = hom_differential(&id, &c.differential, &c.differential);
        assert!(del.is_zero());
    }

    #[test]
    fn differential_is_a_cycle_in_hom() {
        let c = two_term();
        let del = hom_differential(&c.differential, &c.differential, &c.differential);
        assert!(del.is_zero());
    }

    #[test]
    fn worked_example() {
        // M = span(x deg 1, y deg 0), dx = y; phi: x -> x, y -> 0 of degree 0.
        // Expanding both terms by hand gives ∂phi: x -> y, y -> 0.
        let c = two_term();
        let mut phi = GradedMap::zero(c.basis().clone(), c.basis().clone(), 0);
        phi.add_entry(0, 0, q(1));
        let del = hom_differential(&phi, &c.differential, &c.differential);
        let mut expected = GradedMap::zero(c.basis().clone(), c.basis().clone(), -1);
        expected.add_entry(0, 1, q(1));
        assert!(del.eq_map(&expected));
    }

    #[test]
    fn flatten_unflatten_roundtrip() {
        let c = two_term();
        let slice = HomSlice::new(c.basis().clone(), c.basis().clone(), 0);
        assert_eq!(slice.dim(), 2);
        let mut phi = GradedMap::zero(c.basis().clone(), c.basis().clone(), 0);
        phi.add_entry(0, 0, q(3));
        phi.add_entry(1, 1, q(-2));
        let flat = slice.flatten_sparse(&phi);
        let back = slice.unflatten(&flat);
        assert!(back.eq_map(&phi));
    }

    #[test]
    fn matrix_realizes_hom_differential() {
        let c = two_term();
        let sparse_d = SparseMap::from_graded(&c.differential);
        for deg in [-1i64, 0, 1] {
            let (dom, cod, sys) = differential_matrix(
                &sparse_d,
                &c.differential,
                c.basis().clone(),
                c.basis().clone(),
                deg,
            );
            for pos in 0..dom.dim() {
                let (j, i) = dom.pair_at(pos);
                let mut e = GradedMap::zero(c.basis().clone(), c.basis().clone(), deg);
                e.add_entry(j, i, q(1));
                let expected = hom_differential(&e, &c.differential, &c.differential);
                let got = cod.unflatten(&sys.columns[pos]);
                assert!(got.eq_map(&expected), "degree {deg} column {pos}");
            }
        }
    }

    #[test]
    fn squares_to_zero_on_random_maps() {
        use crate::field::GfP;
        let p = 5u64;
        let m = GradedModule::new(vec![
            ("a".into(), 2),
            ("b".into(), 1),
            ("c".into(), 1),
            ("e".into(), 0),
        ])
        .unwrap();
        // d(a) = 2b + 3c, d(b) = e, d(c) = -2e makes d² a = (2 - 2·3)e = -4e ≡ e... pick
        // d(b) = e, d(c) = e and coefficients 2, 3 with 2 + 3 = 5 ≡ 0 mod 5.
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(0, 1, GfP::new(2, p));
        d.add_entry(0, 2, GfP::new(3, p));
        d.add_entry(1, 3, GfP::new(1, p));
        d.add_entry(2, 3, GfP::new(1, p));
        let cplx = ChainComplex::new(m.clone(), d).unwrap();
        let mut seed = 7u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed % p) as i64
        };
        for deg in [-1i64, 0, 1] {
            for _ in 0..10 {
                let mut phi = GradedMap::zero(m.basis.clone(), m.basis.clone(), deg);
                for j in 0..m.dim() {
                    for i in 0..m.dim() {
                        if m.basis.degree(i) == m.basis.degree(j) + deg {
                            phi.add_entry(j, i, GfP::new(next(), p));
                        }
                    }
                }
                let once = hom_differential(&phi, &cplx.differential, &cplx.differential);
                let twice = hom_differential(&once, &cplx.differential, &cplx.differential);
                assert!(twice.is_zero());
            }
        }
    }
}
