//! Graded modules, chain complexes, and degree-homogeneous linear maps.
//!
//! Gradings are homological: differentials have degree -1. Maps are stored as
//! one dense block per source degree, so a map out of a huge graded space
//! costs only as much as the degrees it actually touches.

pub mod hom;
pub mod homology;
pub mod tensor;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::field::Field;
use crate::linalg::{Matrix, SparseVec};

pub type Degree = i64;

/// Inclusive degree range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: Degree,
    pub hi: Degree,
}

impl Window {
    pub fn new(lo: Degree, hi: Degree) -> Self {
        assert!(lo <= hi, "empty window");
        Window { lo, hi }
    }

    /// Support of the basis widened by one degree on each side.
    pub fn around(basis: &Basis) -> Self {
        match (basis.min_degree(), basis.max_degree()) {
            (Some(lo), Some(hi)) => Window { lo: lo - 1, hi: hi + 1 },
            _ => Window { lo: 0, hi: 0 },
        }
    }

    pub fn contains(&self, d: Degree) -> bool {
        self.lo <= d && d <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = Degree> {
        self.lo..=self.hi
    }
}

/// An ordered basis with a degree for every element, plus per-degree index
/// tables. Shared by plain modules and by cofree-slice bases.
#[derive(Debug, PartialEq, Eq)]
pub struct Basis {
    degrees: Vec<Degree>,
    by_degree: BTreeMap<Degree, Vec<usize>>,
    pos_in_degree: Vec<usize>,
}

impl Basis {
    pub fn new(degrees: Vec<Degree>) -> Arc<Self> {
        let mut by_degree: BTreeMap<Degree, Vec<usize>> = BTreeMap::new();
        let mut pos_in_degree = vec![0usize; degrees.len()];
        for (i, &d) in degrees.iter().enumerate() {
            let bucket = by_degree.entry(d).or_default();
            pos_in_degree[i] = bucket.len();
            bucket.push(i);
        }
        Arc::new(Basis { degrees, by_degree, pos_in_degree })
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self, i: usize) -> Degree {
        self.degrees[i]
    }

    pub fn dim_in(&self, d: Degree) -> usize {
        self.by_degree.get(&d).map_or(0, |v| v.len())
    }

    pub fn indices_in(&self, d: Degree) -> &[usize] {
        self.by_degree.get(&d).map_or(&[], |v| v.as_slice())
    }

    /// Position of element `i` within its own degree bucket.
    pub fn pos_in_degree(&self, i: usize) -> usize {
        self.pos_in_degree[i]
    }

    pub fn degrees_present(&self) -> impl Iterator<Item = Degree> + '_ {
        self.by_degree.keys().copied()
    }

    pub fn min_degree(&self) -> Option<Degree> {
        self.by_degree.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<Degree> {
        self.by_degree.keys().last().copied()
    }
}

/// A graded module: a basis plus element names for I/O and reports.
#[derive(Clone, Debug)]
pub struct GradedModule {
    pub names: Vec<String>,
    pub basis: Arc<Basis>,
}

impl GradedModule {
    pub fn new(elements: Vec<(String, Degree)>) -> Result<Self, String> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in &elements {
            if !seen.insert(name.clone()) {
                return Err(format!("duplicate basis name '{name}'"));
            }
        }
        let (names, degrees) = elements.into_iter().unzip();
        Ok(GradedModule { names, basis: Basis::new(degrees) })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }
}

/// A homogeneous linear map between graded bases, stored per source degree.
/// The block at source degree `k` maps into degree `k + degree`; rows and
/// columns follow the per-degree index tables of the two bases. Absent blocks
/// are zero.
#[derive(Clone, Debug)]
pub struct GradedMap<F> {
    src: Arc<Basis>,
    dst: Arc<Basis>,
    degree: Degree,
    blocks: BTreeMap<Degree, Matrix<F>>,
}

impl<F: Field> GradedMap<F> {
    pub fn zero(src: Arc<Basis>, dst: Arc<Basis>, degree: Degree) -> Self {
        GradedMap { src, dst, degree, blocks: BTreeMap::new() }
    }

    pub fn identity(basis: Arc<Basis>) -> Self {
        let mut map = GradedMap::zero(basis.clone(), basis, 0);
        for i in 0..map.src.dim() {
            map.add_entry(i, i, F::one());
        }
        map
    }

    pub fn src(&self) -> &Arc<Basis> {
        &self.src
    }

    pub fn dst(&self) -> &Arc<Basis> {
        &self.dst
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    fn block_shape(&self, k: Degree) -> (usize, usize) {
        (self.dst.dim_in(k + self.degree), self.src.dim_in(k))
    }

    pub fn block(&self, k: Degree) -> Option<&Matrix<F>> {
        self.blocks.get(&k)
    }

    fn block_mut(&mut self, k: Degree) -> &mut Matrix<F> {
        let (rows, cols) = self.block_shape(k);
        self.blocks.entry(k).or_insert_with(|| Matrix::zero(rows, cols))
    }

    /// Add `c` to the matrix entry sending source element `j` to target
    /// element `i`. Panics if the degrees are inconsistent with the map's.
    pub fn add_entry(&mut self, j: usize, i: usize, c: F) {
        if c.is_zero() {
            return;
        }
        let k = self.src.degree(j);
        assert_eq!(
            self.dst.degree(i),
            k + self.degree,
            "entry violates homogeneity (degree {} map, source degree {k})",
            self.degree
        );
        let col = self.src.pos_in_degree(j);
        let row = self.dst.pos_in_degree(i);
        let block = self.block_mut(k);
        let cur = block.get(row, col).clone();
        block.set(row, col, cur + c);
    }

    pub fn entry(&self, j: usize, i: usize) -> F {
        let k = self.src.degree(j);
        if self.dst.degree(i) != k + self.degree {
            return F::zero();
        }
        match self.blocks.get(&k) {
            Some(b) => b.get(self.dst.pos_in_degree(i), self.src.pos_in_degree(j)).clone(),
            None => F::zero(),
        }
    }

    /// Image of the `j`-th source basis element, as (target index, coeff).
    pub fn apply_index(&self, j: usize) -> SparseVec<F> {
        let k = self.src.degree(j);
        let mut out = SparseVec::new();
        if let Some(block) = self.blocks.get(&k) {
            let col = self.src.pos_in_degree(j);
            let targets = self.dst.indices_in(k + self.degree);
            for (row, &i) in targets.iter().enumerate() {
                let v = block.get(row, col);
                if !v.is_zero() {
                    out.add(i, v.clone());
                }
            }
        }
        out
    }

    pub fn apply_sparse(&self, v: &SparseVec<F>) -> SparseVec<F> {
        let mut out = SparseVec::new();
        for (j, c) in v.iter() {
            for (i, w) in self.apply_index(*j).iter() {
                out.add(*i, c.clone() * w.clone());
            }
        }
        out
    }

    /// self ∘ inner.
    pub fn compose(&self, inner: &GradedMap<F>) -> GradedMap<F> {
        debug_assert_eq!(self.src.as_ref(), inner.dst.as_ref(), "composition shape mismatch");
        let mut out =
            GradedMap::zero(inner.src.clone(), self.dst.clone(), self.degree + inner.degree);
        for (&k, inner_block) in &inner.blocks {
            if let Some(outer_block) = self.blocks.get(&(k + inner.degree)) {
                let prod = outer_block.mul(inner_block);
                if !prod.is_zero() {
                    out.blocks.insert(k, prod);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &GradedMap<F>) -> GradedMap<F> {
        assert_eq!(self.degree, other.degree, "degree mismatch in sum");
        debug_assert_eq!(self.src.as_ref(), other.src.as_ref());
        debug_assert_eq!(self.dst.as_ref(), other.dst.as_ref());
        let mut out = self.clone();
        for (&k,block) in &other.blocks {
            match out.blocks.get_mut(&k) {
                Some(mine) => {
                    for i in 0..mine.rows() {
                        for j in 0..mine.cols() {
                            let v = mine.get(i, j).clone() + block.get(i, j).clone();
                            mine.set(i, j, v);
                        }
                    }
                }
                None => {
                    out.blocks.insert(k, block.clone());
                }
            }
        }
        out.prune();
        out
    }

    pub fn sub(&self, other: &GradedMap<F>) -> GradedMap<F> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> GradedMap<F> {
        self.scale(&(-F::one()))
    }

    pub fn scale(&self, c: &F) -> GradedMap<F> {
        let mut out = GradedMap::zero(self.src.clone(), self.dst.clone(), self.degree);
        if c.is_zero() {
            return out;
        }
        for (&k, block) in &self.blocks {
            let mut m = block.clone();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    let v = m.get(i, j).clone() * c.clone();
                    m.set(i, j, v);
                }
            }
            out.blocks.insert(k, m);
        }
        out
    }

    fn prune(&mut self) {
        self.blocks.retain(|_, b| !b.is_zero());
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.is_zero())
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        let mut n = 0;
        for block in self.blocks.values() {
            for i in 0..block.rows() {
                for j in 0..block.cols() {
                    if !block.get(i, j).is_zero() {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// First nonzero entry as (source index, target index), in source order.
    pub fn first_support(&self) -> Option<(usize, usize)> {
        for (&k, block) in &self.blocks {
            let srcs = self.src.indices_in(k);
            let dsts = self.dst.indices_in(k + self.degree);
            for (col, &j) in srcs.iter().enumerate() {
                for (row, &i) in dsts.iter().enumerate() {
                    if !block.get(row, col).is_zero() {
                        return Some((j, i));
                    }
                }
            }
        }
        None
    }

    pub fn eq_map(&self, other: &GradedMap<F>) -> bool {
        self.sub(other).is_zero()
    }

    /// Same blocks, reinterpreted between structurally identical bases (for
    /// example a module and the arity-1 slice over it).
    pub fn rebased(&self, src: Arc<Basis>, dst: Arc<Basis>) -> GradedMap<F> {
        assert_eq!(self.src.as_ref(), src.as_ref(), "rebase changes source basis");
        assert_eq!(self.dst.as_ref(), dst.as_ref(), "rebase changes target basis");
        GradedMap { src, dst, degree: self.degree, blocks: self.blocks.clone() }
    }

    pub fn nonzero_entries(&self) -> Vec<(usize, usize, F)> {
        let mut out = Vec::new();
        for (&k, block) in &self.blocks {
            let srcs = self.src.indices_in(k);
            let dsts = self.dst.indices_in(k + self.degree);
            for (col, &j) in srcs.iter().enumerate() {
                for (row, &i) in dsts.iter().enumerate() {
                    let v = block.get(row, col);
                    if !v.is_zero() {
                        out.push((j, i, v.clone()));
                    }
                }
            }
        }
        out.sort_by_key(|(j, i, _)| (*j, *i));
        out
    }
}

/// A column-sparse homogeneous map, for maps whose source is a large slice
/// basis. Dense per-degree blocks would be quadratic in the slice dimension;
/// slice-to-slice maps (induced differentials, `C^n(f)`, components of
/// morphisms) store only their nonzero columns.
#[derive(Clone, Debug)]
pub struct SparseMap<F> {
    src: Arc<Basis>,
    dst: Arc<Basis>,
    degree: Degree,
    cols: BTreeMap<usize, SparseVec<F>>,
}

impl<F: Field> SparseMap<F> {
    pub fn zero(src: Arc<Basis>, dst: Arc<Basis>, degree: Degree) -> Self {
        SparseMap { src, dst, degree, cols: BTreeMap::new() }
    }

    pub fn from_graded(map: &GradedMap<F>) -> Self {
        let mut out = SparseMap::zero(map.src.clone(), map.dst.clone(), map.degree);
        for (j, i, c) in map.nonzero_entries() {
            out.add_entry(j, i, c);
        }
        out
    }

    pub fn src(&self) -> &Arc<Basis> {
        &self.src
    }

    pub fn dst(&self) -> &Arc<Basis> {
        &self.dst
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn add_entry(&mut self, j: usize, i: usize, c: F) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(self.dst.degree(i), self.src.degree(j) + self.degree);
        self.cols.entry(j).or_default().add(i, c);
    }

    pub fn set_column(&mut self, j: usize, col: SparseVec<F>) {
        if col.is_empty() {
            self.cols.remove(&j);
        } else {
            self.cols.insert(j, col);
        }
    }

    pub fn apply_index(&self, j: usize) -> SparseVec<F> {
        self.cols.get(&j).cloned().unwrap_or_default()
    }

    pub fn column(&self, j: usize) -> Option<&SparseVec<F>> {
        self.cols.get(&j)
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, &SparseVec<F>)> {
        self.cols.iter().map(|(j, c)| (*j, c))
    }

    pub fn is_zero(&self) -> bool {
        self.cols.values().all(|c| c.is_empty())
    }

    /// thin ∘ self, materialized as a dense-blocked map. Only columns whose
    /// image survives `thin` contribute, so the result stays module-sized.
    pub fn then(&self, thin: &GradedMap<F>) -> GradedMap<F> {
        debug_assert_eq!(thin.src.as_ref(), self.dst.as_ref());
        let mut out =
            GradedMap::zero(self.src.clone(), thin.dst.clone(), self.degree + thin.degree);
        for (&j, col) in &self.cols {
            let mut acc = SparseVec::new();
            for (i, c) in col.iter() {
                for (t, w) in thin.apply_index(*i).iter() {
                    acc.add(*t, c.clone() * w.clone());
                }
            }
            for (t, v) in acc.iter() {
                out.add_entry(j, *t, v.clone());
            }
        }
        out
    }
}

/// A chain complex: a module with a square-zero differential of degree -1.
#[derive(Clone, Debug)]
pub struct ChainComplex<F> {
    pub module: GradedModule,
    pub differential: GradedMap<F>,
}

impl<F: Field> ChainComplex<F> {
    pub fn new(module: GradedModule, differential: GradedMap<F>) -> Result<Self, String> {
        assert_eq!(differential.degree(), -1, "differential must have degree -1");
        let dd = differential.compose(&differential);
        if let Some((j, _)) = dd.first_support() {
            return Err(format!("d\u{b2} != 0 on basis element '{}'", module.name(j)));
        }
        Ok(ChainComplex { module, differential })
    }

    pub fn zero_differential(module: GradedModule) -> Self {
        let d = GradedMap::zero(module.basis.clone(), module.basis.clone(), -1);
        ChainComplex { module, differential: d }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.module.basis
    }
}
