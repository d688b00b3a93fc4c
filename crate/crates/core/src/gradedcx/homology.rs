//! Homology of a chain complex over a field, with a pinned choice of
//! representing cycles and a projection splitting them off.
//!
//! Representatives follow echelon pivot order so reruns are reproducible;
//! any verified section would do, the determinism is our own discipline.

use crate::field::Field;
use crate::linalg::{self, Matrix};

use super::{ChainComplex, Degree, GradedMap, GradedModule, Window};

/// Homology data in a degree window: `module` has zero differential,
/// `representatives: H -> C` lands in cycles and splits `projection: C -> H`.
/// On cycles the projection is the canonical quotient map; elsewhere it is an
/// arbitrary deterministic extension.
#[derive(Clone, Debug)]
pub struct Homology<F> {
    pub complex: ChainComplex<F>,
    pub representatives: GradedMap<F>,
    pub projection: GradedMap<F>,
}

pub fn homology<F: Field>(c: &ChainComplex<F>, window: Window) -> Homology<F> {
    let basis = c.basis();
    let mut elements: Vec<(String, Degree)> = Vec::new();
    let mut used_names = std::collections::BTreeSet::new();
    // (degree, local representative coords, H-local index)
    let mut reps_by_degree: Vec<(Degree, Vec<Vec<F>>, Vec<Vec<F>>)> = Vec::new();

    for k in window.iter() {
        let n_k = basis.dim_in(k);
        if n_k == 0 {
            continue;
        }
        let d_k = block_or_zero(&c.differential, k, basis.dim_in(k - 1), n_k);
        let d_up = block_or_zero(&c.differential, k + 1, n_k, basis.dim_in(k + 1));
        let cycles = linalg::kernel_basis(&d_k);
        let boundaries: Vec<Vec<F>> = {
            let red = linalg::rref(&d_up);
            red.pivots.iter().map(|&col| d_up.column(col)).collect()
        };
        let nb = boundaries.len();
        let candidates: Vec<Vec<F>> =
            boundaries.iter().chain(cycles.iter()).cloned().collect();
        let m = Matrix::from_columns(n_k, candidates.clone());
        let red = linalg::rref(&m);
        let rep_cols: Vec<Vec<F>> = red
            .pivots
            .iter()
            .filter(|&&p| p >= nb)
            .map(|&p| candidates[p].clone())
            .collect();

        for rep in &rep_cols {
            let lead = rep
                .iter()
                .position(|v| !v.is_zero())
                .expect("representative is nonzero");
            let lead_name = c.module.name(basis.indices_in(k)[lead]);
            let mut name = format!("[{lead_name}]");
            let mut tick = 1;
            while !used_names.insert(name.clone()) {
                tick += 1;
                name = format!("[{lead_name}#{tick}]");
            }
            elements.push((name, k));
        }

        let proj_rows = projection_rows(n_k, &boundaries, &rep_cols);
        reps_by_degree.push((k, rep_cols, proj_rows));
    }

    let h_module = GradedModule::new(elements).expect("names already deduplicated");
    let mut representatives = GradedMap::zero(h_module.basis.clone(), basis.clone(), 0);
    let mut projection = GradedMap::zero(basis.clone(), h_module.basis.clone(), 0);
    for (k, reps, proj) in &reps_by_degree {
        let h_ids = h_module.basis.indices_in(*k).to_vec();
        let c_ids = basis.indices_in(*k).to_vec();
        for (hl, rep) in reps.iter().enumerate() {
            for (cl, v) in rep.iter().enumerate() {
                representatives.add_entry(h_ids[hl], c_ids[cl], v.clone());
            }
        }
        for (hl, row) in proj.iter().enumerate() {
            for (cl, v) in row.iter().enumerate() {
                projection.add_entry(c_ids[cl], h_ids[hl], v.clone());
            }
        }
    }

    Homology {
        complex: ChainComplex::zero_differential(h_module),
        representatives,
        projection,
    }
}

/// Rows of the projection: complete [boundaries | reps] to a basis with
/// standard vectors chosen greedily, invert, and keep the rows dual to the
/// representatives. The result kills boundaries and splits the reps.
fn projection_rows<F: Field>(
    n: usize,
    boundaries: &[Vec<F>],
    reps: &[Vec<F>],
) -> Vec<Vec<F>> {
    let mut cols: Vec<Vec<F>> = boundaries.iter().chain(reps.iter()).cloned().collect();
    let mut current_rank = {
        let m = Matrix::from_columns(n, cols.clone());
        linalg::rank(&m)
    };
    for i in 0..n {
        if current_rank == n {
            break;
        }
        let mut e = vec![F::zero(); n];
        e[i] = F::one();
        let mut trial = cols.clone();
        trial.push(e.clone());
        let r = linalg::rank(&Matrix::from_columns(n, trial));
        if r > current_rank {
            cols.push(e);
            current_rank = r;
        }
    }
    assert_eq!(current_rank, n, "completion failed");
    let s = Matrix::from_columns(n, cols);
    let red = linalg::rref(&s);
    assert_eq!(red.pivots.len(), n, "basis matrix must be invertible");
    let sinv = red.transform;
    (0..reps.len())
        .map(|r| {
            let row = boundaries.len() + r;
            (0..n).map(|j| sinv.get(row, j).clone()).collect()
        })
        .collect()
}

fn block_or_zero<F: Field>(
    map: &GradedMap<F>,
    k: Degree,
    rows: usize,
    cols: usize,
) -> Matrix<F> {
    match map.block(k) {
        Some(b) => b.clone(),
        None => Matrix::zero(rows, cols),
    }
}

/// A quasi-isomorphism from the homology (zero differential) into the
/// complex, landing in cycles and inducing the identity on homology.
pub fn cycle_choosing_map<F: Field>(
    c: &ChainComplex<F>,
    window: Window,
) -> (ChainComplex<F>, GradedMap<F>) {
    let h = homology(c, window);
    (h.complex, h.representatives)
}

#[derive(Clone, Debug)]
pub struct QuasiIsoReport {
    /// (degree, dim H source, dim H target, induced map is an isomorphism)
    pub per_degree: Vec<(Degree, usize, usize, bool)>,
    pub pass: bool,
}

/// Whether a degree-0 chain map induces isomorphisms on homology in the
/// window. Rejects maps that are not chain maps.
pub fn is_quasi_iso<F: Field>(
    f: &GradedMap<F>,
    src: &ChainComplex<F>,
    dst: &ChainComplex<F>,
    window: Window,
) -> Result<QuasiIsoReport, String> {
    if f.degree() != 0 {
        return Err(format!("expected a degree-0 map, got degree {}", f.degree()));
    }
    let left = dst.differential.compose(f);
    let right = f.compose(&src.differential);
    if !left.eq_map(&right) {
        return Err("not a chain map".into());
    }
    let hs = homology(src, window);
    let hd = homology(dst, window);
    let induced = hd.projection.compose(&f.compose(&hs.representatives));
    let mut per_degree = Vec::new();
    let mut pass = true;
    for k in window.iter() {
        let ds = hs.complex.basis().dim_in(k);
        let dt = hd.complex.basis().dim_in(k);
        let ok = if ds != dt {
            false
        } else if ds == 0 {
            true
        } else {
            let block = block_or_zero(&induced, k, dt, ds);
            linalg::rank(&block) == ds
        };
        pass &= ok;
        per_degree.push((k, ds, dt, ok));
    }
    Ok(QuasiIsoReport { per_degree, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Rational};

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    /// Exterior algebra on e1, e2, e3 in degree -1 with d(e3) = e1 e2.
    pub(crate) fn heisenberg() -> ChainComplex<Rational> {
        let m = GradedModule::new(vec![
            ("1".into(), 0),
            ("e1".into(), -1),
            ("e2".into(), -1),
            ("e3".into(), -1),
            ("e1e2".into(), -2),
            ("e1e3".into(), -2),
            ("e2e3".into(), -2),
            ("e1e2e3".into(), -3),
        ])
        .unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        // Leibniz kills every other monomial: d(e1e3) = -e1·e1e2 = 0 and so on.
        d.add_entry(3, 4, q(1));
        ChainComplex::new(m, d).unwrap()
    }

    #[test]
    fn zero_differential_returns_everything() {
        let m = GradedModule::new(vec![("a".into(), 0), ("b".into(), 1)]).unwrap();
        let c: ChainComplex<Rational> = ChainComplex::zero_differential(m);
        let h = homology(&c, Window::new(-1, 2));
        assert_eq!(h.complex.module.dim(), 2);
        // representatives = identity up to naming
        let id = GradedMap::identity(c.basis().clone());
        let conj = h.representatives.compose(&h.projection);
        assert!(conj.eq_map(&id));
    }

    #[test]
    fn acyclic_two_term() {
        let m = GradedModule::new(vec![("x".into(), 1), ("y".into(), 0)]).unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(0, 1, q(1));
        let c = ChainComplex::new(m, d).unwrap();
        let h = homology(&c, Window::new(-1, 2));
        assert_eq!(h.complex.module.dim(), 0);
    }

    #[test]
    fn heisenberg_dimensions_and_representatives() {
        let c = heisenberg();
        let h = homology(&c, Window::new(-4, 1));
        // Rank oracle: dim H_k = dim ker d_k - rank d_{k+1} gives (1,2,2,1).
        let dims: Vec<usize> =
            (0..4).map(|i| h.complex.basis().dim_in(-i)).collect();
        assert_eq!(dims, vec![1, 2, 2, 1]);
        assert_eq!(
            h.complex.module.names,
            vec!["[e1e2e3]", "[e1e3]", "[e2e3]", "[e1]", "[e2]", "[1]"]
        );
        // proj ∘ reps = id on H.
        let conj = h.projection.compose(&h.representatives);
        assert!(conj.eq_map(&GradedMap::identity(h.complex.basis().clone())));
        // Representatives are cycles.
        assert!(c.differential.compose(&h.representatives).is_zero());
        // Projection kills boundaries: proj(e1e2) = 0.
        assert!(h.projection.apply_index(4).is_empty());
    }

    #[test]
    fn cycle_choosing_map_is_quasi_iso() {
        let c = heisenberg();
        let w = Window::new(-4, 1);
        let (h, f) = cycle_choosing_map(&c, w);
        let report = is_quasi_iso(&f, &h, &c, w).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn zero_map_fails() {
        let c = heisenberg();
        let w = Window::new(-4, 1);
        let zero = GradedMap::zero(c.basis().clone(), c.basis().clone(), 0);
        let report = is_quasi_iso(&zero, &c, &c, w).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn identity_passes() {
        let c = heisenberg();
        let w = Window::new(-4, 1);
        let id = GradedMap::identity(c.basis().clone());
        assert!(is_quasi_iso(&id, &c, &c, w).unwrap().pass);
    }

    #[test]
    fn rank_nullity_across_degrees() {
        let c = heisenberg();
        let h = homology(&c, Window::new(-4, 1));
        for k in -3..=0i64 {
            let nk = c.basis().dim_in(k);
            let dk = super::block_or_zero(&c.differential, k, c.basis().dim_in(k - 1), nk);
            let dup =
                super::block_or_zero(&c.differential, k + 1, nk, c.basis().dim_in(k + 1));
            let expected = nk - linalg::rank(&dk) - linalg::rank(&dup);
            assert_eq!(h.complex.basis().dim_in(k), expected, "degree {k}");
        }
    }
}
