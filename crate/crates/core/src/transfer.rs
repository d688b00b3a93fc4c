//! The transfer and comparison algorithms.
//!
//! Each runs the same inductive shape: at arity n, compute an obstruction,
//! check the two identities the induction guarantees (their failure is a
//! bug, never bad input), then repair the arity-n terms with one exact
//! solve and one two-part decomposition in the relevant Hom complexes. A
//! solve with no solution means the quasi-isomorphism hypothesis genuinely
//! fails at that arity; the partial result below it is still valid and
//! rides along with the failure.
//!
//! Every choice made here is noncanonical; determinism comes from the pivot
//! policy of the exact solver and nothing else.

use std::fmt;
use std::sync::Arc;

use crate::codercalc::{
    compose_morphisms, compose_morphisms_arity, ff_mixed_arity, mixed_arity, square_arity,
    ArityCoderivation, ArityMorphism, FFPrimeCoderivation, TermFamily,
};
use crate::cooperad::{CofreeData, Cooperad};
use crate::field::Field;
use crate::gradedcx::hom::{differential_matrix, hom_differential_sliced, HomSlice};
use crate::gradedcx::{ChainComplex, Degree, GradedMap, SparseMap, Window};
use crate::linalg::{PivotPolicy, SparseSystem, SparseVec};

/// Which side carries the given square-zero structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureSide {
    Source,
    Target,
}

/// A validated transfer problem: complexes V and W, a chain map f: V -> W,
/// and a square-zero degree -1 coderivation whose arity-1 term is the
/// differential, living on the target (transfer down) or source (transfer
/// up).
pub struct TransferProblem<F: Field> {
    pub v: Arc<CofreeData<F>>,
    pub w: Arc<CofreeData<F>>,
    pub f: GradedMap<F>,
    pub given: ArityCoderivation<F>,
    pub side: StructureSide,
    pub max_arity: usize,
}

impl<F: Field> TransferProblem<F> {
    /// Build and validate a problem. `terms` produces the arity >= 2 terms
    /// of the given structure once the slice bases exist; the arity-1 term
    /// is pinned to the differential.
    pub fn new(
        cooperad: Arc<Cooperad<F>>,
        source: ChainComplex<F>,
        target: ChainComplex<F>,
        f: GradedMap<F>,
        side: StructureSide,
        max_arity: usize,
        terms: impl FnOnce(&Arc<CofreeData<F>>) -> Vec<(usize, GradedMap<F>)>,
    ) -> Result<Self, String> {
        if max_arity < 1 {
            return Err("max arity must be at least 1".into());
        }
        if f.degree() != 0 {
            return Err("f must have degree 0".into());
        }
        let left = target.differential.compose(&f);
        let right = f.compose(&source.differential);
        if !left.eq_map(&right) {
            return Err("f is not a chain map".into());
        }
        let window = union_window(&source, &target);
        let v = Arc::new(CofreeData::new(cooperad.clone(), source, max_arity, window));
        let w = Arc::new(CofreeData::new(cooperad, target, max_arity, window));
        let carrier = match side {
            StructureSide::Source => &v,
            StructureSide::Target => &w,
        };
        let mut given = ArityCoderivation::from_differential(carrier.clone());
        for (n, term) in terms(carrier) {
            if n < 2 || n > max_arity {
                return Err(format!("structure term at invalid arity {n}"));
            }
            given.set_term(n, term);
        }
        for n in 1..=max_arity {
            let sq = square_arity(&given, n);
            if let Some((j, _)) = sq.first_support() {
                let word = carrier.slice(n).describe(
                    carrier.cooperad.as_ref(),
                    &carrier.complex.module,
                    j,
                );
                return Err(format!(
                    "given structure is not square-zero at arity {n} (word {word})"
                ));
            }
        }
        Ok(TransferProblem { v, w, f, given, side, max_arity })
    }
}

fn union_window<F: Field>(a: &ChainComplex<F>, b: &ChainComplex<F>) -> Window {
    let wa = Window::around(a.basis());
    let wb = Window::around(b.basis());
    Window::new(wa.lo.min(wb.lo), wa.hi.max(wb.hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStage {
    SquareObstruction,
    Decomposition,
}

impl fmt::Display for SolveStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStage::SquareObstruction => write!(f, "square obstruction"),
            SolveStage::Decomposition => write!(f, "cycle/boundary decomposition"),
        }
    }
}

pub enum TransferError<F: Field> {
    /// A solve had no solution: the hypothesis fails at this arity. The
    /// carried result is valid up to `arity - 1`.
    Hypothesis { arity: usize, stage: SolveStage, partial: Box<TransferResult<F>> },
    /// An identity the induction guarantees failed: an implementation bug.
    Checkpoint { arity: usize, identity: &'static str },
}

impl<F: Field> fmt::Debug for TransferError<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferError::Hypothesis { arity, stage, .. } => {
                write!(f, "hypothesis failure at arity {arity} ({stage})")
            }
            TransferError::Checkpoint { arity, identity } => {
                write!(f, "internal checkpoint failure at arity {arity}: {identity}")
            }
        }
    }
}

pub enum ComparisonError<F: Field> {
    Hypothesis { arity: usize, stage: SolveStage, partial: Box<ComparisonResult<F>> },
    Checkpoint { arity: usize, identity: &'static str },
    Precondition(String),
}

impl<F: Field> fmt::Debug for ComparisonError<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonError::Hypothesis { arity, stage, .. } => {
                write!(f, "hypothesis failure at arity {arity} ({stage})")
            }
            ComparisonError::Checkpoint { arity, identity } => {
                write!(f, "internal checkpoint failure at arity {arity}: {identity}")
            }
            ComparisonError::Precondition(msg) => write!(f, "precondition failure: {msg}"),
        }
    }
}

/// Per-arity record of one inductive step, in a stable line format.
#[derive(Clone, Debug)]
pub struct ArityTrace {
    pub arity: usize,
    pub cycle_check: bool,
    pub boundary_check: bool,
    pub obstruction_support: usize,
    pub solve_rows: usize,
    pub solve_cols: usize,
    pub solve_support: usize,
    pub decomp_rows: usize,
    pub decomp_cycle_cols: usize,
    pub decomp_boundary_cols: usize,
    pub correction_support: usize,
    pub morphism_correction_support: usize,
    pub square_ok: bool,
    pub chain_ok: bool,
}

impl fmt::Display for ArityTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "arity {}: cycle={} boundary={} obstruction_nnz={} solve={}x{} e_nnz={} \
             decomp={}x({}+{}) e1_nnz={} e2_nnz={} square={} chain={}",
            self.arity,
            ok(self.cycle_check),
            ok(self.boundary_check),
            self.obstruction_support,
            self.solve_rows,
            self.solve_cols,
            self.solve_support,
            self.decomp_rows,
            self.decomp_cycle_cols,
            self.decomp_boundary_cols,
            self.correction_support,
            self.morphism_correction_support,
            ok(self.square_ok),
            ok(self.chain_ok),
        )
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

pub struct TransferResult<F: Field> {
    /// μ on C(V) for a downward transfer, ν on C(W) for an upward one.
    pub coderivation: ArityCoderivation<F>,
    /// F: C(V) -> C(W) with arity-1 term f.
    pub morphism: ArityMorphism<F>,
    pub trace: Vec<ArityTrace>,
}

/// Render a trace in the stable line-oriented log format.
pub fn render_trace(trace: &[ArityTrace]) -> String {
    let mut s = String::new();
    for t in trace {
        s.push_str(&t.to_string());
        s.push('\n');
    }
    s
}

struct HomSolve<F: Field> {
    domain: HomSlice,
    codomain: HomSlice,
    system: SparseSystem<F>,
}

fn hom_solve_setup<F: Field>(
    data: &CofreeData<F>,
    n: usize,
    target: &ChainComplex<F>,
    e_degree: Degree,
) -> HomSolve<F> {
    let (domain, codomain, system) = differential_matrix(
        data.slice_differential(n),
        &target.differential,
        data.slice(n).basis.clone(),
        target.basis().clone(),
        e_degree,
    );
    HomSolve { domain, codomain, system }
}

fn unflatten_solution<F: Field>(slice: &HomSlice, x: &[F]) -> GradedMap<F> {
    let mut sv = SparseVec::new();
    for (i, v) in x.iter().enumerate() {
        if !num_traits::Zero::is_zero(v) {
            sv.add(i, v.clone());
        }
    }
    slice.unflatten(&sv)
}

struct Decomposition<F: Field> {
    e_cycle: GradedMap<F>,
    e_boundary: GradedMap<F>,
    rows: usize,
    cycle_cols: usize,
    boundary_cols: usize,
}

enum CycleMapsInto<'a, F: Field> {
    /// e' lives in Hom(C^n V, V) and enters the defect space as f ∘ e'.
    PostcomposeF(&'a GradedMap<F>),
    /// e' lives in Hom(C^n W, W) and enters as e' ∘ C^n(f).
    PrecomposeCofree(&'a SparseMap<F>),
}

/// Write `rhs = (image of a cycle e') + ∂ e''` as one stacked sparse solve;
/// the cycle condition ∂e' = 0 is enforced by extra rows. Equivalently this
/// is membership of rhs in colspace(image of the cycle space) +
/// colspace(∂), with the witness giving both parts.
#[allow(clippy::too_many_arguments)]
fn decompose<F: Field>(
    rhs: &GradedMap<F>,
    p_data: &CofreeData<F>,
    p_target: &ChainComplex<F>,
    q_data: &CofreeData<F>,
    q_target: &ChainComplex<F>,
    n: usize,
    mapping: CycleMapsInto<'_, F>,
    policy: PivotPolicy,
) -> Option<Decomposition<F>> {
    let rhs_degree = rhs.degree();
    let p_solve = hom_solve_setup(p_data, n, p_target, rhs_degree);
    let q_solve = hom_solve_setup(q_data, n, q_target, rhs_degree + 1);
    let q_rhs_slice =
        HomSlice::new(q_data.slice(n).basis.clone(), q_target.basis().clone(), rhs_degree);

    let top = q_rhs_slice.dim();
    let bottom = p_solve.codomain.dim();
    let cycle_cols = p_solve.domain.dim();
    let boundary_cols = q_solve.domain.dim();
    let mut sys = SparseSystem::new(top + bottom, cycle_cols + boundary_cols);

    match mapping {
        CycleMapsInto::PostcomposeF(f) => {
            for pos in 0..cycle_cols {
                let (j, i) = p_solve.domain.pair_at(pos);
                for (t, c) in f.apply_index(i).iter() {
                    if let Some(q) = q_rhs_slice.position(j, *t) {
                        sys.columns[pos].add(q, c.clone());
                    }
                }
            }
        }
        CycleMapsInto::PrecomposeCofree(cnf) => {
            for (x, col_cnf) in cnf.columns() {
                for (j, c) in col_cnf.iter() {
                    let tgt_deg = p_data.slice(n).basis.degree(*j) + rhs_degree;
                    for &i in p_target.basis().indices_in(tgt_deg) {
                        if let (Some(p), Some(q)) =
                            (p_solve.domain.position(*j, i), q_rhs_slice.position(x, i))
                        {
                            sys.columns[p].add(q, c.clone());
                        }
                    }
                }
            }
        }
    }
    for pos in 0..cycle_cols {
        for (r, c) in p_solve.system.columns[pos].iter() {
            sys.columns[pos].add(top + r, c.clone());
        }
    }
    for pos in 0..boundary_cols {
        for (r, c) in q_solve.system.columns[pos].iter() {
            sys.columns[cycle_cols + pos].add(*r, c.clone());
        }
    }

    let rhs_flat = q_rhs_slice.flatten_sparse(rhs);
    let x = sys.solve(&rhs_flat, policy)?;
    let e_cycle = unflatten_solution(&p_solve.domain, &x[..cycle_cols]);
    let e_boundary = unflatten_solution(&q_solve.domain, &x[cycle_cols..]);
    Some(Decomposition { e_cycle, e_boundary, rows: top + bottom, cycle_cols, boundary_cols })
}

/// Transfer a structure across f onto its source (the homotopy transfer
/// direction): given ν on C(W), produce μ on C(V) and F: C(V) -> C(W).
pub fn transfer_down<F: Field>(
    p: &TransferProblem<F>,
    policy: PivotPolicy,
) -> Result<TransferResult<F>, TransferError<F>> {
    assert_eq!(p.side, StructureSide::Target, "transfer_down needs the structure on the target");
    let nu = &p.given;
    let mut mu = ArityCoderivation::from_differential(p.v.clone());
    let mut morphism = ArityMorphism::from_linear(p.v.clone(), p.w.clone(), &p.f);
    let mut trace = Vec::new();

    for n in 2..=p.max_arity {
        let c = square_arity(&mu, n);
        let dc = hom_differential_sliced(&c, p.v.slice_differential(n), &p.v.complex.differential);
        let cycle_check = dc.is_zero();
        if !cycle_check {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "square obstruction is a Hom cycle",
            });
        }
        let r = mixed_arity(&morphism, &mu, nu, n);
        let fc = p.f.compose(&c);
        let dr = hom_differential_sliced(&r, p.v.slice_differential(n), &p.w.complex.differential);
        let boundary_check = fc.eq_map(&dr);
        if !boundary_check {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "image of the obstruction bounds the chain defect",
            });
        }

        let solve = hom_solve_setup(&p.v, n, &p.v.complex, -1);
        let rhs = solve.codomain.flatten_sparse(&c);
        let Some(x) = solve.system.solve(&rhs, policy) else {
            let partial = TransferResult { coderivation: mu, morphism, trace };
            return Err(TransferError::Hypothesis {
                arity: n,
                stage: SolveStage::SquareObstruction,
                partial: Box::new(partial),
            });
        };
        let e = unflatten_solution(&solve.domain, &x);
        mu.update_term(n, &e.neg());

        let r2 = mixed_arity(&morphism, &mu, nu, n);
        let dr2 =
            hom_differential_sliced(&r2, p.v.slice_differential(n), &p.w.complex.differential);
        if !dr2.is_zero() {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "chain defect is a Hom cycle after the square correction",
            });
        }

        let Some(dec) = decompose(
            &r2,
            &p.v,
            &p.v.complex,
            &p.v,
            &p.w.complex,
            n,
            CycleMapsInto::PostcomposeF(&p.f),
            policy,
        ) else {
            mu.clear_term(n);
            let partial = TransferResult { coderivation: mu, morphism, trace };
            return Err(TransferError::Hypothesis {
                arity: n,
                stage: SolveStage::Decomposition,
                partial: Box::new(partial),
            });
        };
        mu.update_term(n, &dec.e_cycle.neg());
        morphism.update_term(n, &dec.e_boundary);

        let square_ok = square_arity(&mu, n).is_zero();
        let chain_ok = mixed_arity(&morphism, &mu, nu, n).is_zero();
        trace.push(ArityTrace {
            arity: n,
            cycle_check,
            boundary_check,
            obstruction_support: c.support_size(),
            solve_rows: solve.codomain.dim(),
            solve_cols: solve.domain.dim(),
            solve_support: e.support_size(),
            decomp_rows: dec.rows,
            decomp_cycle_cols: dec.cycle_cols,
            decomp_boundary_cols: dec.boundary_cols,
            correction_support: dec.e_cycle.support_size(),
            morphism_correction_support: dec.e_boundary.support_size(),
            square_ok,
            chain_ok,
        });
        if !square_ok || !chain_ok {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "arity relations after both corrections",
            });
        }
    }
    Ok(TransferResult { coderivation: mu, morphism, trace })
}

/// Transfer a structure across f onto its target: given μ on C(V), produce
/// ν on C(W) and F: C(V) -> C(W). Obstructions pair against C^n(f).
pub fn transfer_up<F: Field>(
    p: &TransferProblem<F>,
    policy: PivotPolicy,
) -> Result<TransferResult<F>, TransferError<F>> {
    assert_eq!(p.side, StructureSide::Source, "transfer_up needs the structure on the source");
    let mu = &p.given;
    let mut nu = ArityCoderivation::from_differential(p.w.clone());
    let mut morphism = ArityMorphism::from_linear(p.v.clone(), p.w.clone(), &p.f);
    let mut trace = Vec::new();

    for n in 2..=p.max_arity {
        let c = square_arity(&nu, n);
        let dc = hom_differential_sliced(&c, p.w.slice_differential(n), &p.w.complex.differential);
        let cycle_check = dc.is_zero();
        if !cycle_check {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "square obstruction is a Hom cycle",
            });
        }
        let cnf = p.v.cofree_map(&p.w, &p.f, n);
        let r = mixed_arity(&morphism, mu, &nu, n);
        let c_cnf = cnf.then(&c);
        let dr = hom_differential_sliced(&r, p.v.slice_differential(n), &p.w.complex.differential);
        let boundary_check = c_cnf.eq_map(&dr);
        if !boundary_check {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "obstruction against C^n(f) bounds the chain defect",
            });
        }

        let solve = hom_solve_setup(&p.w, n, &p.w.complex, -1);
        let rhs = solve.codomain.flatten_sparse(&c);
        let Some(x) = solve.system.solve(&rhs, policy) else {
            let partial = TransferResult { coderivation: nu, morphism, trace };
            return Err(TransferError::Hypothesis {
                arity: n,
                stage: SolveStage::SquareObstruction,
                partial: Box::new(partial),
            });
        };
        let e = unflatten_solution(&solve.domain, &x);
        nu.update_term(n, &e.neg());

        let r2 = mixed_arity(&morphism, mu, &nu, n);
        let dr2 =
            hom_differential_sliced(&r2, p.v.slice_differential(n), &p.w.complex.differential);
        if !dr2.is_zero() {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "chain defect is a Hom cycle after the square correction",
            });
        }

        let Some(dec) = decompose(
            &r2,
            &p.w,
            &p.w.complex,
            &p.v,
            &p.w.complex,
            n,
            CycleMapsInto::PrecomposeCofree(&cnf),
            policy,
        ) else {
            nu.clear_term(n);
            let partial = TransferResult { coderivation: nu, morphism, trace };
            return Err(TransferError::Hypothesis {
                arity: n,
                stage: SolveStage::Decomposition,
                partial: Box::new(partial),
            });
        };
        nu.update_term(n, &dec.e_cycle);
        morphism.update_term(n, &dec.e_boundary);

        let square_ok = square_arity(&nu, n).is_zero();
        let chain_ok = mixed_arity(&morphism, mu, &nu, n).is_zero();
        trace.push(ArityTrace {
            arity: n,
            cycle_check,
            boundary_check,
            obstruction_support: c.support_size(),
            solve_rows: solve.codomain.dim(),
            solve_cols: solve.domain.dim(),
            solve_support: e.support_size(),
            decomp_rows: dec.rows,
            decomp_cycle_cols: dec.cycle_cols,
            decomp_boundary_cols: dec.boundary_cols,
            correction_support: dec.e_cycle.support_size(),
            morphism_correction_support: dec.e_boundary.support_size(),
            square_ok,
            chain_ok,
        });
        if !square_ok || !chain_ok {
            return Err(TransferError::Checkpoint {
                arity: n,
                identity: "arity relations after both corrections",
            });
        }
    }
    Ok(TransferResult { coderivation: nu, morphism, trace })
}

/// Per-arity exact replay of the three relations of a transferred pair.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub arities: Vec<VerifyArity>,
    pub pass: bool,
    pub max_failing_arity: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct VerifyArity {
    pub arity: usize,
    pub square_source_ok: bool,
    pub square_target_ok: bool,
    pub chain_ok: bool,
    pub failing_word: Option<String>,
}

impl fmt::Display for VerifyArity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "arity {}: square_source={} square_target={} chain={}",
            self.arity,
            ok(self.square_source_ok),
            ok(self.square_target_ok),
            ok(self.chain_ok),
        )?;
        if let Some(w) = &self.failing_word {
            write!(f, " failing_word={w}")?;
        }
        Ok(())
    }
}

pub fn verify<F: Field>(
    mu: &ArityCoderivation<F>,
    morphism: &ArityMorphism<F>,
    nu: &ArityCoderivation<F>,
    max_arity: usize,
) -> VerifyReport {
    let mut arities = Vec::new();
    let mut pass = true;
    let mut max_failing = None;
    for n in 1..=max_arity {
        let sq_src = square_arity(mu, n);
        let sq_dst = square_arity(nu, n);
        let chain = mixed_arity(morphism, mu, nu, n);
        let failing_word = sq_src
            .first_support()
            .or_else(|| chain.first_support())
            .map(|(j, _)| {
                mu.source.slice(n).describe(
                    mu.source.cooperad.as_ref(),
                    &mu.source.complex.module,
                    j,
                )
            })
            .or_else(|| {
                sq_dst.first_support().map(|(j, _)| {
                    nu.source.slice(n).describe(
                        nu.source.cooperad.as_ref(),
                        &nu.source.complex.module,
                        j,
                    )
                })
            });
        let entry = VerifyArity {
            arity: n,
            square_source_ok: sq_src.is_zero(),
            square_target_ok: sq_dst.is_zero(),
            chain_ok: chain.is_zero(),
            failing_word,
        };
        if !(entry.square_source_ok && entry.square_target_ok && entry.chain_ok) {
            pass = false;
            max_failing = Some(n);
        }
        arities.push(entry);
    }
    VerifyReport { arities, pass, max_failing_arity: max_failing }
}

/// Result of comparing two transferred structures: an isomorphism with
/// identity arity-1 term (block-unitriangular, hence invertible up to the
/// truncation) and a coderivation homotopy between the composite morphisms.
pub struct ComparisonResult<F: Field> {
    pub iso: ArityMorphism<F>,
    pub homotopy: FFPrimeCoderivation<F>,
    pub trace: Vec<ArityTrace>,
}

/// Compare two downward transfers (μ, F) and (μ', F') of one problem:
/// produce Φ with identity arity-1 term satisfying μ' ∘ Φ = Φ ∘ μ, and an
/// (F'∘Φ, F)-coderivation H of degree +1 with F' ∘ Φ - F = ν ∘ H + H ∘ μ,
/// both exactly up to the truncation arity.
pub fn compare_down<F: Field>(
    mu: &ArityCoderivation<F>,
    mu2: &ArityCoderivation<F>,
    f_mor: &ArityMorphism<F>,
    f2_mor: &ArityMorphism<F>,
    nu: &ArityCoderivation<F>,
    max_arity: usize,
    policy: PivotPolicy,
) -> Result<ComparisonResult<F>, ComparisonError<F>> {
    let v = mu.source.clone();
    let w = nu.source.clone();
    check_comparison_inputs(mu, mu2, f_mor, f2_mor, nu, max_arity, true)?;

    let mut phi = ArityMorphism::identity(v.clone());
    let mut h_terms = TermFamily::<F>::zero(1, v.max_arity());
    let mut trace = Vec::new();
    let f_plain = morphism_linear_term(f_mor);

    for n in 2..=max_arity {
        // G = (μ' ∘ Φ - Φ ∘ μ)_(n)
        let g = mixed_arity(&phi, mu, mu2, n).neg();
        let dg = hom_differential_sliced(&g, v.slice_differential(n), &v.complex.differential);
        if !dg.is_zero() {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "intertwining defect is a Hom cycle",
            });
        }
        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(f2_mor, &phi),
            f_mor.clone(),
            h_terms.clone(),
        );
        let k_map = comparison_defect(f2_mor, &phi, f_mor, &h, mu, nu, n);
        let fg = f_plain.compose(&g);
        let dk = hom_differential_sliced(&k_map, v.slice_differential(n), &w.complex.differential);
        let boundary_check = fg.eq_map(&dk);
        if !boundary_check {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "image of the intertwining defect bounds the homotopy defect",
            });
        }

        let solve = hom_solve_setup(&v, n, &v.complex, 0);
        let rhs = solve.codomain.flatten_sparse(&g);
        let Some(x) = solve.system.solve(&rhs, policy) else {
            let homotopy = FFPrimeCoderivation::from_family(
                compose_morphisms(f2_mor, &phi),
                f_mor.clone(),
                h_terms,
            );
            return Err(ComparisonError::Hypothesis {
                arity: n,
                stage: SolveStage::SquareObstruction,
                partial: Box::new(ComparisonResult { iso: phi, homotopy, trace }),
            });
        };
        let e = unflatten_solution(&solve.domain, &x);
        phi.update_term(n, &e.neg());

        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(f2_mor, &phi),
            f_mor.clone(),
            h_terms.clone(),
        );
        let k2 = comparison_defect(f2_mor, &phi, f_mor, &h, mu, nu, n);
        let dk2 = hom_differential_sliced(&k2, v.slice_differential(n), &w.complex.differential);
        if !dk2.is_zero() {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "homotopy defect is a Hom cycle after the iso correction",
            });
        }

        let Some(dec) = decompose(
            &k2,
            &v,
            &v.complex,
            &v,
            &w.complex,
            n,
            CycleMapsInto::PostcomposeF(&f_plain),
            policy,
        ) else {
            let homotopy = FFPrimeCoderivation::from_family(
                compose_morphisms(f2_mor, &phi),
                f_mor.clone(),
                h_terms,
            );
            return Err(ComparisonError::Hypothesis {
                arity: n,
                stage: SolveStage::Decomposition,
                partial: Box::new(ComparisonResult { iso: phi, homotopy, trace }),
            });
        };
        phi.update_term(n, &dec.e_cycle.neg());
        let next_h = match h_terms.term(n) {
            Some(t) => t.add(&dec.e_boundary),
            None => dec.e_boundary.clone(),
        };
        h_terms.set_term(n, next_h);

        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(f2_mor, &phi),
            f_mor.clone(),
            h_terms.clone(),
        );
        let square_ok = mixed_arity(&phi, mu, mu2, n).is_zero();
        let chain_ok = comparison_defect(f2_mor, &phi, f_mor, &h, mu, nu, n).is_zero();
        trace.push(ArityTrace {
            arity: n,
            cycle_check: true,
            boundary_check,
            obstruction_support: g.support_size(),
            solve_rows: solve.codomain.dim(),
            solve_cols: solve.domain.dim(),
            solve_support: e.support_size(),
            decomp_rows: dec.rows,
            decomp_cycle_cols: dec.cycle_cols,
            decomp_boundary_cols: dec.boundary_cols,
            correction_support: dec.e_cycle.support_size(),
            morphism_correction_support: dec.e_boundary.support_size(),
            square_ok,
            chain_ok,
        });
        if !square_ok || !chain_ok {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "comparison relations after both corrections",
            });
        }
    }

    let homotopy =
        FFPrimeCoderivation::from_family(compose_morphisms(f2_mor, &phi), f_mor.clone(), h_terms);
    Ok(ComparisonResult { iso: phi, homotopy, trace })
}

/// Compare two upward transfers (ν, F) and (ν', F') over the same μ and f:
/// produce Ψ on C(W) with identity arity-1 term satisfying
/// ν ∘ Ψ = Ψ ∘ ν' (Ψ carries the primed structure into the unprimed one;
/// that orientation is the one that closes the induction) and a
/// (Ψ∘F', F)-coderivation H with Ψ ∘ F' - F = ν ∘ H + H ∘ μ.
pub fn compare_up<F: Field>(
    nu: &ArityCoderivation<F>,
    nu2: &ArityCoderivation<F>,
    f_mor: &ArityMorphism<F>,
    f2_mor: &ArityMorphism<F>,
    mu: &ArityCoderivation<F>,
    max_arity: usize,
    policy: PivotPolicy,
) -> Result<ComparisonResult<F>, ComparisonError<F>> {
    let v = mu.source.clone();
    let w = nu.source.clone();
    check_comparison_inputs(nu, nu2, f_mor, f2_mor, mu, max_arity, false)?;

    let mut psi = ArityMorphism::identity(w.clone());
    let mut h_terms = TermFamily::<F>::zero(1, v.max_arity());
    let mut trace = Vec::new();
    let f_plain = morphism_linear_term(f_mor);

    for n in 2..=max_arity {
        let cnf = v.cofree_map(&w, &f_plain, n);
        // G = (ν ∘ Ψ - Ψ ∘ ν')_(n)
        let g = mixed_arity(&psi, nu2, nu, n).neg();
        let dg = hom_differential_sliced(&g, w.slice_differential(n), &w.complex.differential);
        if !dg.is_zero() {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "intertwining defect is a Hom cycle",
            });
        }
        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(&psi, f2_mor),
            f_mor.clone(),
            h_terms.clone(),
        );
        let k_map = comparison_defect_up(&psi, f2_mor, f_mor, &h, mu, nu, n);
        let g_cnf = cnf.then(&g);
        let dk = hom_differential_sliced(&k_map, v.slice_differential(n), &w.complex.differential);
        let boundary_check = g_cnf.eq_map(&dk);
        if !boundary_check {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "intertwining defect against C^n(f) bounds the homotopy defect",
            });
        }

        let solve = hom_solve_setup(&w, n, &w.complex, 0);
        let rhs = solve.codomain.flatten_sparse(&g);
        let Some(x) = solve.system.solve(&rhs, policy) else {
            return Err(ComparisonError::Hypothesis {
                arity: n,
                stage: SolveStage::SquareObstruction,
                partial: Box::new(ComparisonResult { iso: psi, homotopy: h, trace }),
            });
        };
        let e = unflatten_solution(&solve.domain, &x);
        psi.update_term(n, &e.neg());

        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(&psi, f2_mor),
            f_mor.clone(),
            h_terms.clone(),
        );
        let k2 = comparison_defect_up(&psi, f2_mor, f_mor, &h, mu, nu, n);
        let dk2 = hom_differential_sliced(&k2, v.slice_differential(n), &w.complex.differential);
        if !dk2.is_zero() {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "homotopy defect is a Hom cycle after the iso correction",
            });
        }

        let Some(dec) = decompose(
            &k2,
            &w,
            &w.complex,
            &v,
            &w.complex,
            n,
            CycleMapsInto::PrecomposeCofree(&cnf),
            policy,
        ) else {
            return Err(ComparisonError::Hypothesis {
                arity: n,
                stage: SolveStage::Decomposition,
                partial: Box::new(ComparisonResult { iso: psi, homotopy: h, trace }),
            });
        };
        psi.update_term(n, &dec.e_cycle.neg());
        let next_h = match h_terms.term(n) {
            Some(t) => t.add(&dec.e_boundary),
            None => dec.e_boundary.clone(),
        };
        h_terms.set_term(n, next_h);

        let h = FFPrimeCoderivation::from_family(
            compose_morphisms(&psi, f2_mor),
            f_mor.clone(),
            h_terms.clone(),
        );
        let square_ok = mixed_arity(&psi, nu2, nu, n).is_zero();
        let chain_ok = comparison_defect_up(&psi, f2_mor, f_mor, &h, mu, nu, n).is_zero();
        trace.push(ArityTrace {
            arity: n,
            cycle_check: true,
            boundary_check,
            obstruction_support: g.support_size(),
            solve_rows: solve.codomain.dim(),
            solve_cols: solve.domain.dim(),
            solve_support: e.support_size(),
            decomp_rows: dec.rows,
            decomp_cycle_cols: dec.cycle_cols,
            decomp_boundary_cols: dec.boundary_cols,
            correction_support: dec.e_cycle.support_size(),
            morphism_correction_support: dec.e_boundary.support_size(),
            square_ok,
            chain_ok,
        });
        if !square_ok || !chain_ok {
            return Err(ComparisonError::Checkpoint {
                arity: n,
                identity: "comparison relations after both corrections",
            });
        }
    }

    let homotopy =
        FFPrimeCoderivation::from_family(compose_morphisms(&psi, f2_mor), f_mor.clone(), h_terms);
    Ok(ComparisonResult { iso: psi, homotopy, trace })
}

/// (F' ∘ Φ - F - ν H - H μ) at one arity.
fn comparison_defect<F: Field>(
    f2_mor: &ArityMorphism<F>,
    phi: &ArityMorphism<F>,
    f_mor: &ArityMorphism<F>,
    h: &FFPrimeCoderivation<F>,
    mu: &ArityCoderivation<F>,
    nu: &ArityCoderivation<F>,
    n: usize,
) -> GradedMap<F> {
    let lead = compose_morphisms_arity(f2_mor, phi, n);
    let lead = match f_mor.term(n) {
        Some(t) => lead.sub(t),
        None => lead,
    };
    lead.sub(&ff_mixed_arity(h, mu, nu, n))
}

/// (Ψ ∘ F' - F - ν H - H μ) at one arity.
fn comparison_defect_up<F: Field>(
    psi: &ArityMorphism<F>,
    f2_mor: &ArityMorphism<F>,
    f_mor: &ArityMorphism<F>,
    h: &FFPrimeCoderivation<F>,
    mu: &ArityCoderivation<F>,
    nu: &ArityCoderivation<F>,
    n: usize,
) -> GradedMap<F> {
    let lead = compose_morphisms_arity(psi, f2_mor, n);
    let lead = match f_mor.term(n) {
        Some(t) => lead.sub(t),
        None => lead,
    };
    lead.sub(&ff_mixed_arity(h, mu, nu, n))
}

fn check_comparison_inputs<F: Field>(
    a: &ArityCoderivation<F>,
    b: &ArityCoderivation<F>,
    f_mor: &ArityMorphism<F>,
    f2_mor: &ArityMorphism<F>,
    other: &ArityCoderivation<F>,
    max_arity: usize,
    down: bool,
) -> Result<(), ComparisonError<F>> {
    if a.source.complex.basis().as_ref() != b.source.complex.basis().as_ref() {
        return Err(ComparisonError::Precondition(
            "the two structures live over different modules".into(),
        ));
    }
    if f_mor.source.complex.basis().as_ref() != f2_mor.source.complex.basis().as_ref()
        || f_mor.target.complex.basis().as_ref() != f2_mor.target.complex.basis().as_ref()
    {
        return Err(ComparisonError::Precondition(
            "the two morphisms connect different modules".into(),
        ));
    }
    let same_arity1 = match (a.term(1), b.term(1)) {
        (Some(x), Some(y)) => x.eq_map(y),
        (None, None) => true,
        _ => false,
    };
    if !same_arity1 {
        return Err(ComparisonError::Precondition(
            "arity-1 terms of the two structures differ".into(),
        ));
    }
    let f_same = match (f_mor.term(1), f2_mor.term(1)) {
        (Some(x), Some(y)) => x.eq_map(y),
        _ => false,
    };
    if !f_same {
        return Err(ComparisonError::Precondition(
            "the two morphisms have different arity-1 chain maps".into(),
        ));
    }
    let (r1, r2) = if down {
        (verify(a, f_mor, other, max_arity), verify(b, f2_mor, other, max_arity))
    } else {
        (verify(other, f_mor, a, max_arity), verify(other, f2_mor, b, max_arity))
    };
    if !r1.pass || !r2.pass {
        return Err(ComparisonError::Precondition(
            "inputs do not verify against the shared structure".into(),
        ));
    }
    Ok(())
}

fn morphism_linear_term<F: Field>(m: &ArityMorphism<F>) -> GradedMap<F> {
    m.term(1)
        .expect("morphism has an arity-1 term")
        .rebased(m.source.complex.basis().clone(), m.target.complex.basis().clone())
}

/// One arity of the hypothesis report: cone dimensions and homology ranks
/// of the comparison map between the two Hom complexes, in the degree
/// window the solves live in. All-zero cone homology certifies the induced
/// isomorphisms the induction needs.
#[derive(Clone, Debug)]
pub struct HypothesisArity {
    pub arity: usize,
    /// (cone degree, cone dimension, cone homology dimension)
    pub cone: Vec<(Degree, usize, usize)>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub arities: Vec<HypothesisArity>,
    pub pass: bool,
    /// Map degrees of the Hom complexes whose homology the check certifies.
    pub window: Window,
}

impl HypothesisReport {
    pub fn first_failing_arity(&self) -> Option<usize> {
        self.arities.iter().find(|a| !a.pass).map(|a| a.arity)
    }
}

/// Check that f induces isomorphisms between the Hom-complex homologies in
/// the map degrees the solves use (-2..0), through mapping-cone acyclicity
/// computed with sparse ranks. The finite window is reported; a pass
/// certifies exactly the degrees listed.
pub fn check_hypothesis<F: Field>(p: &TransferProblem<F>) -> HypothesisReport {
    let window = Window::new(-2, 0);
    let mut arities = Vec::new();
    let mut pass = true;
    for n in 1..=p.max_arity {
        let arity_report = match p.side {
            StructureSide::Target => cone_check_down(p, n, window),
            StructureSide::Source => cone_check_up(p, n, window),
        };
        pass &= arity_report.pass;
        arities.push(arity_report);
    }
    HypothesisReport { arities, pass, window }
}

fn cone_check_down<F: Field>(p: &TransferProblem<F>, n: usize, window: Window) -> HypothesisArity {
    let pd = |d: Degree| HomSlice::new(p.v.slice(n).basis.clone(), p.v.complex.basis().clone(), d);
    let qd = |d: Degree| HomSlice::new(p.v.slice(n).basis.clone(), p.w.complex.basis().clone(), d);
    let p_sys = |d: Degree| {
        differential_matrix(
            p.v.slice_differential(n),
            &p.v.complex.differential,
            p.v.slice(n).basis.clone(),
            p.v.complex.basis().clone(),
            d,
        )
        .2
    };
    let q_sys = |d: Degree| {
        differential_matrix(
            p.v.slice_differential(n),
            &p.w.complex.differential,
            p.v.slice(n).basis.clone(),
            p.w.complex.basis().clone(),
            d,
        )
        .2
    };
    let t_cols = |d: Degree| -> Vec<SparseVec<F>> {
        let dom = pd(d);
        let cod = qd(d);
        (0..dom.dim())
            .map(|pos| {
                let (j, i) = dom.pair_at(pos);
                let mut col = SparseVec::new();
                for (t, c) in p.f.apply_index(i).iter() {
                    if let Some(q) = cod.position(j, *t) {
                        col.add(q, c.clone());
                    }
                }
                col
            })
            .collect()
    };
    cone_ranks(n, window, &|d| pd(d).dim(), &|d| qd(d).dim(), &p_sys, &q_sys, &t_cols)
}

fn cone_check_up<F: Field>(p: &TransferProblem<F>, n: usize, window: Window) -> HypothesisArity {
    let cnf = p.v.cofree_map(&p.w, &p.f, n);
    let pd = |d: Degree| HomSlice::new(p.w.slice(n).basis.clone(), p.w.complex.basis().clone(), d);
    let qd = |d: Degree| HomSlice::new(p.v.slice(n).basis.clone(), p.w.complex.basis().clone(), d);
    let p_sys = |d: Degree| {
        differential_matrix(
            p.w.slice_differential(n),
            &p.w.complex.differential,
            p.w.slice(n).basis.clone(),
            p.w.complex.basis().clone(),
            d,
        )
        .2
    };
    let q_sys = |d: Degree| {
        differential_matrix(
            p.v.slice_differential(n),
            &p.w.complex.differential,
            p.v.slice(n).basis.clone(),
            p.w.complex.basis().clone(),
            d,
        )
        .2
    };
    let t_cols = |d: Degree| -> Vec<SparseVec<F>> {
        let dom = pd(d);
        let cod = qd(d);
        let mut cols = vec![SparseVec::new(); dom.dim()];
        for (x, col_cnf) in cnf.columns() {
            for (j, c) in col_cnf.iter() {
                let tgt_deg = p.w.slice(n).basis.degree(*j) + d;
                for &i in p.w.complex.basis().indices_in(tgt_deg) {
                    if let (Some(ppos), Some(qpos)) = (dom.position(*j, i), cod.position(x, i)) {
                        cols[ppos].add(qpos, c.clone());
                    }
                }
            }
        }
        cols
    };
    cone_ranks(n, window, &|d| pd(d).dim(), &|d| qd(d).dim(), &p_sys, &q_sys, &t_cols)
}

fn cone_ranks<F: Field>(
    arity: usize,
    window: Window,
    p_dim: &dyn Fn(Degree) -> usize,
    q_dim: &dyn Fn(Degree) -> usize,
    p_sys: &dyn Fn(Degree) -> SparseSystem<F>,
    q_sys: &dyn Fn(Degree) -> SparseSystem<F>,
    t_cols: &dyn Fn(Degree) -> Vec<SparseVec<F>>,
) -> HypothesisArity {
    // Isomorphisms on H_d for d in [lo, hi] follow from cone acyclicity on
    // [lo, hi + 1].
    let cone_window = Window::new(window.lo, window.hi + 1);
    let cone_dim = |d: Degree| q_dim(d) + p_dim(d - 1);
    let cone_diff = |d: Degree| -> SparseSystem<F> {
        let rows = cone_dim(d - 1);
        let q_top = q_dim(d - 1);
        let mut sys = SparseSystem::new(rows, cone_dim(d));
        let qs = q_sys(d);
        for (col, column) in qs.columns.iter().enumerate() {
            for (r, c) in column.iter() {
                sys.columns[col].add(*r, c.clone());
            }
        }
        let t = t_cols(d - 1);
        for (pcol, column) in t.iter().enumerate() {
            for (r, c) in column.iter() {
                sys.columns[q_dim(d) + pcol].add(*r, c.clone());
            }
        }
        let ps = p_sys(d - 1);
        for (pcol, column) in ps.columns.iter().enumerate() {
            for (r, c) in column.iter() {
                sys.columns[q_dim(d) + pcol].add(q_top + *r, -c.clone());
            }
        }
        sys
    };
    let mut ranks = std::collections::BTreeMap::new();
    for d in cone_window.lo..=(cone_window.hi + 1) {
        ranks.insert(d, cone_diff(d).eliminate(PivotPolicy::Forward).rank());
    }
    let mut cone = Vec::new();
    let mut pass = true;
    for d in cone_window.iter() {
        let dim = cone_dim(d);
        let h = dim - ranks[&d] - ranks[&(d + 1)];
        pass &= h == 0;
        cone.push((d, dim, h));
    }
    HypothesisArity { arity, cone, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Rational};
    use crate::gradedcx::GradedModule;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn heisenberg() -> ChainComplex<Rational> {
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
        d.add_entry(3, 4, q(1));
        ChainComplex::new(m, d).unwrap()
    }

    #[test]
    fn identity_problem_transfers_trivially() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(3);
        let id = GradedMap::identity(cx.basis().clone());
        let p =
            TransferProblem::new(coop, cx.clone(), cx, id, StructureSide::Target, 3, |_| Vec::new())
                .unwrap();
        let result = transfer_down(&p, PivotPolicy::Forward).unwrap();
        let report = verify(&result.coderivation, &result.morphism, &p.given, 3);
        assert!(report.pass, "{report:?}");
        assert!(result.morphism.term(1).is_some());
    }

    #[test]
    fn identity_problem_transfers_up_too() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(3);
        let id = GradedMap::identity(cx.basis().clone());
        let p =
            TransferProblem::new(coop, cx.clone(), cx, id, StructureSide::Source, 3, |_| Vec::new())
                .unwrap();
        let result = transfer_up(&p, PivotPolicy::Forward).unwrap();
        let report = verify(&p.given, &result.morphism, &result.coderivation, 3);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn corrupted_target_differential_rejected_at_ingestion() {
        let m =
            GradedModule::new(vec![("x".into(), 2), ("y".into(), 1), ("z".into(), 0)]).unwrap();
        let mut d = GradedMap::zero(m.basis.clone(), m.basis.clone(), -1);
        d.add_entry(0, 1, q(1));
        d.add_entry(1, 2, q(1));
        assert!(ChainComplex::new(m, d).is_err());
    }

    #[test]
    fn non_chain_map_rejected() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(2);
        // Map "1" to e3's boundary partner so commuting with d fails.
        let mut bad = GradedMap::zero(cx.basis().clone(), cx.basis().clone(), 0);
        bad.add_entry(3, 3, q(1));
        bad.add_entry(4, 5, q(1)); // e1e2 -> e1e3 breaks d-compatibility
        let err = match TransferProblem::new(
            coop,
            cx.clone(),
            cx,
            bad,
            StructureSide::Target,
            2,
            |_| Vec::new(),
        ) {
            Err(e) => e,
            Ok(_) => panic!("non-chain map must be rejected"),
        };
        assert!(err.contains("chain map"), "{err}");
    }

    #[test]
    fn degenerate_truncation_returns_immediately() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(1);
        let id = GradedMap::identity(cx.basis().clone());
        let p =
            TransferProblem::new(coop, cx.clone(), cx, id, StructureSide::Target, 1, |_| Vec::new())
                .unwrap();
        let result = transfer_down(&p, PivotPolicy::Forward).unwrap();
        assert!(result.trace.is_empty());
        assert!(result.coderivation.term(1).is_some());
    }

    #[test]
    fn hypothesis_check_passes_for_identity() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(2);
        let id = GradedMap::identity(cx.basis().clone());
        let p =
            TransferProblem::new(coop, cx.clone(), cx, id, StructureSide::Target, 2, |_| Vec::new())
                .unwrap();
        let report = check_hypothesis(&p);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn hypothesis_check_fails_for_zero_map() {
        let cx = heisenberg();
        let coop = Cooperad::<Rational>::deconcatenation(2);
        let zero = GradedMap::zero(cx.basis().clone(), cx.basis().clone(), 0);
        let p = TransferProblem::new(
            coop,
            cx.clone(),
            cx,
            zero,
            StructureSide::Target,
            2,
            |_| Vec::new(),
        )
        .unwrap();
        let report = check_hypothesis(&p);
        assert!(!report.pass);
        assert_eq!(report.first_failing_arity(), Some(1));
    }
}
