//! Command implementations, generic over the coefficient field. The thin
//! binary in `main.rs` parses arguments, picks the field, and maps the
//! outcomes onto exit codes: 0 verified, 1 verification failure, 2
//! hypothesis failure, 3 parse/validation error, 4 internal checkpoint
//! failure.

use std::sync::Arc;

use htt_core::ainf::{
    massey_triple, multilinear_to_term, transfer_to_homology, DgAlgebra, MultiMap,
};
use htt_core::codercalc::{
    compose_morphisms_arity, ff_mixed_arity, mixed_arity, ArityCoderivation, ArityMorphism,
    TermFamily,
};
use htt_core::cooperad::{CofreeData, Cooperad, CooperadFile};

use htt_core::gradedcx::homology::homology;
use htt_core::gradedcx::{ChainComplex, Degree, GradedMap, GradedModule, Window};
use htt_core::linalg::SparseVec;
use htt_core::transfer::{
    check_hypothesis, compare_down, compare_up, render_trace, transfer_down, transfer_up, verify,
    ComparisonError, ComparisonResult, StructureSide, TransferError, TransferProblem,
    TransferResult,
};
use htt_core::PivotPolicy;
use crate::format::{
    BasisElem, ComparisonFile, CooperadChoice, FieldSpec, Grading, MapEntry, OperationEntry,
    ProblemFile, ProductEntry, ResultFile, ScalarCodec, TermEntry, VerificationSummary,
    FORMAT_VERSION,
};

/// Failure modes with their exit codes.
#[derive(Debug)]
pub enum CmdError {
    /// Parse or validation problem (exit 3).
    Invalid(String),
    /// The quasi-isomorphism hypothesis failed (exit 2); a partial result
    /// may still have been written.
    Hypothesis(String),
    /// An internal checkpoint failed — a bug, not bad input (exit 4).
    Internal(String),
    /// A verification replay failed (exit 1).
    VerifyFailed(String),
}

impl From<String> for CmdError {
    fn from(s: String) -> Self {
        CmdError::Invalid(s)
    }
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::VerifyFailed(_) => 1,
            CmdError::Hypothesis(_) => 2,
            CmdError::Invalid(_) => 3,
            CmdError::Internal(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Invalid(m)
            | CmdError::Hypothesis(m)
            | CmdError::Internal(m)
            | CmdError::VerifyFailed(m) => m,
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CmdError> {
    Err(CmdError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

/// Options shared by the commands.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub max_arity: Option<usize>,
    pub window: Option<(Degree, Degree)>,
    pub cohomological: bool,
    pub skip_hypothesis: bool,
    pub policy: PivotPolicy,
    pub out: Option<String>,
}

fn effective_negation(pf: &ProblemFile, opts: &Options) -> bool {
    pf.grading == Grading::Cohomological || opts.cohomological
}

fn build_module(basis: &[BasisElem], negate: bool) -> Result<GradedModule, CmdError> {
    let elements = basis
        .iter()
        .map(|b| (b.name.clone(), if negate { -b.degree } else { b.degree }))
        .collect();
    GradedModule::new(elements).map_err(CmdError::Invalid)
}

fn lookup(module: &GradedModule, name: &str) -> Result<usize, CmdError> {
    module
        .index_of(name)
        .ok_or_else(|| CmdError::Invalid(format!("unknown basis element '{name}'")))
}

fn build_combo<S: ScalarCodec>(
    value: &[(String, String)],
    module: &GradedModule,
    spec: &FieldSpec,
) -> Result<SparseVec<S>, CmdError> {
    let mut out = SparseVec::new();
    for (name, scalar) in value {
        let idx = lookup(module, name)?;
        let c = S::parse_scalar(scalar, spec).map_err(CmdError::Invalid)?;
        out.add(idx, c);
    }
    Ok(out)
}

fn build_complex<S: ScalarCodec>(
    basis: &[BasisElem],
    differential: &[MapEntry],
    negate: bool,
    spec: &FieldSpec,
) -> Result<ChainComplex<S>, CmdError> {
    let module = build_module(basis, negate)?;
    let mut d = GradedMap::zero(module.basis.clone(), module.basis.clone(), -1);
    for entry in differential {
        let j = lookup(&module, &entry.on)?;
        for (i, c) in build_combo::<S>(&entry.value, &module, spec)?.iter() {
            d.add_entry(j, *i, c.clone());
        }
    }
    ChainComplex::new(module, d).map_err(CmdError::Invalid)
}

fn build_product<S: ScalarCodec>(
    entries: &[ProductEntry],
    module: &GradedModule,
    spec: &FieldSpec,
) -> Result<MultiMap<S>, CmdError> {
    let mut product = MultiMap::new(2, 0, module.basis.clone(), module.basis.clone());
    for e in entries {
        let l = lookup(module, &e.left)?;
        let r = lookup(module, &e.right)?;
        for (i, c) in build_combo::<S>(&e.value, module, spec)?.iter() {
            product.add_entry(vec![l, r], *i, c.clone());
        }
    }
    Ok(product)
}

fn build_operations<S: ScalarCodec>(
    entries: &[OperationEntry],
    module: &GradedModule,
    spec: &FieldSpec,
) -> Result<Vec<MultiMap<S>>, CmdError> {
    let mut by_arity: std::collections::BTreeMap<usize, MultiMap<S>> = Default::default();
    for e in entries {
        if e.arity < 2 {
            return invalid("operation entries start at arity 2; arity 1 is the differential");
        }
        if e.on.len() != e.arity {
            return invalid(format!("operation word length {} does not match arity {}", e.on.len(), e.arity));
        }
        let mm = by_arity.entry(e.arity).or_insert_with(|| {
            MultiMap::new(e.arity, e.arity as Degree - 2, module.basis.clone(), module.basis.clone())
        });
        let word = e.on.iter().map(|n| lookup(module, n)).collect::<Result<Vec<_>, _>>()?;
        for (i, c) in build_combo::<S>(&e.value, module, spec)?.iter() {
            mm.add_entry(word.clone(), *i, c.clone());
        }
    }
    Ok(by_arity.into_values().collect())
}

fn build_cooperad<S: ScalarCodec>(
    choice: &CooperadChoice,
    max_arity: usize,
    spec: &FieldSpec,
) -> Result<Arc<Cooperad<S>>, CmdError> {
    match choice {
        CooperadChoice::Builtin(name) if name == "ainf" => {
            Ok(Cooperad::<S>::deconcatenation(max_arity))
        }
        CooperadChoice::Builtin(name) => invalid(format!("unknown builtin cooperad '{name}'")),
        CooperadChoice::File { file } => {
            let parsed: CooperadFile = crate::format::read_json(file)?;
            let spec = spec.clone();
            let coop = Cooperad::<S>::from_file(&parsed, |s| {
                S::parse_scalar(s, &spec)
            })
            .map_err(CmdError::Invalid)?;
            if coop.max_arity() < max_arity {
                return invalid(format!(
                    "cooperad file only reaches arity {}, need {max_arity}",
                    coop.max_arity()
                ));
            }
            let report = coop.validate();
            if !report.pass() {
                return invalid(format!(
                    "cooperad file fails validation: {}",
                    report.failures.join("; ")
                ));
            }
            Ok(Arc::new(coop))
        }
    }
}

/// Structure terms of the main (or target) section as coderivation terms.
fn section_structure_terms<S: ScalarCodec>(
    product: &[ProductEntry],
    operations: &[OperationEntry],
    data: &Arc<CofreeData<S>>,
    module: &GradedModule,
    spec: &FieldSpec,
) -> Result<Vec<(usize, GradedMap<S>)>, CmdError> {
    let mut out = Vec::new();
    let mut seen_arity2 = false;
    if !product.is_empty() {
        let mm = build_product::<S>(product, module, spec)?;
        out.push((2, multilinear_to_term(&mm, data, data.complex.basis().clone())));
        seen_arity2 = true;
    }
    for mm in build_operations::<S>(operations, module, spec)? {
        if mm.arity() == 2 && seen_arity2 {
            return invalid("both a product and an arity-2 operation were given");
        }
        if data.slice(mm.arity()).label_count() != 1 {
            return invalid("operation entries need one-dimensional cooperad pieces; supply labeled terms instead");
        }
        out.push((mm.arity(), multilinear_to_term(&mm, data, data.complex.basis().clone())));
    }
    Ok(out)
}

/// A fully assembled problem, plus what the classical pipeline derived.
pub struct BuiltProblem<S: ScalarCodec> {
    pub problem: TransferProblem<S>,
    pub direction: Direction,
}

pub fn build_problem<S: ScalarCodec>(
    pf: &ProblemFile,
    direction: Direction,
    opts: &Options,
) -> Result<BuiltProblem<S>, CmdError> {
    if pf.format != FORMAT_VERSION {
        return invalid(format!("unsupported format {}", pf.format));
    }
    pf.field.validate().map_err(CmdError::Invalid)?;
    let negate = effective_negation(pf, opts);
    let max_arity = opts.max_arity.or(pf.max_arity).unwrap_or(3);
    if max_arity < 1 {
        return invalid("max arity must be at least 1");
    }
    let cooperad = build_cooperad::<S>(&pf.cooperad, max_arity, &pf.field)?;
    let main = build_complex::<S>(&pf.basis, &pf.differential, negate, &pf.field)?;

    let built = match (&pf.target, direction) {
        (Some(target), _) => {
            let other = build_complex::<S>(&target.basis, &target.differential, negate, &pf.field)?;
            let mut f = GradedMap::zero(main.basis().clone(), other.basis().clone(), 0);
            let main_module = main.module.clone();
            let other_module = other.module.clone();
            for entry in &target.map {
                let j = lookup(&main_module, &entry.on)?;
                for (i, c) in build_combo::<S>(&entry.value, &other_module, &pf.field)?.iter() {
                    f.add_entry(j, *i, c.clone());
                }
            }
            let side = match direction {
                Direction::Down => StructureSide::Target,
                Direction::Up => StructureSide::Source,
            };
            let (prod_entries, op_entries, module) = match direction {
                Direction::Down => (&target.product, &target.operations, other_module.clone()),
                Direction::Up => (&pf.product, &pf.operations, main_module.clone()),
            };
            let field = pf.field.clone();
            let mut term_err = None;
            let problem = TransferProblem::new(
                cooperad,
                main,
                other,
                f,
                side,
                max_arity,
                |carrier| {
                    match section_structure_terms::<S>(
                        prod_entries,
                        op_entries,
                        carrier,
                        &module,
                        &field,
                    ) {
                        Ok(terms) => terms,
                        Err(e) => {
                            term_err = Some(e);
                            Vec::new()
                        }
                    }
                },
            );
            if let Some(e) = term_err {
                return Err(e);
            }
            problem.map_err(CmdError::Invalid)?
        }
        (None, Direction::Down) => {
            // Classical pipeline: W is the file's algebra, V its homology,
            // f the chosen representing cycles.
            if pf.product.is_empty() && pf.operations.is_empty() {
                return invalid("transfer down needs a product or operations on the complex");
            }
            let window = Window::around(main.basis());
            let h = homology(&main, window);
            let field = pf.field.clone();
            let module = main.module.clone();
            let (prod, ops) = (pf.product.clone(), pf.operations.clone());
            let mut term_err = None;
            let problem = TransferProblem::new(
                cooperad,
                h.complex.clone(),
                main,
                h.representatives.clone(),
                StructureSide::Target,
                max_arity,
                |carrier| match section_structure_terms::<S>(&prod, &ops, carrier, &module, &field)
                {
                    Ok(terms) => terms,
                    Err(e) => {
                        term_err = Some(e);
                        Vec::new()
                    }
                },
            );
            if let Some(e) = term_err {
                return Err(e);
            }
            problem.map_err(CmdError::Invalid)?
        }
        (None, Direction::Up) => {
            // Classical pipeline upward: V is the file's algebra, W its
            // homology, f the projection onto classes.
            if pf.product.is_empty() && pf.operations.is_empty() {
                return invalid("transfer up needs a product or operations on the complex");
            }
            let window = Window::around(main.basis());
            let h = homology(&main, window);
            let field = pf.field.clone();
            let module = main.module.clone();
            let (prod, ops) = (pf.product.clone(), pf.operations.clone());
            let mut term_err = None;
            let problem = TransferProblem::new(
                cooperad,
                main,
                h.complex.clone(),
                h.projection.clone(),
                StructureSide::Source,
                max_arity,
                |carrier| match section_structure_terms::<S>(&prod, &ops, carrier, &module, &field)
                {
                    Ok(terms) => terms,
                    Err(e) => {
                        term_err = Some(e);
                        Vec::new()
                    }
                },
            );
            if let Some(e) = term_err {
                return Err(e);
            }
            problem.map_err(CmdError::Invalid)?
        }
    };
    Ok(BuiltProblem { problem: built, direction })
}

pub fn cmd_homology<S: ScalarCodec>(
    pf: &ProblemFile,
    opts: &Options,
) -> Result<String, CmdError> {
    if pf.format != FORMAT_VERSION {
        return invalid(format!("unsupported format {}", pf.format));
    }
    pf.field.validate().map_err(CmdError::Invalid)?;
    let negate = effective_negation(pf, opts);
    let complex = build_complex::<S>(&pf.basis, &pf.differential, negate, &pf.field)?;
    let window = opts
        .window
        .or(pf.window)
        .map(|(lo, hi)| Window::new(lo.min(hi), lo.max(hi)))
        .unwrap_or_else(|| Window::around(complex.basis()));
    let h = homology(&complex, window);
    let mut out = String::new();
    let mut total = 0usize;
    for k in window.iter() {
        let dim = h.complex.basis().dim_in(k);
        if dim == 0 {
            continue;
        }
        total += dim;
        out.push_str(&format!("degree {k}: dim {dim}\n"));
        for &idx in h.complex.basis().indices_in(k) {
            let rep = h.representatives.apply_index(idx);
            let rendered = render_combo::<S>(&rep, &complex.module);
            out.push_str(&format!("  {} = {rendered}\n", h.complex.module.name(idx)));
        }
    }
    out.push_str(&format!("total dimension {total}\n"));
    Ok(out)
}

fn render_combo<S: ScalarCodec>(v: &SparseVec<S>, module: &GradedModule) -> String {
    if v.is_empty() {
        return "0".into();
    }
    v.iter()
        .map(|(i, c)| {
            if c.is_one() {
                module.name(*i).to_string()
            } else {
                format!("{}*{}", c.render_scalar(), module.name(*i))
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn render_terms<S: ScalarCodec>(
    family_arities: usize,
    term: impl Fn(usize) -> Option<GradedMap<S>>,
    source: &Arc<CofreeData<S>>,
    target_module: &GradedModule,
) -> Vec<TermEntry> {
    let mut out = Vec::new();
    for n in 1..=family_arities {
        if let Some(t) = term(n) {
            for (j, i, c) in t.nonzero_entries() {
                let (label, word) = source.slice(n).decode(j);
                out.push(TermEntry {
                    arity: n,
                    label,
                    word: word
                        .iter()
                        .map(|&w| source.complex.module.name(w).to_string())
                        .collect(),
                    target: target_module.name(i).to_string(),
                    scalar: c.render_scalar(),
                });
            }
        }
    }
    out
}

fn basis_elems(module: &GradedModule) -> Vec<BasisElem> {
    module
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| BasisElem { name: n.clone(), degree: module.basis.degree(i) })
        .collect()
}

fn verification_summary(
    report: &htt_core::transfer::VerifyReport,
    max_arity: usize,
) -> VerificationSummary {
    VerificationSummary {
        pass: report.pass,
        max_arity,
        lines: report.arities.iter().map(|a| a.to_string()).collect(),
    }
}

pub struct TransferOutcome {
    pub result_file: ResultFile,
    pub report: String,
    pub pass: bool,
}

pub fn cmd_transfer<S: ScalarCodec>(
    pf: &ProblemFile,
    direction: Direction,
    opts: &Options,
) -> Result<TransferOutcome, CmdError> {
    let built = build_problem::<S>(pf, direction, opts)?;
    let problem = &built.problem;
    let mut report = String::new();

    if !opts.skip_hypothesis {
        let hyp = check_hypothesis(problem);
        report.push_str(&format!(
            "hypothesis check (map degrees {}..{}): {}\n",
            hyp.window.lo,
            hyp.window.hi,
            if hyp.pass { "pass" } else { "FAIL" }
        ));
        for arity in &hyp.arities {
            let detail: Vec<String> = arity
                .cone
                .iter()
                .map(|(d, dim, h)| format!("deg {d}: dim {dim} homology {h}"))
                .collect();
            report.push_str(&format!(
                "  arity {}: {} ({})\n",
                arity.arity,
                if arity.pass { "ok" } else { "FAIL" },
                detail.join(", ")
            ));
        }
        if !hyp.pass {
            let arity = hyp.first_failing_arity().unwrap_or(1);
            return Err(CmdError::Hypothesis(format!(
                "{report}hypothesis failure at arity {arity}: f does not induce the required isomorphisms"
            )));
        }
    }

    let run = match direction {
        Direction::Down => transfer_down(problem, opts.policy),
        Direction::Up => transfer_up(problem, opts.policy),
    };
    let result = match run {
        Ok(r) => r,
        Err(TransferError::Hypothesis { arity, stage, partial }) => {
            report.push_str(&render_trace(&partial.trace));
            report.push_str(&format!("hypothesis failure at arity {arity} ({stage})\n"));
            let rf = result_file_of::<S>(pf, direction, problem, &partial, false)?;
            crate::format::write_json(&rf, opts.out.as_deref()).map_err(CmdError::Invalid)?;
            return Err(CmdError::Hypothesis(format!(
                "{report}partial result up to arity {} emitted", arity - 1
            )));
        }
        Err(TransferError::Checkpoint { arity, identity }) => {
            return Err(CmdError::Internal(format!(
                "internal checkpoint failure at arity {arity}: {identity}"
            )));
        }
    };

    report.push_str(&render_trace(&result.trace));
    let (mu, nu) = match direction {
        Direction::Down => (&result.coderivation, &problem.given),
        Direction::Up => (&problem.given, &result.coderivation),
    };
    let verification = verify(mu, &result.morphism, nu, problem.max_arity);
    for line in &verification.arities {
        report.push_str(&format!("{line}\n"));
    }
    let pass = verification.pass;
    report.push_str(if pass { "verification: PASS\n" } else { "verification: FAIL\n" });

    let mut rf = result_file_of::<S>(pf, direction, problem, &result, pass)?;
    rf.verification = verification_summary(&verification, problem.max_arity);
    crate::format::write_json(&rf, opts.out.as_deref()).map_err(CmdError::Invalid)?;
    Ok(TransferOutcome { result_file: rf, report, pass })
}

fn result_file_of<S: ScalarCodec>(
    pf: &ProblemFile,
    direction: Direction,
    problem: &TransferProblem<S>,
    result: &TransferResult<S>,
    pass: bool,
) -> Result<ResultFile, CmdError> {
    let (structure_data, other_module) = match direction {
        Direction::Down => (&problem.v, &problem.w.complex.module),
        Direction::Up => (&problem.w, &problem.v.complex.module),
    };
    let structure = render_terms::<S>(
        problem.max_arity,
        |n| result.coderivation.term(n).cloned(),
        structure_data,
        &structure_data.complex.module,
    );
    let morphism = render_terms::<S>(
        problem.max_arity,
        |n| result.morphism.term(n).cloned(),
        &problem.v,
        &problem.w.complex.module,
    );
    Ok(ResultFile {
        format: FORMAT_VERSION,
        field: pf.field.clone(),
        direction: direction.as_str().into(),
        max_arity: problem.max_arity,
        structure_basis: basis_elems(&structure_data.complex.module),
        other_basis: basis_elems(other_module),
        structure,
        morphism,
        verification: VerificationSummary { pass, max_arity: problem.max_arity, lines: Vec::new() },
        trace: result.trace.iter().map(|t| t.to_string()).collect(),
    })
}

fn check_basis_match(stored: &[BasisElem], module: &GradedModule) -> Result<(), CmdError> {
    if stored.len() != module.dim() {
        return invalid("basis mismatch between result file and problem");
    }
    for (i, b) in stored.iter().enumerate() {
        if module.name(i) != b.name || module.basis.degree(i) != b.degree {
            return invalid(format!(
                "basis mismatch at '{}' (expected '{}' in degree {})",
                b.name,
                module.name(i),
                module.basis.degree(i)
            ));
        }
    }
    Ok(())
}

fn ingest_terms<S: ScalarCodec>(
    entries: &[TermEntry],
    data: &Arc<CofreeData<S>>,
    target: &GradedModule,
    degree: Degree,
    max_arity: usize,
    spec: &FieldSpec,
) -> Result<Vec<(usize, GradedMap<S>)>, CmdError> {
    let mut by_arity: std::collections::BTreeMap<usize, GradedMap<S>> = Default::default();
    for e in entries {
        if e.arity < 1 || e.arity > max_arity {
            return invalid(format!("term arity {} out of range", e.arity));
        }
        let slice = data.slice(e.arity);
        if e.word.len() != e.arity {
            return invalid("term word length does not match its arity");
        }
        let word = e
            .word
            .iter()
            .map(|n| lookup(&data.complex.module, n))
            .collect::<Result<Vec<_>, _>>()?;
        if e.label >= slice.label_count() {
            return invalid("term label out of range");
        }
        let j = slice.encode(e.label, &word);
        let i = lookup(target, &e.target)?;
        let c = S::parse_scalar(&e.scalar, spec).map_err(CmdError::Invalid)?;
        let arity_degree = degree; // terms of a coderivation share one degree
        let map = by_arity.entry(e.arity).or_insert_with(|| {
            GradedMap::zero(slice.basis.clone(), target.basis.clone(), arity_degree)
        });
        map.add_entry(j, i, c);
    }
    Ok(by_arity.into_iter().collect())
}

/// Rebuild (μ, F, ν) from a problem + result pair, on the right sides.
#[allow(clippy::type_complexity)]
fn reconstruct<S: ScalarCodec>(
    pf: &ProblemFile,
    rf: &ResultFile,
    opts: &Options,
) -> Result<
    (BuiltProblem<S>, ArityCoderivation<S>, ArityMorphism<S>),
    CmdError,
> {
    if rf.format != FORMAT_VERSION {
        return invalid(format!("unsupported result format {}", rf.format));
    }
    if rf.field != pf.field {
        return invalid("result and problem use different fields");
    }
    let direction = match rf.direction.as_str() {
        "down" => Direction::Down,
        "up" => Direction::Up,
        other => return invalid(format!("unknown direction '{other}'")),
    };
    let mut opts = opts.clone();
    opts.max_arity = Some(rf.max_arity);
    let built = build_problem::<S>(pf, direction, &opts)?;
    let problem = &built.problem;
    let (structure_data, _other) = match direction {
        Direction::Down => (&problem.v, &problem.w),
        Direction::Up => (&problem.w, &problem.v),
    };
    check_basis_match(&rf.structure_basis, &structure_data.complex.module)?;

    let mut coder = ArityCoderivation::self_coderivation(structure_data.clone(), -1);
    for (n, term) in ingest_terms::<S>(
        &rf.structure,
        structure_data,
        &structure_data.complex.module,
        -1,
        rf.max_arity,
        &pf.field,
    )? {
        coder.set_term(n, term);
    }
    let mut morph_family = TermFamily::zero(0, problem.v.max_arity());
    for (n, term) in ingest_terms::<S>(
        &rf.morphism,
        &problem.v,
        &problem.w.complex.module,
        0,
        rf.max_arity,
        &pf.field,
    )? {
        morph_family.set_term(n, term);
    }
    let morphism = ArityMorphism::new(problem.v.clone(), problem.w.clone(), morph_family)
        .map_err(CmdError::Invalid)?;
    Ok((built, coder, morphism))
}

pub fn cmd_verify<S: ScalarCodec>(
    pf: &ProblemFile,
    rf: &ResultFile,
    opts: &Options,
) -> Result<(String, bool), CmdError> {
    let (built, coder, morphism) = reconstruct::<S>(pf, rf, opts)?;
    let problem = &built.problem;
    let (mu, nu) = match built.direction {
        Direction::Down => (&coder, &problem.given),
        Direction::Up => (&problem.given, &coder),
    };
    let report = verify(mu, &morphism, nu, rf.max_arity);
    let mut out = String::new();
    for line in &report.arities {
        out.push_str(&format!("{line}\n"));
    }
    out.push_str(if report.pass { "verification: PASS\n" } else { "verification: FAIL\n" });
    if let Some(n) = report.max_failing_arity {
        out.push_str(&format!("maximal failing arity: {n}\n"));
    }
    Ok((out, report.pass))
}

pub fn cmd_compare<S: ScalarCodec>(
    pf: &ProblemFile,
    left: &ResultFile,
    right: &ResultFile,
    opts: &Options,
) -> Result<(ComparisonFile, String), CmdError> {
    if left.field != right.field {
        return invalid("results come from different fields");
    }
    if left.direction != right.direction || left.max_arity != right.max_arity {
        return invalid("results are not comparable (direction or truncation differ)");
    }
    let (built, mu_a, f_a) = reconstruct::<S>(pf, left, opts)?;
    let (_, mu_b, f_b) = reconstruct::<S>(pf, right, opts)?;
    let problem = &built.problem;
    let max_arity = left.max_arity;

    let comparison: Result<ComparisonResult<S>, ComparisonError<S>> = match built.direction {
        Direction::Down => {
            compare_down(&mu_a, &mu_b, &f_a, &f_b, &problem.given, max_arity, opts.policy)
        }
        Direction::Up => {
            compare_up(&mu_a, &mu_b, &f_a, &f_b, &problem.given, max_arity, opts.policy)
        }
    };
    let comparison = match comparison {
        Ok(c) => c,
        Err(ComparisonError::Precondition(msg)) => return invalid(msg),
        Err(ComparisonError::Hypothesis { arity, stage, .. }) => {
            return Err(CmdError::Hypothesis(format!(
                "hypothesis failure at arity {arity} ({stage})"
            )))
        }
        Err(ComparisonError::Checkpoint { arity, identity }) => {
            return Err(CmdError::Internal(format!(
                "internal checkpoint failure at arity {arity}: {identity}"
            )))
        }
    };

    // Replay both identities through the public surface for the report.
    let mut checks = Vec::new();
    let mut pass = true;
    for n in 1..=max_arity {
        let (intertwine, homotopy) = match built.direction {
            Direction::Down => {
                let g = mixed_arity(&comparison.iso, &mu_a, &mu_b, n);
                let lead = compose_morphisms_arity(&f_b, &comparison.iso, n);
                let lead = match f_a.term(n) {
                    Some(t) => lead.sub(t),
                    None => lead,
                };
                let defect =
                    lead.sub(&ff_mixed_arity(&comparison.homotopy, &mu_a, &problem.given, n));
                (g.is_zero(), defect.is_zero())
            }
            Direction::Up => {
                let g = mixed_arity(&comparison.iso, &mu_b, &mu_a, n);
                let lead = compose_morphisms_arity(&comparison.iso, &f_b, n);
                let lead = match f_a.term(n) {
                    Some(t) => lead.sub(t),
                    None => lead,
                };
                let defect =
                    lead.sub(&ff_mixed_arity(&comparison.homotopy, &problem.given, &mu_a, n));
                (g.is_zero(), defect.is_zero())
            }
        };
        pass &= intertwine && homotopy;
        checks.push(format!(
            "arity {n}: intertwine={} homotopy={}",
            if intertwine { "ok" } else { "FAIL" },
            if homotopy { "ok" } else { "FAIL" }
        ));
    }

    let (iso_data, _) = match built.direction {
        Direction::Down => (&problem.v, &problem.w),
        Direction::Up => (&problem.w, &problem.v),
    };
    let iso = render_terms::<S>(
        max_arity,
        |n| comparison.iso.term(n).cloned(),
        iso_data,
        &iso_data.complex.module,
    );
    let homotopy = render_terms::<S>(
        max_arity,
        |n| comparison.homotopy.term(n).cloned(),
        &problem.v,
        &problem.w.complex.module,
    );
    let file = ComparisonFile {
        format: FORMAT_VERSION,
        field: pf.field.clone(),
        direction: built.direction.as_str().into(),
        max_arity,
        iso,
        homotopy,
        checks: checks.clone(),
        pass,
    };
    crate::format::write_json(&file, opts.out.as_deref()).map_err(CmdError::Invalid)?;
    let mut report = checks.join("\n");
    report.push('\n');
    report.push_str(if pass { "comparison: PASS\n" } else { "comparison: FAIL\n" });
    Ok((file, report))
}

pub fn cmd_massey<S: ScalarCodec>(
    pf: &ProblemFile,
    class_names: &[String; 3],
    opts: &Options,
) -> Result<String, CmdError> {
    if pf.format != FORMAT_VERSION {
        return invalid(format!("unsupported format {}", pf.format));
    }
    pf.field.validate().map_err(CmdError::Invalid)?;
    if pf.target.is_some() {
        return invalid("massey products need a single-complex algebra problem");
    }
    let negate = effective_negation(pf, opts);
    let complex = build_complex::<S>(&pf.basis, &pf.differential, negate, &pf.field)?;
    if pf.product.is_empty() {
        return invalid("massey products need a product on the complex");
    }
    let product = build_product::<S>(&pf.product, &complex.module, &pf.field)?;
    let unit = match &pf.unit {
        Some(u) => Some(lookup(&complex.module, u)?),
        None => None,
    };
    let algebra = DgAlgebra::new(complex, product, unit).map_err(CmdError::Invalid)?;
    let max_arity = opts.max_arity.or(pf.max_arity).unwrap_or(3).max(3);
    let transfer = transfer_to_homology(&algebra, max_arity, opts.policy).map_err(|e| match e {
        TransferError::Hypothesis { arity, stage, .. } => {
            CmdError::Hypothesis(format!("hypothesis failure at arity {arity} ({stage})"))
        }
        TransferError::Checkpoint { arity, identity } => {
            CmdError::Internal(format!("internal checkpoint failure at arity {arity}: {identity}"))
        }
    })?;
    let h_module = &transfer.structure.complex.module;
    let resolve = |name: &str| -> Result<SparseVec<S>, CmdError> {
        let direct = h_module.index_of(name);
        let bracketed = h_module.index_of(&format!("[{name}]"));
        match direct.or(bracketed) {
            Some(i) => Ok(SparseVec::unit(i, S::one())),
            None => invalid(format!(
                "unknown homology class '{name}' (classes: {})",
                h_module.names.join(", ")
            )),
        }
    };
    let a = resolve(&class_names[0])?;
    let b = resolve(&class_names[1])?;
    let c = resolve(&class_names[2])?;
    let massey = massey_triple(&transfer.structure, &a, &b, &c).map_err(CmdError::Invalid)?;
    let mut out = String::new();
    out.push_str(&format!(
        "massey <{}, {}, {}>\n",
        class_names[0], class_names[1], class_names[2]
    ));
    out.push_str(&format!("degree: {}\n", massey.degree));
    out.push_str(&format!("class: {}\n", render_combo::<S>(&massey.class, h_module)));
    if massey.indeterminacy.is_empty() {
        out.push_str("indeterminacy: 0\n");
    } else {
        out.push_str(&format!("indeterminacy: dim {}\n", massey.indeterminacy.len()));
        for v in &massey.indeterminacy {
            out.push_str(&format!("  {}\n", render_combo::<S>(v, h_module)));
        }
    }
    Ok(out)
}
