use std::time::Instant;
use htt_core::ainf::*;
use htt_core::codercalc::*;
use htt_core::transfer::*;
use htt_core::PivotPolicy;

fn main() {
    let alg = monomial_dga::<htt_core::Rational>(
        &[("e1", -1), ("e2", -1), ("e3", -1)],
        &[("e3", vec![("e1e2", 1)])],
    )
    .unwrap();
    let t0 = Instant::now();
    let window = htt_core::Window::around(alg.complex.basis());
    let h = htt_core::gradedcx::homology::homology(&alg.complex, window);
    eprintln!("homology: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let cooperad = htt_core::cooperad::Cooperad::<htt_core::Rational>::deconcatenation(5);
    let problem = TransferProblem::new(
        cooperad,
        h.complex.clone(),
        alg.complex.clone(),
        h.representatives.clone(),
        StructureSide::Target,
        5,
        |w| vec![(2, multilinear_to_term(&alg.product, w, w.complex.basis().clone()))],
    )
    .unwrap();
    eprintln!("problem build (incl. square-zero ingestion): {:?}", t0.elapsed());
    let t0 = Instant::now();
    let result = transfer_down(&problem, PivotPolicy::Forward).unwrap();
    eprintln!("transfer_down: {:?}", t0.elapsed());
    for line in &result.trace { eprintln!("  {line}"); }
    let t0 = Instant::now();
    let report = verify(&result.coderivation, &result.morphism, &problem.given, 5);
    eprintln!("verify: {:?} pass={}", t0.elapsed(), report.pass);
}
