//! Solve a 2 x 2 singular system with an inconsistent start, print the
//! impulse series, and watch the stiff approximations converge to the
//! distributional pairing.

use singlim::{
    run_study, solve_singular_full, BankSpec, FamilyKind, FamilySpec, Forcing, Matrix,
    QuadratureSpec, SolveRequest, StudyConfig, StudySystem, TestFunction,
};

fn main() -> singlim::Result<()> {
    let req = SolveRequest {
        n_matrix: Matrix::jordan_nilpotent(2),
        x0: vec![0.0, 1.0],
        f: Forcing::zero(2),
        tol: 1e-9,
    };

    let exact = solve_singular_full(&req)?;
    println!("nilpotency index: {}", exact.nilpotency.index);
    for imp in exact.solution.impulses() {
        println!("delta^({}) coefficient: {:?}", imp.order, imp.coeff);
    }

    let lambda = TestFunction::along_axis(2, 0, 0.0, 1.0);
    let limit = exact.solution.pair(&lambda, &QuadratureSpec::default())?;
    println!("limit pairing: {:+.9}", limit.value);

    let cfg = StudyConfig {
        system: StudySystem::Request(req),
        family: FamilySpec::One(FamilyKind::Shift),
        indices: vec![16, 64, 256],
        bank: BankSpec::Explicit(vec![lambda]),
        quad: QuadratureSpec::default(),
        k_search_max: 3,
        verdict_threshold: None,
    };
    let report = run_study(&cfg)?;
    for row in &report.rows {
        println!(
            "i = {:3}   <x_i, lambda> = {:+.9}   |error| = {:.3e}",
            row.i, row.pairing_perturbed, row.abs_error
        );
    }
    println!("verdict: {:?}", report.verdict);
    Ok(())
}
