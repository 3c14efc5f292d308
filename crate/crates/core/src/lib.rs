//! Exact distributional solutions of nilpotent singular systems
//! `N x' = x + f` and numerical convergence checks for their stiff
//! singularly perturbed regularizations.

pub mod bump;
pub mod dist;
pub mod error;
pub mod matrix;
pub mod pencil;
pub mod perturbed;
pub mod quad;
pub mod signal;
pub mod singular;
pub mod study;

pub use bump::{standard_bank, TestFunction};
pub use dist::{GeneralizedFunction, Impulse, PairingResult};
pub use error::{Error, Result};
pub use matrix::{Matrix, NilpotencyCert};
pub use pencil::{
    check_regular, solve_descriptor, weierstrass_reduce, DescriptorRequest, DescriptorSolution,
    FastBlock, Pencil, ReducedSystem, SlowBlock,
};
pub use perturbed::{
    layer_data, layer_integral_estimate, solve_perturbed, FamilyKind, LayerData, LayerIntegral,
    PerturbationFamily, PerturbedSolver,
};
pub use quad::{QuadratureOutcome, QuadratureSpec};
pub use signal::{
    hermite_extend, hermite_extend_piecewise, parse_expr, parse_signal, PiecewiseSignal, SignalExpr, VectorSignal,
};
pub use study::{
    localization_check, run_study, uniqueness_study, BankSpec, ConvergenceReport, FamilySpec,
    StudyConfig, StudySystem, UniquenessReport, Verdict,
};
pub use singular::{
    consistent_initial_set_check, solve_singular, solve_singular_full, Forcing, SingularSolution,
    SolveRequest,
};
