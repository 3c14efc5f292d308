//! Exact distributional solution of the reduced singular system
//! `N x' = x + f`, `x(0) = x0`, with N nilpotent of index q:
//!
//! ```text
//! x = -sum_{i=0}^{q-1} N^i f^(i)(t)
//!     - sum_{k=1}^{q-1} delta^(k-1) N^k (x0 + sum_{i=0}^{q-1} N^i f^(i)(0))
//! ```
//!
//! The smooth sum is assembled symbolically; the impulse coefficients measure
//! how far x0 is from the consistent initial set, and vanish exactly on it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dist::{GeneralizedFunction, Impulse, IMPULSE_PRUNE_TOL};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, NilpotencyCert};
use crate::signal::{PiecewiseSignal, VectorSignal};

/// Forcing signal: globally smooth, or piecewise with matched derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Forcing {
    Smooth(VectorSignal),
    Piecewise(PiecewiseSignal),
}

impl Forcing {
    pub fn dim(&self) -> usize {
        match self {
            Forcing::Smooth(s) => s.dim(),
            Forcing::Piecewise(p) => p.dim(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Forcing::Smooth(VectorSignal::zero(n))
    }

    pub fn to_piecewise(&self) -> PiecewiseSignal {
        match self {
            Forcing::Smooth(s) => PiecewiseSignal::from_single(s.clone()),
            Forcing::Piecewise(p) => p.clone(),
        }
    }

    /// Matching order available for repeated symbolic differentiation:
    /// `None` means unlimited (no interior breakpoints).
    pub fn smoothness_limit(&self) -> Option<usize> {
        match self {
            Forcing::Smooth(_) => None,
            Forcing::Piecewise(p) if p.breakpoints().is_empty() => None,
            Forcing::Piecewise(p) => Some(p.smoothness_order()),
        }
    }

    /// Component-wise linear map `g -> M g`; M may be rectangular.
    pub fn matrix_apply(&self, m: &Matrix) -> Forcing {
        match self {
            Forcing::Smooth(s) => Forcing::Smooth(s.matrix_apply(m)),
            Forcing::Piecewise(p) => Forcing::Piecewise(p.matrix_apply(m)),
        }
    }
}

/// Problem data for the reduced system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    #[serde(rename = "N")]
    pub n_matrix: Matrix,
    pub x0: Vec<f64>,
    pub f: Forcing,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-9
}

impl SolveRequest {
    pub fn dim(&self) -> usize {
        self.n_matrix.nrows()
    }

    fn validate(&self) -> Result<usize> {
        let n = self.n_matrix.nrows();
        if !self.n_matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.n_matrix.ncols(),
            });
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.x0.len(),
            });
        }
        if self.f.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.f.dim(),
            });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("x0 must be finite".into()));
        }
        Ok(n)
    }
}

/// Solution together with the certificates a caller usually wants to report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSolution {
    pub solution: GeneralizedFunction,
    pub nilpotency: NilpotencyCert,
    pub consistent: bool,
}

impl fmt::Display for SingularSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "nilpotency index q = {} (residual {:.3e})",
            self.nilpotency.index, self.nilpotency.residual
        )?;
        if self.solution.impulses().is_empty() {
            writeln!(f, "impulses: none (initial condition consistent)")?;
        } else {
            writeln!(f, "impulses:")?;
            for imp in self.solution.impulses() {
                let norm = imp.coeff.iter().map(|c| c * c).sum::<f64>().sqrt();
                writeln!(
                    f,
                    "  delta^({}) coefficient norm {:.6e}",
                    imp.order, norm
                )?;
            }
        }
        write!(
            f,
            "initial condition {} the consistent set",
            if self.consistent { "lies in" } else { "lies outside" }
        )
    }
}

/// Exact solution of the reduced system.
pub fn solve_singular(req: &SolveRequest) -> Result<GeneralizedFunction> {
    Ok(solve_singular_full(req)?.solution)
}

/// Exact solution plus the nilpotency certificate and consistency verdict.
pub fn solve_singular_full(req: &SolveRequest) -> Result<SingularSolution> {
    let cert = precheck(req)?;
    let solution = assemble(req, cert.index)?;
    let consistent = solution.impulses().is_empty();
    Ok(SingularSolution {
        solution,
        nilpotency: cert,
        consistent,
    })
}

/// True iff x0 lies in the consistent initial set, i.e. every impulse
/// coefficient `N^k (x0 + sum N^i f^(i)(0))` vanishes.
pub fn consistent_initial_set_check(
    n_matrix: &Matrix,
    f: &Forcing,
    x0: &[f64],
    tol: f64,
) -> Result<bool> {
    let req = SolveRequest {
        n_matrix: n_matrix.clone(),
        x0: x0.to_vec(),
        f: f.clone(),
        tol,
    };
    let cert = precheck(&req)?;
    let q = cert.index;
    let bracket = impulse_bracket(&req, q);
    let mut power = n_matrix.clone();
    for _ in 1..q {
        let coeff = power.matvec(&bracket);
        if coeff.iter().map(|c| c * c).sum::<f64>().sqrt() > IMPULSE_PRUNE_TOL {
            return Ok(false);
        }
        power = power.matmul(n_matrix);
    }
    Ok(true)
}

fn precheck(req: &SolveRequest) -> Result<NilpotencyCert> {
    req.validate()?;
    let cert = req.n_matrix.nilpotency_index(req.tol)?;
    if let Some(limit) = req.f.smoothness_limit() {
        if limit + 1 < cert.index {
            return Err(Error::InsufficientSmoothness {
                required: cert.index - 1,
                got: limit,
            });
        }
    }
    Ok(cert)
}

/// `x0 + sum_{i<terms} N^i f^(i)(0)` with right-hand derivatives at 0.
fn impulse_bracket(req: &SolveRequest, terms: usize) -> Vec<f64> {
    let f = req.f.to_piecewise();
    let mut bracket = req.x0.clone();
    let mut power = Matrix::identity(req.dim());
    for i in 0..terms {
        let fi0 = f.eval_deriv(0.0, i);
        let term = power.matvec(&fi0);
        for (b, t) in bracket.iter_mut().zip(&term) {
            *b += t;
        }
        power = power.matmul(&req.n_matrix);
    }
    bracket
}

/// Assemble the solution with `terms` summands in each sum. The public entry
/// uses terms = q; any larger count gives the identical distribution because
/// N^q = 0, which the tests exercise directly.
fn assemble(req: &SolveRequest, terms: usize) -> Result<GeneralizedFunction> {
    let n = req.dim();
    let f = req.f.to_piecewise();
    let mut smooth_sum = PiecewiseSignal::zero(n);
    let mut power = Matrix::identity(n);
    for i in 0..terms {
        let term = f.differentiate(i).matrix_apply(&power);
        smooth_sum = smooth_sum.add(&term);
        power = power.matmul(&req.n_matrix);
    }
    let smooth = smooth_sum.scale(-1.0);

    let bracket = impulse_bracket(req, terms);
    let mut impulses = Vec::new();
    let mut npow = req.n_matrix.clone();
    for k in 1..=terms.saturating_sub(1) {
        let coeff: Vec<f64> = npow.matvec(&bracket).iter().map(|v| -v).collect();
        impulses.push(Impulse { order: k - 1, coeff });
        npow = npow.matmul(&req.n_matrix);
    }
    GeneralizedFunction::new(smooth, impulses)
}
