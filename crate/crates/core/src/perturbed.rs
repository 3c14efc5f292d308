//! Classical solutions of the perturbed systems `N_i x' = x + f` with N_i
//! nonsingular. Writing A = N_i^-1, the solution is
//!
//! ```text
//! x_i(t) = e^{A t} x0 + integral_0^t e^{A (t-tau)} A f(tau) dtau,
//! ```
//!
//! evaluated pointwise through the matrix exponential and adaptive
//! quadrature — no ODE stepping, so distinct time points are independent.
//! The boundary layer has width 1/rho with rho the spectral radius of A;
//! integrations are pre-split at multiples of it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quad::{self, QuadratureSpec};
use crate::singular::Forcing;
use crate::signal::PiecewiseSignal;

/// How the nonsingular members N_i are generated from the base matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// N - (1/i) I
    Shift,
    /// N - (c/i) I with c > 0
    ScaledShift { c: f64 },
    /// Explicit members, keyed by index.
    Custom { members: BTreeMap<usize, Matrix> },
}

/// A perturbation family: the base (nilpotent) matrix plus the perturbation
/// rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFamily {
    pub base: Matrix,
    #[serde(flatten)]
    pub kind: FamilyKind,
}

impl PerturbationFamily {
    pub fn new(base: Matrix, kind: FamilyKind) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::DimensionMismatch {
                expected: base.nrows(),
                got: base.ncols(),
            });
        }
        if let FamilyKind::ScaledShift { c } = kind {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidInput(
                    "scaled shift coefficient must be positive".into(),
                ));
            }
        }
        if let FamilyKind::Custom { members } = &kind {
            let n = base.nrows();
            for (idx, m) in members {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.nrows(),
                    });
                }
                if *idx == 0 {
                    return Err(Error::InvalidInput(
                        "custom family indices start at 1".into(),
                    ));
                }
            }
        }
        Ok(PerturbationFamily { base, kind })
    }

    pub fn shift(base: Matrix) -> Self {
        PerturbationFamily::new(base, FamilyKind::Shift).expect("square base")
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// The member N_i, checked nonsingular.
    pub fn realize(&self, i: usize) -> Result<Matrix> {
        assert!(i >= 1, "family indices start at 1");
        let n_i = match &self.kind {
            FamilyKind::Shift => self
                .base
                .sub(&Matrix::identity(self.dim()).scale(1.0 / i as f64)),
            FamilyKind::ScaledShift { c } => self
                .base
                .sub(&Matrix::identity(self.dim()).scale(c / i as f64)),
            FamilyKind::Custom { members } => members
                .get(&i)
                .cloned()
                .ok_or(Error::MissingIndex { index: i })?,
        };
        if n_i.lu(1e-14).is_err() {
            return Err(Error::SingularMember { index: i });
        }
        Ok(n_i)
    }
}

/// Spectral quantities of A = N_i^-1 driving the layer behavior.
#[derive(Debug, Clone, Copy)]
pub struct LayerData {
    /// Spectral radius of A; the boundary layer has width 1/rho.
    pub rho: f64,
    /// Largest real part over the spectrum of A; nonnegative means the
    /// exponential does not decay.
    pub abscissa: f64,
}

/// Spectrum of N_i^-1 from the spectrum of N_i: lambda -> 1/lambda.
pub fn layer_data(n_i: &Matrix) -> Result<LayerData> {
    let eigs = n_i.eigenvalues()?;
    let mut rho: f64 = 0.0;
    let mut abscissa = f64::NEG_INFINITY;
    for (re, im) in eigs {
        let mag2 = re * re + im * im;
        if mag2 == 0.0 {
            return Err(Error::Singular {
                pivot: 0.0,
                threshold: 0.0,
            });
        }
        rho = rho.max(1.0 / mag2.sqrt());
        abscissa = abscissa.max(re / mag2);
    }
    Ok(LayerData { rho, abscissa })
}

/// Pointwise evaluator for one perturbed system, reusable across many time
/// points and derivative probes.
pub struct PerturbedSolver {
    n_i: Matrix,
    a: Matrix,
    layer: LayerData,
    f: PiecewiseSignal,
    af: PiecewiseSignal,
    x0: Vec<f64>,
}

impl PerturbedSolver {
    pub fn new(n_i: Matrix, x0: Vec<f64>, f: &Forcing) -> Result<Self> {
        let n = n_i.nrows();
        if x0.len() != n || f.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if x0.len() != n { x0.len() } else { f.dim() },
            });
        }
        let a = n_i.inverse(1e-14)?;
        let layer = layer_data(&n_i)?;
        let f = f.to_piecewise();
        let af = f.matrix_apply(&a);
        Ok(PerturbedSolver {
            n_i,
            a,
            layer,
            f,
            af,
            x0,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.n_i
    }

    pub fn inverse(&self) -> &Matrix {
        &self.a
    }

    pub fn layer(&self) -> LayerData {
        self.layer
    }

    pub fn layer_width(&self) -> f64 {
        1.0 / self.layer.rho
    }

    /// Interior breakpoints of the forcing signal; integrations of the
    /// trajectory should cut there as well.
    pub fn forcing_breakpoints(&self) -> &[f64] {
        self.f.breakpoints()
    }

    /// Layer-resolving split points for an integration over [0, hi] in time.
    pub fn layer_breakpoints(&self, hi: f64) -> Vec<f64> {
        let width = self.layer_width();
        (1..=10)
            .map(|j| j as f64 * width)
            .filter(|t| *t < hi)
            .collect()
    }

    /// x_i(t) per the variation-of-constants formula.
    pub fn eval(&self, t: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(self.x0.clone());
        }
        // The convolution kernel varies on the layer scale near tau = t.
        let cuts: Vec<f64> = self.layer_breakpoints(t).iter().map(|w| t - w).collect();
        linear_ode_eval(&self.a, &self.x0, &self.af, t, &cuts, quad)
    }

    /// Residual of the derivative identity
    /// `x_i^(m) = A^m x_i + sum_{l=1}^m A^l f^(m-l)`, with the left side
    /// estimated by an m-th order central difference of step
    /// `eps^(1/(m+2)) * (1 + |t|)`. Requires t at least one layer width from
    /// the initial instant so the difference stencil avoids the layer's
    /// steep derivatives.
    pub fn derivative_identity_residual(
        &self,
        m: usize,
        t: f64,
        quad: &QuadratureSpec,
    ) -> Result<f64> {
        assert!(m >= 1);
        if t < self.layer_width() {
            return Err(Error::Precondition(format!(
                "t = {t} is inside the boundary layer (width {:.3e}); \
                 the finite-difference probe needs t at least one layer width from 0",
                self.layer_width()
            )));
        }
        let h = f64::EPSILON.powf(1.0 / (m as f64 + 2.0)) * (1.0 + t.abs());
        let mut fd = vec![0.0; self.x0.len()];
        for j in 0..=m {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let weight = sign * binomial(m, j);
            let tj = t + (m as f64 / 2.0 - j as f64) * h;
            let xj = self.eval(tj.max(0.0), quad)?;
            for (acc, x) in fd.iter_mut().zip(&xj) {
                *acc += weight * x;
            }
        }
        for v in fd.iter_mut() {
            *v /= h.powi(m as i32);
        }

        let xi = self.eval(t, quad)?;
        let mut rhs = self.a.pow(m).matvec(&xi);
        let mut apow = self.a.clone();
        for l in 1..=m {
            let fderiv = self.f.eval_deriv(t, m - l);
            let term = apow.matvec(&fderiv);
            for (r, v) in rhs.iter_mut().zip(&term) {
                *r += v;
            }
            apow = apow.matmul(&self.a);
        }
        let residual = fd
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(residual)
    }
}

/// Classical trajectory of `x' = A x + u` at time t:
/// `e^{At} x0 + integral_0^t e^{A (t-tau)} u(tau) dtau`, with mandatory
/// quadrature cuts at `extra_cuts` and the breakpoints of u.
pub fn linear_ode_eval(
    a: &Matrix,
    x0: &[f64],
    u: &PiecewiseSignal,
    t: f64,
    extra_cuts: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    assert!(t >= 0.0, "trajectories are evaluated on t >= 0");
    let mut value = a.scale(t).exp()?.matvec(x0);
    if !u.is_zero() && t > 0.0 {
        let mut integrand = |tau: f64| -> Vec<f64> {
            let kernel = a.scale(t - tau).exp().unwrap_or_else(|_| {
                Matrix::from_fn(a.nrows(), a.ncols(), |_, _| f64::NAN)
            });
            kernel.matvec(&u.eval(tau))
        };
        let mut cuts = extra_cuts.to_vec();
        cuts.extend_from_slice(u.breakpoints());
        let out = quad::integrate(&mut integrand, 0.0, t, &cuts, quad)?;
        if out.value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow);
        }
        for (v, add) in value.iter_mut().zip(&out.value) {
            *v += add;
        }
    }
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(value)
}

/// One-shot evaluation of x_i(t); prefer [`PerturbedSolver`] for many points.
pub fn solve_perturbed(
    n_i: &Matrix,
    x0: &[f64],
    f: &Forcing,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    PerturbedSolver::new(n_i.clone(), x0.to_vec(), f)?.eval(t, quad)
}

/// Outcome of a layer-integral estimate `integral_0^inf ||N_i^k e^{At}||_F dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LayerIntegral {
    Bounded { value: f64, error_estimate: f64 },
    Divergent,
}

/// Estimate the k-th layer integral, or report divergence when the
/// exponential does not decay (spectral abscissa of N_i^-1 >= 0).
pub fn layer_integral_estimate(
    n_i: &Matrix,
    k: usize,
    quad: &QuadratureSpec,
) -> Result<LayerIntegral> {
    let a = n_i.inverse(1e-14)?;
    let layer = layer_data(n_i)?;
    if layer.abscissa >= 0.0 {
        return Ok(LayerIntegral::Divergent);
    }
    let npow = n_i.pow(k);
    let mut integrand = |t: f64| -> f64 {
        match a.scale(t).exp() {
            Ok(e) => npow.matmul(&e).frobenius_norm(),
            Err(_) => f64::NAN,
        }
    };
    // Truncate where the integrand is negligible; the exponential tail
    // beyond that is bounded by g(T)/|abscissa| and charged to the error.
    let cutoff = quad.abs_tol * 1e-3;
    let mut horizon = 10.0 / layer.rho;
    let mut tail = integrand(horizon);
    for _ in 0..200 {
        if tail < cutoff || !tail.is_finite() {
            break;
        }
        horizon *= 2.0;
        tail = integrand(horizon);
    }
    let splits: Vec<f64> = (1..=10).map(|j| j as f64 / layer.rho).collect();
    let (value, quad_err) = quad::integrate_scalar(&mut integrand, 0.0, horizon, &splits, quad)?;
    let tail_bound = 2.0 * tail / layer.abscissa.abs();
    Ok(LayerIntegral::Bounded {
        value,
        error_estimate: quad_err + tail_bound,
    })
}

fn binomial(k: usize, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}
