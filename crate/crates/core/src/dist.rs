//! Generalized functions of the shape produced by singular systems: a smooth
//! part supported on [0, inf) (zero extension to negative time) plus a finite
//! series of Dirac impulses and their derivatives concentrated at t = 0.
//! Pairing against a test function evaluates
//! `integral_0^inf smooth(t)^T lambda(t) dt + sum_j (-1)^j c_j^T lambda^(j)(0)`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bump::TestFunction;
use crate::error::{Error, Result};
use crate::quad::{self, QuadratureSpec};
use crate::signal::PiecewiseSignal;

/// Impulse coefficients with euclidean norm at or below this are dropped
/// during normalization, keeping representations canonical for comparison.
pub const IMPULSE_PRUNE_TOL: f64 = 1e-14;

/// One Dirac term: `delta^(order) * coeff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub order: usize,
    pub coeff: Vec<f64>,
}

/// Causal smooth part plus impulses at the initial instant, orders distinct
/// and ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedFunction {
    smooth: PiecewiseSignal,
    impulses: Vec<Impulse>,
}

/// Pairing value with its decomposition; `value` is exactly the sum of the
/// two parts as computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: f64,
    pub integral_part: f64,
    pub impulse_part: f64,
    pub quadrature_error_estimate: f64,
}

impl GeneralizedFunction {
    pub fn new(smooth: PiecewiseSignal, impulses: Vec<Impulse>) -> Result<Self> {
        let dim = smooth.dim();
        for imp in &impulses {
            if imp.coeff.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: imp.coeff.len(),
                });
            }
            if imp.coeff.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(
                    "impulse coefficients must be finite".into(),
                ));
            }
        }
        let mut gf = GeneralizedFunction { smooth, impulses };
        gf.normalize();
        Ok(gf)
    }

    pub fn from_smooth(smooth: PiecewiseSignal) -> Self {
        GeneralizedFunction {
            smooth,
            impulses: Vec::new(),
        }
    }

    pub fn from_impulse(order: usize, coeff: Vec<f64>) -> Self {
        let n = coeff.len();
        GeneralizedFunction::new(PiecewiseSignal::zero(n), vec![Impulse { order, coeff }])
            .expect("dimensions agree by construction")
    }

    pub fn zero(n: usize) -> Self {
        GeneralizedFunction::from_smooth(PiecewiseSignal::zero(n))
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn smooth(&self) -> &PiecewiseSignal {
        &self.smooth
    }

    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    pub fn is_zero(&self) -> bool {
        self.smooth.is_zero() && self.impulses.is_empty()
    }

    /// Sort impulses, merge duplicate orders, drop negligible coefficients.
    fn normalize(&mut self) {
        self.impulses.sort_by_key(|imp| imp.order);
        let mut merged: Vec<Impulse> = Vec::with_capacity(self.impulses.len());
        for imp in self.impulses.drain(..) {
            match merged.last_mut() {
                Some(last) if last.order == imp.order => {
                    for (a, b) in last.coeff.iter_mut().zip(&imp.coeff) {
                        *a += b;
                    }
                }
                _ => merged.push(imp),
            }
        }
        merged.retain(|imp| {
            imp.coeff.iter().map(|c| c * c).sum::<f64>().sqrt() > IMPULSE_PRUNE_TOL
        });
        self.impulses = merged;
    }

    /// Pair against the test function itself.
    pub fn pair(&self, lambda: &TestFunction, quad: &QuadratureSpec) -> Result<PairingResult> {
        self.pair_deriv(lambda, 0, quad)
    }

    /// Pair against the exact `deriv_order`-th derivative of the test
    /// function. Impulse terms contribute `(-1)^j c_j^T lambda^(j+d)(0)`.
    pub fn pair_deriv(
        &self,
        lambda: &TestFunction,
        deriv_order: usize,
        quad: &QuadratureSpec,
    ) -> Result<PairingResult> {
        if lambda.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lambda.dim(),
            });
        }
        let (supp_lo, supp_hi) = lambda.support();
        let lo = supp_lo.max(0.0);
        let hi = supp_hi;
        let (integral_part, quadrature_error_estimate) = if hi > lo && !self.smooth.is_zero() {
            let smooth = &self.smooth;
            let mut integrand = |t: f64| {
                let s = smooth.eval(t);
                let l = lambda.eval(t, deriv_order);
                s.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>()
            };
            quad::integrate_scalar(&mut integrand, lo, hi, smooth.breakpoints(), quad)?
        } else {
            (0.0, 0.0)
        };
        let mut impulse_part = 0.0;
        for imp in &self.impulses {
            let sign = if imp.order % 2 == 0 { 1.0 } else { -1.0 };
            let l = lambda.eval(0.0, imp.order + deriv_order);
            impulse_part += sign * imp.coeff.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(PairingResult {
            value: integral_part + impulse_part,
            integral_part,
            impulse_part,
            quadrature_error_estimate,
        })
    }

    /// Distributional derivative of a causal function: differentiate the
    /// smooth part, add an order-0 impulse carrying the boundary value
    /// smooth(0+), and raise every existing impulse order by one.
    pub fn distributional_derivative(&self) -> GeneralizedFunction {
        let boundary = self.smooth.eval(0.0);
        let mut impulses: Vec<Impulse> = self
            .impulses
            .iter()
            .map(|imp| Impulse {
                order: imp.order + 1,
                coeff: imp.coeff.clone(),
            })
            .collect();
        impulses.push(Impulse {
            order: 0,
            coeff: boundary,
        });
        let mut gf = GeneralizedFunction {
            smooth: self.smooth.differentiate(1),
            impulses,
        };
        gf.normalize();
        gf
    }

    /// Left-multiply both the smooth part and every impulse coefficient by a
    /// constant matrix.
    pub fn matrix_apply(&self, m: &crate::matrix::Matrix) -> GeneralizedFunction {
        let impulses = self
            .impulses
            .iter()
            .map(|imp| Impulse {
                order: imp.order,
                coeff: m.matvec(&imp.coeff),
            })
            .collect();
        let mut gf = GeneralizedFunction {
            smooth: self.smooth.matrix_apply(m),
            impulses,
        };
        gf.normalize();
        gf
    }

    /// Linear combination `a*w1 + b*w2` over the merged breakpoint set.
    pub fn combine(
        a: f64,
        w1: &GeneralizedFunction,
        b: f64,
        w2: &GeneralizedFunction,
    ) -> Result<GeneralizedFunction> {
        if w1.dim() != w2.dim() {
            return Err(Error::DimensionMismatch {
                expected: w1.dim(),
                got: w2.dim(),
            });
        }
        let smooth = w1.smooth.scale(a).add(&w2.smooth.scale(b));
        let mut impulses = Vec::with_capacity(w1.impulses.len() + w2.impulses.len());
        for (scale, source) in [(a, &w1.impulses), (b, &w2.impulses)] {
            for imp in source.iter() {
                impulses.push(Impulse {
                    order: imp.order,
                    coeff: imp.coeff.iter().map(|c| scale * c).collect(),
                });
            }
        }
        let mut gf = GeneralizedFunction { smooth, impulses };
        gf.normalize();
        Ok(gf)
    }
}

#[derive(Serialize, Deserialize)]
struct GeneralizedFunctionRepr {
    smooth: PiecewiseSignal,
    impulses: Vec<Impulse>,
}

impl Serialize for GeneralizedFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GeneralizedFunctionRepr {
            smooth: self.smooth.clone(),
            impulses: self.impulses.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeneralizedFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = GeneralizedFunctionRepr::deserialize(deserializer)?;
        GeneralizedFunction::new(repr.smooth, repr.impulses)
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}
