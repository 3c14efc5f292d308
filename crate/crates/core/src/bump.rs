//! Compactly supported smooth test functions: scaled, shifted and optionally
//! polynomial-modulated copies of the standard bump
//! `psi(u) = exp(-1/(1-u^2))` on (-1, 1), attached to a unit direction
//! vector. Derivatives of any order are evaluated from the exact recurrence
//! `psi^(n) = P_n(u) / (1-u^2)^(2n) * psi(u)` with
//! `P_{n+1} = (1-u^2)^2 P_n' + 4nu(1-u^2) P_n - 2u P_n`, so no nested
//! numerical differentiation is ever needed.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The scaled-variable band `1 - 1e-8 < |u| <= 1` is clamped to zero: there
/// `psi` underflows to 0 while the rational prefactor can overflow, and the
/// clamp keeps every order finite without changing any value above 1e-300.
pub const EDGE_CLAMP: f64 = 1e-8;

/// One test function: `direction * p(u) * psi(u)` with `u = (t - center) / radius`.
///
/// Support is exactly `[center - radius, center + radius]`; the function and
/// all derivatives vanish at the endpoints. `poly` holds the modulation
/// coefficients in ascending powers of `u` (constant 1 when unmodulated).
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    center: f64,
    radius: f64,
    direction: Vec<f64>,
    poly: Vec<f64>,
}

impl TestFunction {
    pub fn new(center: f64, radius: f64, direction: Vec<f64>, poly: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::InvalidInput(
                "test function needs a finite center and positive radius".into(),
            ));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput(
                "test function direction must be a nonzero finite vector".into(),
            ));
        }
        let direction = direction.into_iter().map(|v| v / norm).collect();
        let poly = if poly.is_empty() { vec![1.0] } else { poly };
        if poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "modulation coefficients must be finite".into(),
            ));
        }
        Ok(TestFunction {
            center,
            radius,
            direction,
            poly,
        })
    }

    /// Unmodulated scalar bump (dimension 1).
    pub fn scalar(center: f64, radius: f64) -> Self {
        TestFunction::new(center, radius, vec![1.0], vec![1.0]).expect("valid by construction")
    }

    /// Unmodulated bump along coordinate axis `axis` in dimension n.
    pub fn along_axis(n: usize, axis: usize, center: f64, radius: f64) -> Self {
        let mut dir = vec![0.0; n];
        dir[axis] = 1.0;
        TestFunction::new(center, radius, dir, vec![1.0]).expect("valid by construction")
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Support interval [center - radius, center + radius].
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    /// Scalar factor `(d/dt)^order [p(u) psi(u)]` at time t.
    pub fn scalar_eval(&self, t: f64, order: usize) -> f64 {
        let u = (t - self.center) / self.radius;
        if u.abs() >= 1.0 - EDGE_CLAMP {
            return 0.0;
        }
        // Leibniz over the modulation: d^k(p psi) = sum C(k,m) p^(m) psi^(k-m),
        // then the chain rule contributes radius^-order.
        let psis = psi_derivatives(u, order);
        let mut p = self.poly.clone();
        let mut acc = 0.0;
        for m in 0..=order {
            if p.iter().all(|&c| c == 0.0) {
                break;
            }
            acc += binomial(order, m) * poly_eval(&p, u) * psis[order - m];
            p = poly_deriv(&p);
        }
        acc / self.radius.powi(order as i32)
    }

    /// Full vector value `phi^(order)(t) = direction * scalar_eval(t, order)`.
    pub fn eval(&self, t: f64, order: usize) -> Vec<f64> {
        let s = self.scalar_eval(t, order);
        self.direction.iter().map(|d| d * s).collect()
    }

    /// Compact deterministic description used in reports.
    pub fn label(&self) -> String {
        let axis = self
            .direction
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 0.0)
            .map(|(i, _)| i);
        let dir = match axis {
            Some(i)
                if self
                    .direction
                    .iter()
                    .enumerate()
                    .all(|(j, &v)| j == i || v == 0.0) =>
            {
                format!("e{}", i + 1)
            }
            _ => "mix".to_string(),
        };
        let mut label = format!("{dir}-c{}-r{}", self.center, self.radius);
        let deg = poly_degree(&self.poly);
        if deg > 0 || self.poly[0] != 1.0 {
            label.push_str(&format!("-p{deg}"));
        }
        label
    }
}

#[derive(Serialize, Deserialize)]
struct TestFunctionRepr {
    center: f64,
    radius: f64,
    direction: Vec<f64>,
    #[serde(default)]
    poly: Vec<f64>,
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TestFunctionRepr {
            center: self.center,
            radius: self.radius,
            direction: self.direction.clone(),
            poly: self.poly.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = TestFunctionRepr::deserialize(deserializer)?;
        TestFunction::new(repr.center, repr.radius, repr.direction, repr.poly)
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Deterministic bank of test functions probing every coordinate direction.
///
/// Per direction: a radius-1 bump at the origin-touching center 0 (it sees
/// the boundary layer through its nonzero even derivatives at 0), u^j
/// modulated copies for j = 1..min(q-1, 3) (their odd derivatives at 0 are
/// nonzero, so higher-order impulses register), and radius-1/2 bumps at
/// centers 1, 2 and 4 that avoid t = 0 entirely. All supports end by t = 4.5.
pub fn standard_bank(n: usize, q: usize) -> Vec<TestFunction> {
    assert!(q >= 1);
    let mut bank = Vec::new();
    for axis in 0..n {
        bank.push(TestFunction::along_axis(n, axis, 0.0, 1.0));
        for j in 1..=(q - 1).min(3) {
            let mut poly = vec![0.0; j + 1];
            poly[j] = 1.0;
            let mut dir = vec![0.0; n];
            dir[axis] = 1.0;
            bank.push(TestFunction::new(0.0, 1.0, dir, poly).expect("valid by construction"));
        }
        for center in [1.0, 2.0, 4.0] {
            bank.push(TestFunction::along_axis(n, axis, center, 0.5));
        }
    }
    bank
}

/// psi and its derivatives by u at one point, orders 0..=order.
fn psi_derivatives(u: f64, order: usize) -> Vec<f64> {
    let w = 1.0 - u * u;
    let psi = (-1.0 / w).exp();
    let polys = psi_numerator_polys(order);
    (0..=order)
        .map(|n| poly_eval(&polys[n], u) / w.powi(2 * n as i32) * psi)
        .collect()
}

/// The numerator polynomials P_0..P_order of the derivative recurrence.
fn psi_numerator_polys(order: usize) -> Vec<Vec<f64>> {
    // (1-u^2)^2 and 1-u^2 in ascending coefficients.
    let w2 = [1.0, 0.0, -2.0, 0.0, 1.0];
    let w = [1.0, 0.0, -1.0];
    let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
    for n in 0..order {
        let p = &polys[n];
        let mut next = poly_mul(&w2, &poly_deriv(p));
        let modulated = poly_mul(&w, &poly_mul(&[0.0, 4.0 * n as f64], p));
        next = poly_add(&next, &modulated);
        next = poly_add(&next, &poly_mul(&[0.0, -2.0], p));
        polys.push(next);
    }
    polys
}

fn poly_eval(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

fn poly_degree(coeffs: &[f64]) -> usize {
    coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .unwrap_or(0)
}

fn binomial(k: usize, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}
