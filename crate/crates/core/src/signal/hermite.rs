//! Compact-support extension of a smooth signal: keep f on [0, b], follow it
//! with the unique degree-(2q-1) polynomial bridge whose derivatives up to
//! order q-1 match f at b and vanish at b+1, then stay identically zero.
//! The result is C^{q-1} on [0, inf) and absolutely integrable.

use super::{PiecewiseSignal, SignalExpr, VectorSignal};
use crate::matrix::Matrix;

/// Extend `f` past `b` with a polynomial taper that dies at `b + 1`.
///
/// The returned signal equals `f` (same expression tree) for t <= b and is
/// identically zero for t > b + 1; its matching order at both breakpoints is
/// q - 1.
pub fn hermite_extend(f: &VectorSignal, b: f64, q: usize) -> PiecewiseSignal {
    assert!(b > 0.0 && b.is_finite(), "extension point must be positive");
    assert!(q >= 1, "matching order must be at least 1");
    let mut derivs = Vec::with_capacity(q);
    derivs.push(f.clone());
    for k in 1..q {
        derivs.push(derivs[k - 1].differentiate(1));
    }
    let values: Vec<Vec<f64>> = derivs.iter().map(|d| d.eval(b)).collect();
    let bridge = bridge_polynomials(&values, b, q);

    PiecewiseSignal::new(
        vec![b, b + 1.0],
        vec![f.clone(), bridge, VectorSignal::zero(f.dim())],
        q - 1,
    )
    .expect("extension breakpoints are valid by construction")
}

/// [`hermite_extend`] for piecewise signals: pieces left of `b` are kept,
/// everything from `b` on is replaced by the taper. The matching order at
/// the new breakpoints is q - 1; existing interior breakpoints keep the
/// signal's own smoothness order.
pub fn hermite_extend_piecewise(f: &PiecewiseSignal, b: f64, q: usize) -> PiecewiseSignal {
    assert!(b > 0.0 && b.is_finite(), "extension point must be positive");
    assert!(q >= 1, "matching order must be at least 1");
    let values: Vec<Vec<f64>> = (0..q).map(|k| f.eval_deriv(b, k)).collect();
    let bridge = bridge_polynomials(&values, b, q);

    let mut breakpoints: Vec<f64> = f.breakpoints().iter().copied().filter(|p| *p < b).collect();
    let kept = breakpoints.len();
    breakpoints.push(b);
    breakpoints.push(b + 1.0);
    let mut pieces: Vec<VectorSignal> = f.pieces()[..=kept].to_vec();
    pieces.push(bridge);
    pieces.push(VectorSignal::zero(f.dim()));

    let order = if kept == 0 {
        q - 1
    } else {
        f.smoothness_order().min(q - 1)
    };
    PiecewiseSignal::new(breakpoints, pieces, order)
        .expect("extension breakpoints are valid by construction")
}

/// The unique degree-(2q-1) polynomial (in s = t - b) whose derivatives up
/// to order q-1 equal `values` at s = 0 and vanish at s = 1.
fn bridge_polynomials(values: &[Vec<f64>], b: f64, q: usize) -> VectorSignal {
    let n = values[0].len();
    // Conditions at s = 0 determine the low-order coefficients directly:
    // P^(k)(0) = k! a_k. Vanishing at s = 1 then gives a q x q system for
    // the high coefficients: sum_j falling(j, k) a_j = 0 for k < q.
    let system = Matrix::from_fn(q, q, |k, jj| falling(q + jj, k));
    let lu = system
        .lu(0.0)
        .expect("confluent Vandermonde block is invertible");

    let mut bridge = Vec::with_capacity(n);
    for comp in 0..n {
        let mut coeffs = vec![0.0; 2 * q];
        for (k, v) in values.iter().enumerate() {
            coeffs[k] = v[comp] / factorial(k);
        }
        let rhs: Vec<f64> = (0..q)
            .map(|k| -(k..q).map(|j| falling(j, k) * coeffs[j]).sum::<f64>())
            .collect();
        let high = lu.solve(&rhs);
        coeffs[q..].copy_from_slice(&high);
        bridge.push(SignalExpr::polynomial(&coeffs, b));
    }
    VectorSignal::new(bridge)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Falling factorial j! / (j-k)!.
fn falling(j: usize, k: usize) -> f64 {
    (j - k + 1..=j).map(|i| i as f64).product()
}
