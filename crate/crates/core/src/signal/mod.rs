//! A small differentiation-closed expression language for vector-valued
//! forcing signals: polynomials in `t` combined with sin, cos and exp.
//! Signals evaluate exactly, differentiate symbolically, and print back to
//! the same textual grammar they parse from.

mod hermite;
mod parse;

pub use hermite::{hermite_extend, hermite_extend_piecewise};
pub use parse::{parse_expr, parse_signal};

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Scalar expression over the variable `t`.
///
/// Closed under differentiation: the derivative of every variant is again
/// expressible here, and every expression is finite at finite `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalExpr {
    Const(f64),
    Time,
    Neg(Box<SignalExpr>),
    Add(Box<SignalExpr>, Box<SignalExpr>),
    Mul(Box<SignalExpr>, Box<SignalExpr>),
    Pow(Box<SignalExpr>, u32),
    Sin(Box<SignalExpr>),
    Cos(Box<SignalExpr>),
    Exp(Box<SignalExpr>),
}

impl SignalExpr {
    pub fn constant(c: f64) -> Self {
        SignalExpr::Const(c)
    }

    pub fn time() -> Self {
        SignalExpr::Time
    }

    /// Sum with light normalization: constant folding, dropped zero terms,
    /// and `x + (-x) = 0`.
    pub fn add(a: SignalExpr, b: SignalExpr) -> Self {
        match (a, b) {
            (SignalExpr::Const(x), SignalExpr::Const(y)) => SignalExpr::Const(x + y),
            (SignalExpr::Const(c), e) if c == 0.0 => e,
            (e, SignalExpr::Const(c)) if c == 0.0 => e,
            (a, SignalExpr::Neg(b)) if a == *b => SignalExpr::Const(0.0),
            (SignalExpr::Neg(a), b) if *a == b => SignalExpr::Const(0.0),
            (a, b) => SignalExpr::Add(Box::new(a), Box::new(b)),
        }
    }

    /// Product with constant folding and annihilation by zero.
    pub fn mul(a: SignalExpr, b: SignalExpr) -> Self {
        match (a, b) {
            (SignalExpr::Const(x), SignalExpr::Const(y)) => SignalExpr::Const(x * y),
            (SignalExpr::Const(c), _) | (_, SignalExpr::Const(c)) if c == 0.0 => {
                SignalExpr::Const(0.0)
            }
            (SignalExpr::Const(c), e) if c == 1.0 => e,
            (e, SignalExpr::Const(c)) if c == 1.0 => e,
            (SignalExpr::Const(c), e) if c == -1.0 => SignalExpr::neg(e),
            (e, SignalExpr::Const(c)) if c == -1.0 => SignalExpr::neg(e),
            (a, b) => SignalExpr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(e: SignalExpr) -> Self {
        match e {
            SignalExpr::Const(c) => SignalExpr::Const(-c),
            SignalExpr::Neg(inner) => *inner,
            e => SignalExpr::Neg(Box::new(e)),
        }
    }

    pub fn pow(base: SignalExpr, k: u32) -> Self {
        match (base, k) {
            (_, 0) => SignalExpr::Const(1.0),
            (b, 1) => b,
            (SignalExpr::Const(c), k) => SignalExpr::Const(c.powi(k as i32)),
            (b, k) => SignalExpr::Pow(Box::new(b), k),
        }
    }

    pub fn sin(e: SignalExpr) -> Self {
        SignalExpr::Sin(Box::new(e))
    }

    pub fn cos(e: SignalExpr) -> Self {
        SignalExpr::Cos(Box::new(e))
    }

    pub fn exp(e: SignalExpr) -> Self {
        SignalExpr::Exp(Box::new(e))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SignalExpr::Const(c) if *c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SignalExpr::Const(c) => *c,
            SignalExpr::Time => t,
            SignalExpr::Neg(e) => -e.eval(t),
            SignalExpr::Add(a, b) => a.eval(t) + b.eval(t),
            SignalExpr::Mul(a, b) => a.eval(t) * b.eval(t),
            SignalExpr::Pow(b, k) => b.eval(t).powi(*k as i32),
            SignalExpr::Sin(e) => e.eval(t).sin(),
            SignalExpr::Cos(e) => e.eval(t).cos(),
            SignalExpr::Exp(e) => e.eval(t).exp(),
        }
    }

    /// Exact symbolic derivative.
    pub fn differentiate(&self) -> SignalExpr {
        match self {
            SignalExpr::Const(_) => SignalExpr::Const(0.0),
            SignalExpr::Time => SignalExpr::Const(1.0),
            SignalExpr::Neg(e) => SignalExpr::neg(e.differentiate()),
            SignalExpr::Add(a, b) => SignalExpr::add(a.differentiate(), b.differentiate()),
            SignalExpr::Mul(a, b) => SignalExpr::add(
                SignalExpr::mul(a.differentiate(), (**b).clone()),
                SignalExpr::mul((**a).clone(), b.differentiate()),
            ),
            SignalExpr::Pow(b, k) => SignalExpr::mul(
                SignalExpr::mul(
                    SignalExpr::Const(*k as f64),
                    SignalExpr::pow((**b).clone(), k - 1),
                ),
                b.differentiate(),
            ),
            SignalExpr::Sin(e) => {
                SignalExpr::mul(e.differentiate(), SignalExpr::cos((**e).clone()))
            }
            SignalExpr::Cos(e) => SignalExpr::neg(SignalExpr::mul(
                e.differentiate(),
                SignalExpr::sin((**e).clone()),
            )),
            SignalExpr::Exp(e) => {
                SignalExpr::mul(e.differentiate(), SignalExpr::exp((**e).clone()))
            }
        }
    }

    /// Polynomial `sum coeffs[k] * (t - shift)^k` built with the folding
    /// constructors, so zero coefficients leave no residue in the tree.
    pub fn polynomial(coeffs: &[f64], shift: f64) -> SignalExpr {
        let s = if shift == 0.0 {
            SignalExpr::Time
        } else {
            SignalExpr::add(SignalExpr::Time, SignalExpr::Const(-shift))
        };
        let mut sum = SignalExpr::Const(0.0);
        for (k, &c) in coeffs.iter().enumerate() {
            sum = SignalExpr::add(
                sum,
                SignalExpr::mul(SignalExpr::Const(c), SignalExpr::pow(s.clone(), k as u32)),
            );
        }
        sum
    }

    // Grammar precedence levels used by the printer: sums 1, products 2,
    // negation 3 (its operand must be a factor), power bases 4 (atoms only).
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        let own = match self {
            SignalExpr::Add(..) => 1,
            SignalExpr::Mul(..) => 2,
            SignalExpr::Neg(..) => 2,
            SignalExpr::Pow(..) => 3,
            _ => 4,
        };
        if own < prec {
            write!(f, "(")?;
        }
        match self {
            SignalExpr::Const(c) => write!(f, "{c}")?,
            SignalExpr::Time => write!(f, "t")?,
            SignalExpr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 3)?;
            }
            SignalExpr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                match &**b {
                    SignalExpr::Neg(inner) => {
                        write!(f, " - ")?;
                        inner.fmt_prec(f, 2)?;
                    }
                    SignalExpr::Const(c) if *c < 0.0 => {
                        write!(f, " - {}", -c)?;
                    }
                    other => {
                        write!(f, " + ")?;
                        other.fmt_prec(f, 2)?;
                    }
                }
            }
            SignalExpr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " * ")?;
                b.fmt_prec(f, 3)?;
            }
            SignalExpr::Pow(b, k) => {
                b.fmt_prec(f, 4)?;
                write!(f, "^{k}")?;
            }
            SignalExpr::Sin(e) => write!(f, "sin({e})")?,
            SignalExpr::Cos(e) => write!(f, "cos({e})")?,
            SignalExpr::Exp(e) => write!(f, "exp({e})")?,
        }
        if own < prec {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for SignalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Fixed-dimension vector of scalar expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSignal {
    components: Vec<SignalExpr>,
}

impl VectorSignal {
    pub fn new(components: Vec<SignalExpr>) -> Self {
        VectorSignal { components }
    }

    pub fn zero(n: usize) -> Self {
        VectorSignal {
            components: vec![SignalExpr::Const(0.0); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SignalExpr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SignalExpr::is_zero)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(t)).collect()
    }

    pub fn differentiate(&self, order: usize) -> VectorSignal {
        let mut out = self.clone();
        for _ in 0..order {
            out = VectorSignal {
                components: out.components.iter().map(SignalExpr::differentiate).collect(),
            };
        }
        out
    }

    pub fn scale(&self, a: f64) -> VectorSignal {
        VectorSignal {
            components: self
                .components
                .iter()
                .map(|c| SignalExpr::mul(SignalExpr::Const(a), c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &VectorSignal) -> VectorSignal {
        assert_eq!(self.dim(), other.dim());
        VectorSignal {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| SignalExpr::add(a.clone(), b.clone()))
                .collect(),
        }
    }

    /// Left-multiplication by a (possibly rectangular) matrix: component i of
    /// the result is `sum_j m[i,j] * self[j]`.
    pub fn matrix_apply(&self, m: &Matrix) -> VectorSignal {
        assert_eq!(m.ncols(), self.dim(), "matrix width must match signal dimension");
        let components = (0..m.nrows())
            .map(|i| {
                let mut sum = SignalExpr::Const(0.0);
                for (j, c) in self.components.iter().enumerate() {
                    sum = SignalExpr::add(
                        sum,
                        SignalExpr::mul(SignalExpr::Const(m[(i, j)]), c.clone()),
                    );
                }
                sum
            })
            .collect();
        VectorSignal { components }
    }
}

impl fmt::Display for VectorSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl Serialize for VectorSignal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for VectorSignal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse::parse_vector(&text).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Vector signal defined piecewise on [0, inf).
///
/// Breakpoints are strictly increasing and positive; with m breakpoints there
/// are m+1 pieces. Piece j owns the interval (b_{j-1}, b_j] — the value at a
/// breakpoint comes from the piece to its left — so a signal extended past b
/// agrees with the original piece at t = b itself. `smoothness_order` records
/// the order up to which one-sided derivatives are expected to match at each
/// breakpoint (irrelevant when there are no breakpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSignal {
    breakpoints: Vec<f64>,
    pieces: Vec<VectorSignal>,
    smoothness_order: usize,
}

impl PiecewiseSignal {
    pub fn new(
        breakpoints: Vec<f64>,
        pieces: Vec<VectorSignal>,
        smoothness_order: usize,
    ) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len() + 1,
                got: pieces.len(),
            });
        }
        let dim = pieces[0].dim();
        for p in &pieces {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
        let positive = breakpoints.first().is_none_or(|&b| b > 0.0);
        if !increasing || !positive || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput(
                "breakpoints must be finite, positive and strictly increasing".into(),
            ));
        }
        Ok(PiecewiseSignal {
            breakpoints,
            pieces,
            smoothness_order,
        })
    }

    pub fn from_single(sig: VectorSignal) -> Self {
        PiecewiseSignal {
            breakpoints: Vec::new(),
            pieces: vec![sig],
            smoothness_order: 0,
        }
    }

    pub fn zero(n: usize) -> Self {
        PiecewiseSignal::from_single(VectorSignal::zero(n))
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[VectorSignal] {
        &self.pieces
    }

    pub fn smoothness_order(&self) -> usize {
        self.smoothness_order
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(VectorSignal::is_zero)
    }

    /// Index of the piece owning t: the count of breakpoints strictly below t.
    pub fn piece_index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < t)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.pieces[self.piece_index(t)].eval(t)
    }

    pub fn eval_deriv(&self, t: f64, order: usize) -> Vec<f64> {
        self.pieces[self.piece_index(t)].differentiate(order).eval(t)
    }

    /// Piecewise symbolic derivative; matching order at breakpoints drops by
    /// one.
    pub fn differentiate(&self, order: usize) -> PiecewiseSignal {
        PiecewiseSignal {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.differentiate(order)).collect(),
            smoothness_order: self.smoothness_order.saturating_sub(order),
        }
    }

    pub fn scale(&self, a: f64) -> PiecewiseSignal {
        PiecewiseSignal {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(a)).collect(),
            smoothness_order: self.smoothness_order,
        }
    }

    pub fn matrix_apply(&self, m: &Matrix) -> PiecewiseSignal {
        PiecewiseSignal {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.matrix_apply(m)).collect(),
            smoothness_order: self.smoothness_order,
        }
    }

    /// Sum over the merged breakpoint set; the result's matching order is the
    /// smaller of the two.
    pub fn add(&self, other: &PiecewiseSignal) -> PiecewiseSignal {
        assert_eq!(self.dim(), other.dim());
        let mut merged: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .collect();
        merged.sort_by(f64::total_cmp);
        merged.dedup();
        let mut pieces = Vec::with_capacity(merged.len() + 1);
        for j in 0..=merged.len() {
            // A probe point inside piece j of the merged partition.
            let probe = probe_point(&merged, j);
            let a = &self.pieces[self.piece_index(probe)];
            let b = &other.pieces[other.piece_index(probe)];
            pieces.push(a.add(b));
        }
        PiecewiseSignal {
            breakpoints: merged,
            pieces,
            smoothness_order: self.smoothness_order.min(other.smoothness_order),
        }
    }

    /// Largest one-sided derivative mismatch over all breakpoints and all
    /// orders up to `smoothness_order`.
    pub fn max_breakpoint_mismatch(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, &b) in self.breakpoints.iter().enumerate() {
            for order in 0..=self.smoothness_order {
                let left = self.pieces[j].differentiate(order).eval(b);
                let right = self.pieces[j + 1].differentiate(order).eval(b);
                for (l, r) in left.iter().zip(&right) {
                    worst = worst.max((l - r).abs());
                }
            }
        }
        worst
    }
}

/// A point strictly inside piece j of the partition induced by `breakpoints`.
fn probe_point(breakpoints: &[f64], j: usize) -> f64 {
    let lo = if j == 0 { 0.0 } else { breakpoints[j - 1] };
    match breakpoints.get(j) {
        Some(&hi) => 0.5 * (lo + hi),
        None => lo + 1.0,
    }
}

#[derive(Serialize, Deserialize)]
struct PiecewiseSignalRepr {
    breakpoints: Vec<f64>,
    pieces: Vec<VectorSignal>,
    smoothness_order: usize,
}

impl Serialize for PiecewiseSignal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PiecewiseSignalRepr {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.clone(),
            smoothness_order: self.smoothness_order,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PiecewiseSignal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PiecewiseSignalRepr::deserialize(deserializer)?;
        PiecewiseSignal::new(repr.breakpoints, repr.pieces, repr.smoothness_order)
            .map_err(|e| D::Error::custom(e.to_string()))
    }
}
