//! Dense real matrix kernels shared by every solver in the crate: nilpotency
//! certification, inversion, the matrix exponential, rank-revealing splits and
//! eigenvalue estimates. Everything is plain `Vec<f64>` row-major storage;
//! target problems are small (n <= 50), so dense O(n^3) methods are used
//! throughout.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense real matrix, row-major.
///
/// Serializes as a JSON array of row arrays of finite doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Certificate produced by [`Matrix::nilpotency_index`].
///
/// `index` is the smallest q >= 1 with `||N^q||_F <= tol * (1 + ||N||_F^q)`;
/// `residual` records the achieved relative residual
/// `||N^q||_F / (1 + ||N||_F^q)` so callers can reject borderline inputs.
/// The empty matrix gets index 0: a system with no state needs no
/// annihilating power at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NilpotencyCert {
    pub index: usize,
    pub residual: f64,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "matrix entry {v} is not finite"
                    )));
                }
                data.push(v);
            }
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Matrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Single Jordan block J_n(0): ones on the superdiagonal.
    pub fn jordan_nilpotent(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions must agree");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// M^p by repeated multiplication (p small in all uses).
    pub fn pow(&self, p: usize) -> Matrix {
        assert!(self.is_square());
        let mut out = Matrix::identity(self.rows);
        for _ in 0..p {
            out = out.matmul(self);
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Declared norm for all reported matrix magnitudes.
    pub fn operator_norm(&self) -> f64 {
        self.frobenius_norm()
    }

    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Copy of the block with rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        Matrix::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Horizontal concatenation [self | other].
    pub fn hcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows);
        Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    /// Smallest q >= 1 with `||M^q||_F <= tol * (1 + ||M||_F^q)`.
    ///
    /// Fails with [`Error::NotNilpotent`] when no q <= n passes; Cayley-Hamilton
    /// bounds the index of a nilpotent matrix by its dimension.
    pub fn nilpotency_index(&self, tol: f64) -> Result<NilpotencyCert> {
        assert!(self.is_square(), "nilpotency index requires a square matrix");
        assert!(tol >= 0.0);
        let n = self.rows;
        if n == 0 {
            return Ok(NilpotencyCert { index: 0, residual: 0.0 });
        }
        let norm = self.frobenius_norm();
        let mut power = self.clone();
        let mut norm_pow = norm;
        let mut best = (1usize, f64::INFINITY);
        for q in 1..=n {
            let residual = power.frobenius_norm() / (1.0 + norm_pow);
            if residual <= tol {
                return Ok(NilpotencyCert { index: q, residual });
            }
            if residual < best.1 {
                best = (q, residual);
            }
            if q < n {
                power = power.matmul(self);
                norm_pow *= norm;
            }
        }
        Err(Error::NotNilpotent {
            dim: n,
            best_power: best.0,
            best_residual: best.1,
        })
    }

    /// LU factorization with partial pivoting. Pivot threshold is
    /// `tol * ||M||_F`; a pivot at or below it reports [`Error::Singular`].
    pub fn lu(&self, tol: f64) -> Result<LuFactors> {
        assert!(self.is_square(), "LU requires a square matrix");
        let n = self.rows;
        let threshold = tol * self.frobenius_norm();
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0f64;
        for k in 0..n {
            let mut piv = k;
            let mut piv_val = lu[(k, k)].abs();
            for i in k + 1..n {
                if lu[(i, k)].abs() > piv_val {
                    piv = i;
                    piv_val = lu[(i, k)].abs();
                }
            }
            if piv_val <= threshold {
                return Err(Error::Singular {
                    pivot: piv_val,
                    threshold,
                });
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(LuFactors { lu, perm, sign })
    }

    /// Inverse via pivoted elimination.
    pub fn inverse(&self, tol: f64) -> Result<Matrix> {
        let f = self.lu(tol)?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = f.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    pub fn determinant(&self, tol: f64) -> f64 {
        match self.lu(tol) {
            Ok(f) => f.det(),
            Err(_) => 0.0,
        }
    }

    /// Frobenius condition estimate `||M||_F * ||M^-1||_F`; infinite when singular.
    pub fn cond_estimate(&self) -> f64 {
        match self.inverse(1e-14) {
            Ok(inv) => self.frobenius_norm() * inv.frobenius_norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Matrix exponential e^M.
    ///
    /// A nilpotent-plus-scalar-shift input (M = a*I + M0 with M0 certified
    /// nilpotent) is evaluated by the exact finite series e^a * sum M0^k / k!.
    /// Everything else goes through order-13 Pade scaling and squaring.
    pub fn exp(&self) -> Result<Matrix> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Ok(Matrix::zeros(0, 0));
        }
        if !self.is_finite() {
            return Err(Error::Overflow);
        }
        let alpha = self.trace() / n as f64;
        let shifted = self.sub(&Matrix::identity(n).scale(alpha));
        if let Ok(cert) = shifted.nilpotency_index(1e-12) {
            return nilpotent_shift_exp(&shifted, alpha, cert.index);
        }
        pade_exp(self)
    }

    /// Rank-revealing split via Householder QR with column pivoting.
    ///
    /// Returns (rank, range_basis, null_basis): orthonormal columns spanning
    /// the column space and the kernel. Diagonal entries of R are compared
    /// against `tol` times the largest column norm of M.
    pub fn rank_split(&self, tol: f64) -> (usize, Matrix, Matrix) {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return (0, Matrix::zeros(0, 0), Matrix::zeros(0, 0));
        }
        let (q, r, perm) = householder_qr_pivoted(self);
        let scale = (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let threshold = tol * scale;
        let mut rank = 0;
        for k in 0..n {
            if r[(k, k)].abs() > threshold {
                rank += 1;
            } else {
                break;
            }
        }
        let range = q.block(0, n, 0, rank);
        let null = kernel_from_qr(&r, &perm, rank);
        (rank, range, null)
    }

    /// All eigenvalues as (re, im) pairs, via Hessenberg reduction and the
    /// shifted double-step QR iteration.
    pub fn eigenvalues(&self) -> Result<Vec<(f64, f64)>> {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut h = self.clone();
        hessenberg(&mut h);
        hqr_eigenvalues(&mut h)
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|&(re, _)| re)
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Packed LU factors with the row permutation.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.nrows();
        (0..n).map(|i| self.lu[(i, i)]).product::<f64>() * self.sign
    }
}

fn nilpotent_shift_exp(nilpotent: &Matrix, alpha: f64, index: usize) -> Result<Matrix> {
    let n = nilpotent.nrows();
    let scale = alpha.exp();
    if scale == 0.0 {
        return Ok(Matrix::zeros(n, n));
    }
    if !scale.is_finite() {
        return Err(Error::Overflow);
    }
    // Each term carries the e^alpha factor so a tiny scale against a large
    // nilpotent power never produces 0 * inf.
    let mut term = Matrix::identity(n).scale(scale);
    let mut sum = term.clone();
    for k in 1..index {
        term = term.matmul(nilpotent).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    if !sum.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(sum)
}

const PADE13_THETA: f64 = 5.371920351148152;
const PADE13_B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade_exp(m: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    let norm = m.one_norm();
    if !norm.is_finite() {
        return Err(Error::Overflow);
    }
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(squarings as i32));
    let b = &PADE13_B;
    let ident = Matrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let u_inner = a6
        .matmul(&a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9])))
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&ident.scale(b[1]));
    let u = a.matmul(&u_inner);
    let v = a6
        .matmul(&a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8])))
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&ident.scale(b[0]));
    let denom = v.sub(&u);
    let numer = v.add(&u);
    let lu = denom.lu(1e-16).map_err(|_| Error::Overflow)?;
    let mut result = Matrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = numer[(i, j)];
        }
        let x = lu.solve(&col);
        for i in 0..n {
            result[(i, j)] = x[i];
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
        if !result.is_finite() {
            return Err(Error::Overflow);
        }
    }
    if !result.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(result)
}

/// Householder QR with column pivoting; returns (Q, R, column permutation).
fn householder_qr_pivoted(m: &Matrix) -> (Matrix, Matrix, Vec<usize>) {
    let n = m.nrows();
    let mut r = m.clone();
    let mut q = Matrix::identity(n);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // Exact recomputation of remaining column norms; cheap at this scale
        // and avoids the classic downdating instability.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let norm: f64 = (k..n).map(|i| r[(i, j)].powi(2)).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            for i in 0..n {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
            perm.swap(k, best);
        }
        let alpha: f64 = (k..n).map(|i| r[(i, k)].powi(2)).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if r[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // Apply H = I - 2 v v^T / (v^T v) to R (left) and accumulate into Q.
        for j in k..n {
            let dot: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
            let coef = 2.0 * dot / vnorm2;
            for i in k..n {
                r[(i, j)] -= coef * v[i - k];
            }
        }
        for j in 0..n {
            let dot: f64 = (k..n).map(|i| v[i - k] * q[(j, i)]).sum();
            let coef = 2.0 * dot / vnorm2;
            for i in k..n {
                q[(j, i)] -= coef * v[i - k];
            }
        }
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
    }
    (q, r, perm)
}

/// Orthonormal kernel basis from pivoted QR factors: free columns solve
/// R11 y = -R12 e_j, then the raw vectors are re-orthonormalized.
fn kernel_from_qr(r: &Matrix, perm: &[usize], rank: usize) -> Matrix {
    let n = r.nrows();
    let free = n - rank;
    if free == 0 {
        return Matrix::zeros(n, 0);
    }
    let mut raw = Matrix::zeros(n, free);
    for (jf, j) in (rank..n).enumerate() {
        let mut y = vec![0.0; rank];
        for i in (0..rank).rev() {
            let mut s = -r[(i, j)];
            for l in i + 1..rank {
                s -= r[(i, l)] * y[l];
            }
            y[i] = s / r[(i, i)];
        }
        for (i, &yi) in y.iter().enumerate() {
            raw[(perm[i], jf)] = yi;
        }
        raw[(perm[j], jf)] = 1.0;
    }
    // Modified Gram-Schmidt; the raw vectors are independent by construction.
    let mut basis = raw;
    for j in 0..free {
        for l in 0..j {
            let dot: f64 = (0..n).map(|i| basis[(i, l)] * basis[(i, j)]).sum();
            for i in 0..n {
                basis[(i, j)] -= dot * basis[(i, l)];
            }
        }
        let norm: f64 = (0..n).map(|i| basis[(i, j)].powi(2)).sum::<f64>().sqrt();
        for i in 0..n {
            basis[(i, j)] /= norm;
        }
    }
    basis
}

/// In-place reduction to upper Hessenberg form by stabilized elimination.
fn hessenberg(a: &mut Matrix) {
    let n = a.nrows();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut piv = m;
        for i in m..n {
            if a[(i, m - 1)].abs() > x.abs() {
                x = a[(i, m - 1)];
                piv = i;
            }
        }
        if piv != m {
            for j in 0..n {
                let tmp = a[(m, j)];
                a[(m, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            for i in 0..n {
                let tmp = a[(i, m)];
                a[(i, m)] = a[(i, piv)];
                a[(i, piv)] = tmp;
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    for j in m..n {
                        let s = a[(m, j)];
                        a[(i, j)] -= y * s;
                    }
                    for j in 0..n {
                        let s = a[(j, i)];
                        a[(j, m)] += y * s;
                    }
                    a[(i, m - 1)] = 0.0;
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration with deflation and exceptional shifts.
fn hqr_eigenvalues(a: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    let n = a.nrows();
    let eps = f64::EPSILON;
    let mut eig = vec![(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(eig);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nnu = nn as usize;
            let mut l = nnu;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nnu, nnu)];
            if l == nnu {
                eig[nnu] = (x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[(nnu - 1, nnu - 1)];
            let mut w = a[(nnu, nnu - 1)] * a[(nnu - 1, nnu)];
            if l == nnu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    eig[nnu - 1] = (x + z, 0.0);
                    eig[nnu] = if z != 0.0 { (x - w / z, 0.0) } else { (x + z, 0.0) };
                } else {
                    eig[nnu - 1] = (x + p, -z);
                    eig[nnu] = (x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return Err(Error::EigenFailure);
            }
            if its == 10 || its == 20 {
                t += x;
                for i in 0..=nnu {
                    a[(i, i)] -= x;
                }
                let s = a[(nnu, nnu - 1)].abs() + a[(nnu - 1, nnu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nnu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nnu {
                a[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }
            for k in m..nnu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k != nnu - 1 { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nnu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nnu - 1 {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = nnu.min(k + 3);
                for i in l..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nnu - 1 {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn nilpotency_jordan_block() {
        let m = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let cert = m.nilpotency_index(1e-12).unwrap();
        assert_eq!(cert.index, 2);
        assert_eq!(cert.residual, 0.0);
    }

    #[test]
    fn nilpotency_zero_matrix() {
        let cert = Matrix::zeros(3, 3).nilpotency_index(0.0).unwrap();
        assert_eq!(cert.index, 1);
    }

    #[test]
    fn nilpotency_rejects_identity() {
        let err = Matrix::identity(1).nilpotency_index(1e-12).unwrap_err();
        assert!(matches!(err, Error::NotNilpotent { .. }));
    }

    #[test]
    fn exp_zero_is_identity() {
        let e = Matrix::zeros(3, 3).exp().unwrap();
        assert!(e.sub(&Matrix::identity(3)).max_abs() <= 1e-15);
    }

    #[test]
    fn exp_nilpotent_terminates() {
        let e = mat(&[&[0.0, 1.0], &[0.0, 0.0]]).exp().unwrap();
        let expect = mat(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(e.sub(&expect).max_abs() <= 1e-15);
    }

    #[test]
    fn exp_diagonal() {
        let e = Matrix::diag(&[-1.0, -2.0]).exp().unwrap();
        assert_close(e[(0, 0)], (-1.0f64).exp(), 1e-14);
        assert_close(e[(1, 1)], (-2.0f64).exp(), 1e-14);
        assert_close(e[(0, 1)], 0.0, 1e-14);
    }

    #[test]
    fn exp_matches_series_for_general_matrix() {
        // Moderate-norm dense matrix: compare Pade path against a plain
        // Taylor evaluation.
        let m = mat(&[&[0.3, -0.2, 0.1], &[0.4, 0.1, -0.3], &[-0.1, 0.2, 0.2]]);
        let e = m.exp().unwrap();
        let mut sum = Matrix::identity(3);
        let mut term = Matrix::identity(3);
        for k in 1..30 {
            term = term.matmul(&m).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        assert!(e.sub(&sum).max_abs() <= 1e-13);
    }

    #[test]
    fn neumann_series_inverse() {
        // (N - eps I)^-1 = -sum_{m<q} N^m / eps^{m+1}, checked by the frozen
        // 2x2 value and by multiplying back to the identity.
        let ni = mat(&[&[-0.1, 1.0], &[0.0, -0.1]]);
        let inv = ni.inverse(1e-14).unwrap();
        let expect = mat(&[&[-10.0, -100.0], &[0.0, -10.0]]);
        assert!(inv.sub(&expect).max_abs() <= 1e-10);
        assert!(ni.matmul(&inv).sub(&Matrix::identity(2)).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn inverse_identity() {
        let inv = Matrix::identity(4).inverse(1e-14).unwrap();
        assert!(inv.sub(&Matrix::identity(4)).max_abs() == 0.0);
    }

    #[test]
    fn inverse_rejects_nilpotent() {
        let err = mat(&[&[0.0, 1.0], &[0.0, 0.0]]).inverse(1e-14).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn rank_split_identity() {
        let (rank, range, null) = Matrix::identity(3).rank_split(1e-12);
        assert_eq!(rank, 3);
        assert_eq!(range.ncols(), 3);
        assert_eq!(null.ncols(), 0);
    }

    #[test]
    fn rank_split_zero() {
        let (rank, _, null) = Matrix::zeros(3, 3).rank_split(1e-12);
        assert_eq!(rank, 0);
        assert_eq!(null.ncols(), 3);
        // Kernel of the zero matrix is orthonormal full basis.
        let gram = null.transpose().matmul(&null);
        assert!(gram.sub(&Matrix::identity(3)).max_abs() <= 1e-14);
    }

    #[test]
    fn rank_split_jordan() {
        let m = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let (rank, range, null) = m.rank_split(1e-12);
        assert_eq!(rank, 1);
        // Range and kernel are both spanned by e1.
        assert_close(range[(0, 0)].abs(), 1.0, 1e-14);
        assert_close(range[(1, 0)], 0.0, 1e-14);
        assert_close(null[(0, 0)].abs(), 1.0, 1e-14);
        assert_close(null[(1, 0)], 0.0, 1e-14);
    }

    #[test]
    fn rank_split_counts_are_complementary() {
        let m = mat(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[1.0, 1.0, 1.0]]);
        let (rank, range, null) = m.rank_split(1e-10);
        assert_eq!(rank, 2);
        assert_eq!(range.ncols() + null.ncols(), 3);
        // Null basis really is in the kernel.
        for j in 0..null.ncols() {
            let v: Vec<f64> = (0..3).map(|i| null[(i, j)]).collect();
            let mv = m.matvec(&v);
            assert!(mv.iter().all(|x| x.abs() <= 1e-10));
        }
    }

    #[test]
    fn operator_norm_examples() {
        assert_close(Matrix::zeros(2, 2).operator_norm(), 0.0, 0.0);
        assert_close(Matrix::identity(2).operator_norm(), 2.0f64.sqrt(), 1e-15);
        assert_close(
            mat(&[&[3.0, 4.0], &[0.0, 0.0]]).operator_norm(),
            5.0,
            1e-15,
        );
    }

    #[test]
    fn eigenvalues_diagonal_and_similarity() {
        let eigs = Matrix::diag(&[3.0, -1.0, 0.5]).eigenvalues().unwrap();
        let mut res: Vec<f64> = eigs.iter().map(|e| e.0).collect();
        res.sort_by(f64::total_cmp);
        assert_close(res[0], -1.0, 1e-10);
        assert_close(res[1], 0.5, 1e-10);
        assert_close(res[2], 3.0, 1e-10);
    }

    #[test]
    fn eigenvalues_complex_pair() {
        // Rotation-like block: eigenvalues 1 +- 2i.
        let m = mat(&[&[1.0, -2.0], &[2.0, 1.0]]);
        let mut eigs = m.eigenvalues().unwrap();
        eigs.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert_close(eigs[0].0, 1.0, 1e-12);
        assert_close(eigs[0].1, -2.0, 1e-12);
        assert_close(eigs[1].1, 2.0, 1e-12);
    }

    #[test]
    fn eigenvalues_trace_det_consistency() {
        let m = mat(&[
            &[0.2, 1.3, -0.7, 0.1],
            &[-0.5, 0.4, 0.2, 0.9],
            &[0.3, -0.2, -0.6, 0.5],
            &[0.1, 0.8, -0.4, 0.7],
        ]);
        let eigs = m.eigenvalues().unwrap();
        let tr: f64 = eigs.iter().map(|e| e.0).sum();
        assert_close(tr, m.trace(), 1e-10);
        // det = product of eigenvalues (real since complex come in pairs)
        let (mut re, mut im) = (1.0, 0.0);
        for &(er, ei) in &eigs {
            let nr = re * er - im * ei;
            let ni = re * ei + im * er;
            re = nr;
            im = ni;
        }
        assert_close(re, m.determinant(1e-15), 1e-9);
        assert_close(im, 0.0, 1e-9);
    }

    #[test]
    fn eigenvalues_shifted_jordan() {
        // Triple eigenvalue -1/8 on a 3x3 Jordan structure.
        let m = Matrix::jordan_nilpotent(3).sub(&Matrix::identity(3).scale(0.125));
        let eigs = m.eigenvalues().unwrap();
        for (re, _) in eigs {
            assert!(
                (re + 0.125).abs() < 2e-5,
                "clustered eigenvalue too far: {re}"
            );
        }
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = mat(&[&[0.0, 1.0], &[-2.5, 3.0]]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, "[[0.0,1.0],[-2.5,3.0]]");
        let back: Matrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_json_rejects_nonfinite() {
        let r: std::result::Result<Matrix, _> = serde_json::from_str("[[1.0,null],[0.0,1.0]]");
        assert!(r.is_err());
    }
}
