//! Weierstrass reduction of regular matrix pencils.
//!
//! A descriptor system `E x' = A x + g` with det(sE - A) not identically
//! zero splits, after a similarity transformation, into a slow ordinary
//! subsystem `z1' = J z1 + u1` and a fast subsystem `M z2' = z2 + u2` with
//! M nilpotent — the canonical shape the singular solver consumes. The
//! split is computed spectrally: with a shift c making cE - A invertible,
//! the matrix R = (cE - A)^-1 E has the slow modes as its invertible part
//! and the fast modes as its nilpotent part, and the n-th power of R
//! separates the two ranges cleanly.

use serde::{Deserialize, Serialize};

use crate::dist::{GeneralizedFunction, Impulse};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, NilpotencyCert};
use crate::perturbed::linear_ode_eval;
use crate::quad::QuadratureSpec;
use crate::signal::PiecewiseSignal;
use crate::singular::{solve_singular, Forcing, SolveRequest};

/// A matrix pair (E, A) representing sE - A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pencil {
    #[serde(rename = "E")]
    pub e: Matrix,
    #[serde(rename = "A")]
    pub a: Matrix,
}

impl Pencil {
    pub fn new(e: Matrix, a: Matrix) -> Result<Self> {
        if !e.is_square() || !a.is_square() || e.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: e.nrows(),
                got: if e.is_square() { a.nrows() } else { e.ncols() },
            });
        }
        Ok(Pencil { e, a })
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }
}

/// Full descriptor problem as accepted on the command line:
/// `{"E": [[..]], "A": [[..]], "g": "<signal>", "x0": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorRequest {
    #[serde(flatten)]
    pub pencil: Pencil,
    pub g: Forcing,
    pub x0: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-9
}

/// Deterministic shift candidates 0, 1, -1, 2, -2, ...
fn shift_candidates() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((1..).flat_map(|k| [k as f64, -(k as f64)]))
}

/// Find a shift c with cE - A invertible, keeping the best-conditioned
/// candidate. det(sE - A) is a polynomial of degree at most n, so if it
/// vanishes at n+1 distinct samples the pencil cannot be regular.
pub fn check_regular(p: &Pencil) -> Result<f64> {
    let n = p.dim();
    let mut best: Option<(f64, f64)> = None; // (cond, shift)
    let mut samples = 0usize;
    for c in shift_candidates().take(n + 1) {
        samples += 1;
        let m = p.e.scale(c).sub(&p.a);
        if m.lu(1e-14).is_ok() {
            let cond = m.cond_estimate();
            if best.map_or(true, |(bc, _)| cond < bc) {
                best = Some((cond, c));
            }
        }
    }
    best.map(|(_, c)| c).ok_or(Error::NotRegular { samples })
}

/// The slow (ordinary) half of a reduction: `z1' = J z1 + input_map . g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowBlock {
    pub j: Matrix,
    /// Maps the original n-dimensional forcing into slow coordinates.
    pub input_map: Matrix,
    /// Invertible diagonal block of R = (cE - A)^-1 E in the T basis.
    pub resolvent_block: Matrix,
}

/// The fast (impulsive) half: `M z2' = z2 + input_map . g` with M nilpotent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastBlock {
    pub m: Matrix,
    pub input_map: Matrix,
    /// Nilpotent diagonal block of R in the T basis.
    pub resolvent_block: Matrix,
    pub nilpotency: NilpotencyCert,
}

/// Outcome of [`weierstrass_reduce`]: `x = T (z1; z2)` splits the pencil
/// system into the two canonical subsystems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub t: Matrix,
    pub t_inv: Matrix,
    pub shift: f64,
    pub cond_t: f64,
    pub slow: SlowBlock,
    pub fast: FastBlock,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn slow_dim(&self) -> usize {
        self.slow.j.nrows()
    }

    pub fn fast_dim(&self) -> usize {
        self.fast.m.nrows()
    }

    /// Nilpotency index of the fast matrix M; zero when the fast part is
    /// empty.
    pub fn fast_index(&self) -> usize {
        self.fast.nilpotency.index
    }

    /// First n1 columns of T: the slow directions in original coordinates.
    pub fn slow_columns(&self) -> Matrix {
        self.t.block(0, self.dim(), 0, self.slow_dim())
    }

    /// Last n2 columns of T: the fast directions in original coordinates.
    pub fn fast_columns(&self) -> Matrix {
        self.t.block(0, self.dim(), self.slow_dim(), self.dim())
    }
}

// Residual blocks of the similarity transform are required to vanish to
// this accuracy, relative to the size of R.
const BLOCK_RESIDUAL_TOL: f64 = 1e-8;

/// Modified Gram-Schmidt with a second pass. The input must have full
/// column rank; callers only hand it images of bases under maps that are
/// invertible on their span.
fn orthonormalize(m: &Matrix) -> Matrix {
    let (n, k) = (m.nrows(), m.ncols());
    let mut q = m.clone();
    for j in 0..k {
        for _ in 0..2 {
            for p in 0..j {
                let dot: f64 = (0..n).map(|i| q[(i, p)] * q[(i, j)]).sum();
                for i in 0..n {
                    q[(i, j)] -= dot * q[(i, p)];
                }
            }
        }
        let norm = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        assert!(norm > 1e-300, "rank collapse during subspace refinement");
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    q
}

/// Split a regular pencil into slow and fast subsystems.
///
/// `tol` serves double duty: the rank decision for the spectral split and
/// the conditioning gate — a transformation with cond(T) above 1/tol is
/// refused rather than silently used.
pub fn weierstrass_reduce(p: &Pencil, tol: f64) -> Result<ReducedSystem> {
    assert!(tol > 0.0 && tol.is_finite());
    let n = p.dim();
    let c = check_regular(p)?;
    let shifted_inv = p.e.scale(c).sub(&p.a).inverse(1e-14)?;
    let r = shifted_inv.matmul(&p.e);

    // The fast subspace is the stabilized kernel chain
    // null(R) ⊆ null(R²) ⊆ …, grown one stage at a time. Forming R^n
    // outright and taking a single rank decision there does not work: when
    // R is nilpotent the explicit power is pure rounding dust, and a
    // threshold relative to the dust reads rank into noise. Each stage here
    // instead decides rank on (I - UUᵀ)R — whose kernel is the next chain
    // member, since (I - UUᵀ)Rx = 0 exactly when Rx lands in span(U) — and
    // that matrix is a first power, so anchoring the threshold to ‖R‖
    // separates structure from roundoff cleanly.
    let col_scale = |m: &Matrix| -> f64 {
        (0..m.ncols())
            .map(|j| (0..m.nrows()).map(|i| m[(i, j)].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let scale_r = col_scale(&r);
    let mut fast_basis = Matrix::zeros(n, 0);
    for _ in 0..=n {
        let c = r.sub(&fast_basis.matmul(&fast_basis.transpose().matmul(&r)));
        let scale_c = col_scale(&c);
        let effective = if scale_c > 0.0 { tol * scale_r / scale_c } else { tol };
        let (rank, _, kernel) = c.rank_split(effective);
        if n - rank <= fast_basis.ncols() {
            break;
        }
        fast_basis = kernel;
    }
    let n2 = fast_basis.ncols();
    let n1 = n - n2;

    // The slow basis starts from any complement of the fast subspace and is
    // pushed onto the slow subspace by orthogonal iteration: multiplying by
    // R kills fast contamination (R is nilpotent there) and preserves slow
    // content (R is invertible there), so after n steps the span is exact.
    // The complement never loses rank along the way — a combination with no
    // slow component would lie in the fast subspace and in its orthogonal
    // complement at once.
    let padded = fast_basis.hcat(&Matrix::zeros(n, n1)).transpose();
    let (f_rank, _, complement) = padded.rank_split(1e-6);
    if f_rank != n2 {
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }
    let mut u = complement;
    for _ in 0..n {
        u = orthonormalize(&r.matmul(&u));
    }

    let t = u.hcat(&fast_basis);
    let cond_t = t.cond_estimate();
    if cond_t > 1.0 / tol {
        return Err(Error::IllConditioned { cond: cond_t });
    }
    let t_inv = t.inverse(1e-14).map_err(|_| Error::IllConditioned { cond: cond_t })?;

    let b = t_inv.matmul(&r).matmul(&t);
    let r_slow = b.block(0, n1, 0, n1);
    let r_fast = b.block(n1, n, n1, n);
    let off = b.block(0, n1, n1, n).max_abs().max(b.block(n1, n, 0, n1).max_abs());
    if off > BLOCK_RESIDUAL_TOL * (1.0 + r.frobenius_norm()) {
        return Err(Error::IllConditioned { cond: cond_t });
    }

    let nilpotency = r_fast.nilpotency_index(BLOCK_RESIDUAL_TOL)?;
    let r_slow_inv = r_slow
        .inverse(1e-12)
        .map_err(|_| Error::IllConditioned { cond: cond_t })?;

    // Premultiplying the original system by (cE - A)^-1 and changing
    // coordinates gives  B z' = (cB - I) z + T^-1 (cE - A)^-1 g,
    // which the two blocks then normalize independently.
    let transformed_forcing = t_inv.matmul(&shifted_inv);
    let j = r_slow_inv.matmul(&r_slow.scale(c).sub(&Matrix::identity(n1)));
    let slow_map = r_slow_inv.matmul(&transformed_forcing.block(0, n1, 0, n));

    let n2 = n - n1;
    let fast_normalizer = r_fast
        .scale(c)
        .sub(&Matrix::identity(n2))
        .inverse(1e-14)
        .expect("cN0 - I is invertible for nilpotent N0");
    let m = fast_normalizer.matmul(&r_fast);
    let fast_map = fast_normalizer.matmul(&transformed_forcing.block(n1, n, 0, n));
    let m_cert = m.nilpotency_index(BLOCK_RESIDUAL_TOL)?;
    debug_assert_eq!(m_cert.index, nilpotency.index);

    Ok(ReducedSystem {
        t,
        t_inv,
        shift: c,
        cond_t,
        slow: SlowBlock {
            j,
            input_map: slow_map,
            resolvent_block: r_slow,
        },
        fast: FastBlock {
            m,
            input_map: fast_map,
            resolvent_block: r_fast,
            nilpotency: m_cert,
        },
    })
}

/// Distributional solution of a descriptor system, split into the slow
/// classical trajectory and the fast impulsive part.
#[derive(Debug, Clone)]
pub struct DescriptorSolution {
    reduced: ReducedSystem,
    slow_x0: Vec<f64>,
    slow_forcing: PiecewiseSignal,
    fast: GeneralizedFunction,
}

impl DescriptorSolution {
    pub fn reduced(&self) -> &ReducedSystem {
        &self.reduced
    }

    /// Fast subsystem solution, in reduced (z2) coordinates.
    pub fn fast(&self) -> &GeneralizedFunction {
        &self.fast
    }

    /// Slow trajectory z1(t), by variation of constants.
    pub fn slow_eval(&self, t: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
        linear_ode_eval(
            &self.reduced.slow.j,
            &self.slow_x0,
            &self.slow_forcing,
            t,
            &[],
            quad,
        )
    }

    /// Smooth part of the full solution in original coordinates:
    /// `T_slow z1(t) + T_fast z2_smooth(t)`.
    pub fn eval_smooth(&self, t: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
        let z1 = self.slow_eval(t, quad)?;
        let mut x = self.reduced.slow_columns().matvec(&z1);
        if self.reduced.fast_dim() > 0 {
            let z2 = self.fast.smooth().eval(t);
            let fast_part = self.reduced.fast_columns().matvec(&z2);
            for (xi, fi) in x.iter_mut().zip(&fast_part) {
                *xi += fi;
            }
        }
        Ok(x)
    }

    /// Impulse series in original coordinates: fast-column images of the
    /// reduced impulses.
    pub fn impulses(&self) -> Vec<Impulse> {
        let cols = self.reduced.fast_columns();
        self.fast
            .impulses()
            .iter()
            .map(|imp| Impulse {
                order: imp.order,
                coeff: cols.matvec(&imp.coeff),
            })
            .collect()
    }
}

/// Reduce and solve a descriptor system `E x' = A x + g`, `x(0) = x0`.
pub fn solve_descriptor(req: &DescriptorRequest) -> Result<DescriptorSolution> {
    let n = req.pencil.dim();
    if req.x0.len() != n || req.g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if req.x0.len() != n { req.x0.len() } else { req.g.dim() },
        });
    }
    let reduced = weierstrass_reduce(&req.pencil, req.tol)?;
    let z0 = reduced.t_inv.matvec(&req.x0);
    let n1 = reduced.slow_dim();

    let slow_forcing = req
        .g
        .matrix_apply(&reduced.slow.input_map)
        .to_piecewise();
    let slow_x0 = z0[..n1].to_vec();

    let fast = if reduced.fast_dim() == 0 {
        GeneralizedFunction::zero(0)
    } else {
        let fast_req = SolveRequest {
            n_matrix: reduced.fast.m.clone(),
            x0: z0[n1..].to_vec(),
            f: req.g.matrix_apply(&reduced.fast.input_map),
            tol: req.tol,
        };
        solve_singular(&fast_req)?
    };

    Ok(DescriptorSolution {
        reduced,
        slow_x0,
        slow_forcing,
        fast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::parse_signal;

    fn pencil(e: &[Vec<f64>], a: &[Vec<f64>]) -> Pencil {
        Pencil::new(Matrix::from_rows(e).unwrap(), Matrix::from_rows(a).unwrap()).unwrap()
    }

    fn sorted_real_eigs(m: &Matrix) -> Vec<f64> {
        let mut eigs: Vec<f64> = m.eigenvalues().unwrap().iter().map(|(re, _)| *re).collect();
        eigs.sort_by(f64::total_cmp);
        eigs
    }

    #[test]
    fn regularity_shift_examples() {
        // E = I, A = 0: det = c^n, so 0 is rejected and some c != 0 wins.
        let p = pencil(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.0; 2], vec![0.0; 2]]);
        let c = check_regular(&p).unwrap();
        assert!(c != 0.0);

        // E = 0, A = I: every shift gives -I; the first candidate 0 wins.
        let p = pencil(&[vec![0.0; 2], vec![0.0; 2]], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(check_regular(&p).unwrap(), 0.0);

        // E = 0, A = diag(1, 0): det(cE - A) = 0 identically.
        let p = pencil(&[vec![0.0; 2], vec![0.0; 2]], &[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            check_regular(&p),
            Err(Error::NotRegular { samples: 3 })
        ));
    }

    #[test]
    fn identity_e_reduces_to_pure_slow() {
        let p = pencil(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[vec![-2.0, 1.0], vec![0.0, -3.0]],
        );
        let red = weierstrass_reduce(&p, 1e-9).unwrap();
        assert_eq!(red.slow_dim(), 2);
        assert_eq!(red.fast_dim(), 0);
        // The slow matrix is similar to A; with a well-conditioned T the
        // spectrum carries over almost exactly.
        let eigs = sorted_real_eigs(&red.slow.j);
        assert!((eigs[0] - -3.0).abs() <= 1e-8);
        assert!((eigs[1] - -2.0).abs() <= 1e-8);
    }

    #[test]
    fn canonical_fast_pencil_recovers_itself() {
        // E = [[0,1],[0,0]], A = I is already in canonical form; the
        // reduction must hand back M = E and pass the forcing through
        // unchanged.
        let p = pencil(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let red = weierstrass_reduce(&p, 1e-9).unwrap();
        assert_eq!(red.shift, 0.0);
        assert_eq!(red.slow_dim(), 0);
        assert_eq!(red.fast_dim(), 2);
        assert_eq!(red.fast_index(), 2);
        let expect_m = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(red.fast.m.sub(&expect_m).max_abs() <= 1e-12);
        assert!(red.fast.input_map.sub(&Matrix::identity(2)).max_abs() <= 1e-12);
    }

    #[test]
    fn constructed_ground_truth() {
        // E = P blkdiag(1, N2) Q, A = P blkdiag(-2, I2) Q: slow spectrum
        // {-2}, fast index 2, for any invertible P, Q.
        let p_mat = Matrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 3.0],
        ])
        .unwrap();
        let q_mat = Matrix::from_rows(&[
            vec![2.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        let e_blk = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let a_blk = Matrix::from_rows(&[
            vec![-2.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p = Pencil::new(p_mat.matmul(&e_blk).matmul(&q_mat), p_mat.matmul(&a_blk).matmul(&q_mat))
            .unwrap();
        let red = weierstrass_reduce(&p, 1e-9).unwrap();
        assert_eq!(red.slow_dim(), 1);
        assert_eq!(red.fast_dim(), 2);
        assert_eq!(red.fast_index(), 2);
        let eigs = sorted_real_eigs(&red.slow.j);
        assert!((eigs[0] - -2.0).abs() <= 1e-6);
    }

    #[test]
    fn similarity_invariance() {
        let base_e = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let base_a = Matrix::from_rows(&[
            vec![-2.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let p_mat = Matrix::from_rows(&[
            vec![1.0, -1.0, 0.0],
            vec![2.0, 1.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let q_mat = Matrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, -1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let original = Pencil::new(base_e.clone(), base_a.clone()).unwrap();
        let scrambled = Pencil::new(
            p_mat.matmul(&base_e).matmul(&q_mat),
            p_mat.matmul(&base_a).matmul(&q_mat),
        )
        .unwrap();
        let r1 = weierstrass_reduce(&original, 1e-9).unwrap();
        let r2 = weierstrass_reduce(&scrambled, 1e-9).unwrap();
        assert_eq!(r1.fast_index(), r2.fast_index());
        assert_eq!(r1.slow_dim(), r2.slow_dim());
        let e1 = sorted_real_eigs(&r1.slow.j);
        let e2 = sorted_real_eigs(&r2.slow.j);
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn block_round_trip() {
        let p = pencil(
            &[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 2.0], vec![0.0, 0.0, 0.0]],
            &[vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]],
        );
        let red = weierstrass_reduce(&p, 1e-9).unwrap();
        let n1 = red.slow_dim();
        let n = red.dim();
        let blk = Matrix::from_fn(n, n, |i, j| {
            if i < n1 && j < n1 {
                red.slow.resolvent_block[(i, j)]
            } else if i >= n1 && j >= n1 {
                red.fast.resolvent_block[(i - n1, j - n1)]
            } else {
                0.0
            }
        });
        let reconstructed = red.t.matmul(&blk).matmul(&red.t_inv);
        let shifted_inv = p.e.scale(red.shift).sub(&p.a).inverse(1e-14).unwrap();
        let r = shifted_inv.matmul(&p.e);
        assert!(reconstructed.sub(&r).max_abs() <= 1e-8);
    }

    #[test]
    fn conditioning_gate_refuses_sloppy_tolerance() {
        // With tol = 1.0 the gate is cond(T) <= 1, which no 2x2 basis meets.
        let p = pencil(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            weierstrass_reduce(&p, 1.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn descriptor_solve_matches_singular_solver() {
        // The canonical fast pencil with g = (0, t), x0 = (1.5, 2.5) must
        // reproduce the known reduced-system solution: smooth (-1, -t),
        // one impulse of order 0 with weight (-2.5, 0).
        let req = DescriptorRequest {
            pencil: pencil(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
            g: Forcing::Smooth(parse_signal("[0, t]", 2).unwrap()),
            x0: vec![1.5, 2.5],
            tol: 1e-9,
        };
        let sol = solve_descriptor(&req).unwrap();
        let quad = QuadratureSpec::default();
        for t in [0.0, 0.5, 1.0, 2.0] {
            let x = sol.eval_smooth(t, &quad).unwrap();
            assert!((x[0] - -1.0).abs() <= 1e-8, "t={t}: {x:?}");
            assert!((x[1] - -t).abs() <= 1e-8, "t={t}: {x:?}");
        }
        let imps = sol.impulses();
        assert_eq!(imps.len(), 1);
        assert_eq!(imps[0].order, 0);
        assert!((imps[0].coeff[0] - -2.5).abs() <= 1e-8);
        assert!(imps[0].coeff[1].abs() <= 1e-8);
    }

    #[test]
    fn descriptor_solve_pure_ode() {
        // E = I: an ordinary ODE. x1' = -x1 + 1, x2' = -2 x2.
        let req = DescriptorRequest {
            pencil: pencil(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![-1.0, 0.0], vec![0.0, -2.0]]),
            g: Forcing::Smooth(parse_signal("[1, 0]", 2).unwrap()),
            x0: vec![0.0, 3.0],
            tol: 1e-9,
        };
        let sol = solve_descriptor(&req).unwrap();
        assert!(sol.impulses().is_empty());
        let quad = QuadratureSpec::default();
        for t in [0.0, 0.3, 1.0] {
            let x = sol.eval_smooth(t, &quad).unwrap();
            let expect = [1.0 - (-t as f64).exp(), 3.0 * (-2.0 * t as f64).exp()];
            assert!((x[0] - expect[0]).abs() <= 1e-8, "t={t}: {x:?}");
            assert!((x[1] - expect[1]).abs() <= 1e-8, "t={t}: {x:?}");
        }
    }

    #[test]
    fn consistent_start_is_impulse_free() {
        let req = DescriptorRequest {
            pencil: pencil(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
            g: Forcing::zero(2),
            x0: vec![1.0, 0.0],
            tol: 1e-9,
        };
        let sol = solve_descriptor(&req).unwrap();
        assert!(sol.impulses().is_empty());
    }

    #[test]
    fn descriptor_request_json_shape() {
        let text = r#"{"E": [[0.0, 1.0], [0.0, 0.0]], "A": [[1.0, 0.0], [0.0, 1.0]],
                       "g": "[0, t]", "x0": [1.5, 2.5]}"#;
        let req: DescriptorRequest = serde_json::from_str(text).unwrap();
        assert_eq!(req.pencil.dim(), 2);
        assert_eq!(req.tol, 1e-9);
        assert_eq!(req.g.dim(), 2);
        let back = serde_json::to_string(&req).unwrap();
        assert!(back.contains("\"E\""));
        let again: DescriptorRequest = serde_json::from_str(&back).unwrap();
        assert_eq!(again.x0, req.x0);
    }
}
