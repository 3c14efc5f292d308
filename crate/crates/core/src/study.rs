//! Convergence studies: evaluate the pairings `<x_i, lambda>` of the
//! perturbed solutions against a bank of test functions, compare them with
//! the pairing of the distributional limit, and judge whether the family
//! converges — plus the uniqueness and localization drivers built on top.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bump::{standard_bank, TestFunction};
use crate::dist::GeneralizedFunction;
use crate::error::{Error, Result};
use crate::pencil::{solve_descriptor, DescriptorRequest};
use crate::perturbed::{
    layer_integral_estimate, FamilyKind, LayerIntegral, PerturbationFamily, PerturbedSolver,
};
use crate::quad::{self, QuadratureSpec};
use crate::signal::hermite_extend_piecewise;
use crate::singular::{solve_singular_full, Forcing, SolveRequest};

/// The system under study: either already in the canonical shape
/// `N x' = x + f`, or a general descriptor system which is reduced first
/// (the study then targets its fast, impulsive subsystem).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StudySystem {
    Request(SolveRequest),
    Descriptor(DescriptorRequest),
}

/// One perturbation family, or several for the uniqueness study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    One(FamilyKind),
    Several(Vec<FamilyKind>),
}

impl FamilySpec {
    fn all(&self) -> Vec<FamilyKind> {
        match self {
            FamilySpec::One(k) => vec![k.clone()],
            FamilySpec::Several(ks) => ks.clone(),
        }
    }
}

/// Test-function bank: the built-in battery or an explicit list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BankSpec {
    Named(String),
    Explicit(Vec<TestFunction>),
}

impl Default for BankSpec {
    fn default() -> Self {
        BankSpec::Named("standard".into())
    }
}

impl BankSpec {
    fn resolve(&self, n: usize, q: usize) -> Result<Vec<TestFunction>> {
        let bank = match self {
            BankSpec::Named(name) if name == "standard" => standard_bank(n, q),
            BankSpec::Named(name) => {
                return Err(Error::InvalidInput(format!(
                    "unknown bank '{name}'; expected \"standard\" or an explicit list"
                )))
            }
            BankSpec::Explicit(list) => list.clone(),
        };
        if bank.is_empty() {
            return Err(Error::InvalidInput("test-function bank is empty".into()));
        }
        for lam in &bank {
            if lam.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: lam.dim(),
                });
            }
        }
        Ok(bank)
    }
}

fn default_k_search_max() -> usize {
    3
}

/// Everything a convergence study needs, deserializable from a single JSON
/// config document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub system: StudySystem,
    pub family: FamilySpec,
    pub indices: Vec<usize>,
    #[serde(default)]
    pub bank: BankSpec,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default = "default_k_search_max")]
    pub k_search_max: usize,
    /// Override for the convergence threshold; when absent the report uses
    /// max(1e-3, 10 x quadrature absolute tolerance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_threshold: Option<f64>,
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.indices.len() < 2 {
            return Err(Error::InvalidInput(
                "a study needs at least two perturbation indices".into(),
            ));
        }
        if !self.indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "perturbation indices must be strictly increasing".into(),
            ));
        }
        if self.indices[0] == 0 {
            return Err(Error::InvalidInput("perturbation indices start at 1".into()));
        }
        self.quad.validate()?;
        if let Some(th) = self.verdict_threshold {
            if !(th > 0.0) || !th.is_finite() {
                return Err(Error::InvalidInput(
                    "verdict threshold must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }

    fn threshold(&self) -> (f64, String) {
        match self.verdict_threshold {
            Some(th) => (th, "configured".into()),
            None => (
                (10.0 * self.quad.abs_tol).max(1e-3),
                "engineering default: max(1e-3, 10 x quadrature abs_tol)".into(),
            ),
        }
    }
}

/// The canonical-form problem a study actually runs on, with its
/// distributional limit precomputed.
struct EffectiveSystem {
    request: SolveRequest,
    limit: GeneralizedFunction,
    q: usize,
}

fn effective_system(system: &StudySystem) -> Result<EffectiveSystem> {
    match system {
        StudySystem::Request(req) => {
            let full = solve_singular_full(req)?;
            Ok(EffectiveSystem {
                request: req.clone(),
                limit: full.solution,
                q: full.nilpotency.index,
            })
        }
        StudySystem::Descriptor(dreq) => {
            let sol = solve_descriptor(dreq)?;
            let red = sol.reduced();
            if red.fast_dim() == 0 {
                return Err(Error::InvalidInput(
                    "descriptor system has no fast subsystem; convergence studies \
                     target the impulsive part"
                        .into(),
                ));
            }
            let z0 = red.t_inv.matvec(&dreq.x0);
            let request = SolveRequest {
                n_matrix: red.fast.m.clone(),
                x0: z0[red.slow_dim()..].to_vec(),
                f: dreq.g.matrix_apply(&red.fast.input_map),
                tol: dreq.tol,
            };
            let limit = sol.fast().clone();
            let q = red.fast_index();
            Ok(EffectiveSystem { request, limit, q })
        }
    }
}

/// `<x_i, lambda> = integral_0^inf x_i(t)^T lambda(t) dt`, over the support
/// of lambda with layer-aware cuts. Returns (value, error estimate).
fn perturbed_pairing(
    solver: &PerturbedSolver,
    lam: &TestFunction,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let (lo, hi) = lam.support();
    let lo = lo.max(0.0);
    if hi <= lo {
        return Ok((0.0, 0.0));
    }
    let mut inner_error: Option<Error> = None;
    let mut integrand = |t: f64| -> f64 {
        match solver.eval(t, quad) {
            Ok(x) => {
                let l = lam.eval(t, 0);
                x.iter().zip(&l).map(|(a, b)| a * b).sum()
            }
            Err(e) => {
                if inner_error.is_none() {
                    inner_error = Some(e);
                }
                f64::NAN
            }
        }
    };
    let mut cuts = solver.layer_breakpoints(hi);
    cuts.extend_from_slice(solver.forcing_breakpoints());
    let out = quad::integrate_scalar(&mut integrand, lo, hi, &cuts, quad);
    if let Some(e) = inner_error {
        return Err(e);
    }
    out
}

/// One successful pairing comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub i: usize,
    pub testfn_id: String,
    pub pairing_perturbed: f64,
    pub pairing_limit: f64,
    pub abs_error: f64,
    pub quad_err_estimate: f64,
}

/// A row the study could not complete; kept out of rates and verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRow {
    pub i: usize,
    pub testfn_id: String,
    pub error: String,
}

/// Fitted slope of log(error) against log(i) for one test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub testfn_id: String,
    /// `None` when fewer than two nonzero errors are available.
    pub slope: Option<f64>,
}

/// Layer-integral estimates for one power k across all indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessEntry {
    pub k: usize,
    pub estimates: Vec<(usize, LayerIntegral)>,
    /// max/min of the bounded estimates, when all are bounded and nonzero.
    pub ratio: Option<f64>,
    /// All estimates bounded, and the sequence certified uniform in i:
    /// max/min <= 10, or negligibly small throughout, or nonincreasing
    /// (a decaying positive sequence is bounded by its first entry even
    /// though its max/min ratio grows without bound).
    pub uniformly_bounded: bool,
}

/// Study outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    NotConverging,
    DivergentFamily,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Converging => "converging",
            Verdict::NotConverging => "not_converging",
            Verdict::DivergentFamily => "divergent_family",
        };
        f.write_str(s)
    }
}

/// Full record of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<StudyRow>,
    pub failed_rows: Vec<FailedRow>,
    pub rates: Vec<RateEntry>,
    pub boundedness: Vec<BoundednessEntry>,
    /// Smallest k whose layer integrals are uniform across the indices.
    pub smallest_bounded_k: Option<usize>,
    pub verdict: Verdict,
    /// Error threshold the verdict used; every report declares it.
    pub threshold: f64,
    pub threshold_source: String,
}

impl ConvergenceReport {
    /// CSV emission, one line per successful row.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("i,testfn_id,pairing_perturbed,pairing_limit,abs_error,quad_err_estimate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.i, r.testfn_id, r.pairing_perturbed, r.pairing_limit, r.abs_error,
                r.quad_err_estimate
            ));
        }
        out
    }
}

/// Unique display ids for the bank (duplicate labels get a numeric suffix).
fn bank_ids(bank: &[TestFunction]) -> Vec<String> {
    let mut ids = Vec::with_capacity(bank.len());
    for lam in bank {
        let base = lam.label();
        let clashes = ids.iter().filter(|id: &&String| {
            id.as_str() == base || id.starts_with(&format!("{base}#"))
        })
        .count();
        if clashes == 0 {
            ids.push(base);
        } else {
            ids.push(format!("{base}#{}", clashes + 1));
        }
    }
    ids
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Run one convergence study: all pairings, rates, the layer-integral
/// boundedness table, and the verdict.
///
/// Failures of individual rows (a member that does not realize, quadrature
/// breakdown, overflow) are recorded and skipped; the study itself only
/// fails on invalid configuration or an unsolvable limit system.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let kinds = cfg.family.all();
    if kinds.len() != 1 {
        return Err(Error::InvalidInput(
            "run_study takes exactly one family; use uniqueness_study for several".into(),
        ));
    }
    run_study_with_family(cfg, &kinds[0])
}

fn run_study_with_family(cfg: &StudyConfig, kind: &FamilyKind) -> Result<ConvergenceReport> {
    let eff = effective_system(&cfg.system)?;
    let n = eff.request.dim();
    let bank = cfg.bank.resolve(n, eff.q)?;
    let ids = bank_ids(&bank);
    let family = PerturbationFamily::new(eff.request.n_matrix.clone(), kind.clone())?;
    let (threshold, threshold_source) = cfg.threshold();

    // The limit pairing is index-independent; compute it once per member.
    let mut limit_pairings = Vec::with_capacity(bank.len());
    for lam in &bank {
        limit_pairings.push(eff.limit.pair(lam, &cfg.quad)?);
    }

    let mut rows = Vec::new();
    let mut failed_rows = Vec::new();
    for &i in &cfg.indices {
        let solver = family.realize(i).and_then(|n_i| {
            PerturbedSolver::new(n_i, eff.request.x0.clone(), &eff.request.f)
        });
        match solver {
            Ok(solver) => {
                for (b, lam) in bank.iter().enumerate() {
                    match perturbed_pairing(&solver, lam, &cfg.quad) {
                        Ok((value, err_est)) => {
                            let limit = &limit_pairings[b];
                            rows.push(StudyRow {
                                i,
                                testfn_id: ids[b].clone(),
                                pairing_perturbed: value,
                                pairing_limit: limit.value,
                                abs_error: (value - limit.value).abs(),
                                quad_err_estimate: err_est + limit.quadrature_error_estimate,
                            });
                        }
                        Err(e) => failed_rows.push(FailedRow {
                            i,
                            testfn_id: ids[b].clone(),
                            error: e.to_string(),
                        }),
                    }
                }
            }
            Err(e) => {
                for id in &ids {
                    failed_rows.push(FailedRow {
                        i,
                        testfn_id: id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }

    let rates = ids
        .iter()
        .map(|id| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.testfn_id == id && r.abs_error > 0.0)
                .map(|r| ((r.i as f64).ln(), r.abs_error.ln()))
                .collect();
            RateEntry {
                testfn_id: id.clone(),
                slope: fit_slope(&pts),
            }
        })
        .collect();

    let boundedness = boundedness_table(&family, &cfg.indices, cfg.k_search_max, &cfg.quad);
    let smallest_bounded_k = boundedness
        .iter()
        .find(|e| e.uniformly_bounded)
        .map(|e| e.k);

    let verdict = decide_verdict(
        &rows,
        &ids,
        &cfg.indices,
        &boundedness,
        cfg.k_search_max,
        threshold,
    );

    Ok(ConvergenceReport {
        rows,
        failed_rows,
        rates,
        boundedness,
        smallest_bounded_k,
        verdict,
        threshold,
        threshold_source,
    })
}

fn boundedness_table(
    family: &PerturbationFamily,
    indices: &[usize],
    k_max: usize,
    quad: &QuadratureSpec,
) -> Vec<BoundednessEntry> {
    (0..=k_max)
        .map(|k| {
            let mut estimates = Vec::new();
            for &i in indices {
                if let Ok(n_i) = family.realize(i) {
                    if let Ok(est) = layer_integral_estimate(&n_i, k, quad) {
                        estimates.push((i, est));
                    }
                }
            }
            let values: Vec<f64> = estimates
                .iter()
                .filter_map(|(_, e)| match e {
                    LayerIntegral::Bounded { value, .. } => Some(*value),
                    LayerIntegral::Divergent => None,
                })
                .collect();
            let all_bounded = values.len() == estimates.len() && !estimates.is_empty();
            let max = values.iter().cloned().fold(f64::MIN, f64::max);
            let min = values.iter().cloned().fold(f64::MAX, f64::min);
            let (ratio, uniformly_bounded) = if !all_bounded {
                (None, false)
            } else if max <= 1e-12 {
                // Identically (numerically) zero: bounded, no meaningful ratio.
                (None, true)
            } else {
                let ratio = max / min;
                // The ratio test certifies sequences that settle on a positive
                // limit. It misreads decay to zero as spread, so accept a
                // nonincreasing sequence as bounded by its first entry.
                let decaying = values
                    .windows(2)
                    .all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-12);
                (Some(ratio), ratio <= 10.0 || decaying)
            };
            BoundednessEntry {
                k,
                estimates,
                ratio,
                uniformly_bounded,
            }
        })
        .collect()
}

fn decide_verdict(
    rows: &[StudyRow],
    ids: &[String],
    indices: &[usize],
    boundedness: &[BoundednessEntry],
    k_max: usize,
    threshold: f64,
) -> Verdict {
    // A family whose layer integrals diverge at every power, for any
    // member, cannot pair boundedly at all.
    for &i in indices {
        let all_divergent = (0..=k_max).all(|k| {
            boundedness[k]
                .estimates
                .iter()
                .any(|(ei, e)| *ei == i && *e == LayerIntegral::Divergent)
        });
        if all_divergent {
            return Verdict::DivergentFamily;
        }
    }

    // Converging: for every bank member, errors over the last three
    // indices are present, monotone nonincreasing, and end below the
    // threshold.
    let tail = indices.len().min(3);
    let tail_indices = &indices[indices.len() - tail..];
    for id in ids {
        let mut errs = Vec::with_capacity(tail);
        for &i in tail_indices {
            match rows
                .iter()
                .find(|r| r.i == i && &r.testfn_id == id)
            {
                Some(r) => errs.push(r.abs_error),
                None => return Verdict::NotConverging,
            }
        }
        if !errs.windows(2).all(|w| w[1] <= w[0]) {
            return Verdict::NotConverging;
        }
        if *errs.last().expect("tail nonempty") > threshold {
            return Verdict::NotConverging;
        }
    }
    Verdict::Converging
}

/// Pairwise agreement of the limits reached by different families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub family_a: usize,
    pub family_b: usize,
    pub testfn_id: String,
    pub pairing_a: f64,
    pub pairing_b: f64,
    pub difference: f64,
    pub allowance: f64,
    pub within: bool,
}

/// Outcome of [`uniqueness_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub families: Vec<ConvergenceReport>,
    pub comparisons: Vec<AgreementRow>,
    pub agree: bool,
}

/// Check that several converging families approach the same pairings: at
/// the final index, every pair of families must agree to within three
/// times their combined final errors plus the quadrature tolerance.
pub fn uniqueness_study(cfg: &StudyConfig) -> Result<UniquenessReport> {
    cfg.validate()?;
    let kinds = cfg.family.all();
    if kinds.len() < 2 {
        return Err(Error::Precondition(
            "uniqueness study needs at least two perturbation families".into(),
        ));
    }
    let mut families = Vec::with_capacity(kinds.len());
    for (fi, kind) in kinds.iter().enumerate() {
        let report = run_study_with_family(cfg, kind)?;
        if report.verdict != Verdict::Converging {
            return Err(Error::Precondition(format!(
                "family {fi} has verdict {}; every family must converge before \
                 limits can be compared",
                report.verdict
            )));
        }
        families.push(report);
    }

    let last = *cfg.indices.last().expect("validated nonempty");
    let mut comparisons = Vec::new();
    let mut agree = true;
    for a in 0..families.len() {
        for b in a + 1..families.len() {
            for row_a in families[a].rows.iter().filter(|r| r.i == last) {
                let row_b = families[b]
                    .rows
                    .iter()
                    .find(|r| r.i == last && r.testfn_id == row_a.testfn_id)
                    .expect("converging reports have complete final rows");
                let difference = (row_a.pairing_perturbed - row_b.pairing_perturbed).abs();
                let allowance =
                    3.0 * (row_a.abs_error + row_b.abs_error) + cfg.quad.abs_tol;
                let within = difference <= allowance;
                agree &= within;
                comparisons.push(AgreementRow {
                    family_a: a,
                    family_b: b,
                    testfn_id: row_a.testfn_id.clone(),
                    pairing_a: row_a.pairing_perturbed,
                    pairing_b: row_b.pairing_perturbed,
                    difference,
                    allowance,
                    within,
                });
            }
        }
    }
    Ok(UniquenessReport {
        families,
        comparisons,
        agree,
    })
}

/// Compare `<x_i, lambda>` for the true forcing against the same system
/// driven by the tapered forcing `hermite_extend(f, b, q)`. For a test
/// function supported left of b the trajectories agree exactly on the
/// support, so the difference is pure quadrature noise — at most twice the
/// quadrature tolerance.
pub fn localization_check(
    system: &StudySystem,
    kind: &FamilyKind,
    i: usize,
    b: f64,
    lam: &TestFunction,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidInput("taper point must be positive".into()));
    }
    let eff = effective_system(system)?;
    if lam.dim() != eff.request.dim() {
        return Err(Error::DimensionMismatch {
            expected: eff.request.dim(),
            got: lam.dim(),
        });
    }
    let (_, hi) = lam.support();
    if hi > b {
        return Err(Error::Precondition(format!(
            "test function support reaches {hi}, past the taper point {b}; \
             localization only holds left of the taper"
        )));
    }
    let family = PerturbationFamily::new(eff.request.n_matrix.clone(), kind.clone())?;
    let n_i = family.realize(i)?;

    let solver_true =
        PerturbedSolver::new(n_i.clone(), eff.request.x0.clone(), &eff.request.f)?;
    let tapered = Forcing::Piecewise(hermite_extend_piecewise(
        &eff.request.f.to_piecewise(),
        b,
        eff.q,
    ));
    let solver_tapered = PerturbedSolver::new(n_i, eff.request.x0.clone(), &tapered)?;

    let (p_true, _) = perturbed_pairing(&solver_true, lam, quad)?;
    let (p_tapered, _) = perturbed_pairing(&solver_tapered, lam, quad)?;
    Ok((p_true - p_tapered).abs())
}
