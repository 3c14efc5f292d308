//! Browser demo bindings: small JSON-in / JSON-out wrappers around the
//! solver so a static page can plot trajectories, convergence data, and
//! layer integrals without a server. Errors come back as `{"error": ...}`
//! rather than exceptions so the page can render them inline.

use serde::Deserialize;
use wasm_bindgen::prelude::wasm_bindgen;

use singlim::{
    layer_integral_estimate, run_study, solve_singular_full, BankSpec, FamilyKind, FamilySpec,
    LayerIntegral, PerturbationFamily, PerturbedSolver, QuadratureSpec, SolveRequest, StudyConfig,
    StudySystem,
};

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

#[derive(Deserialize)]
struct TrajectoryInput {
    system: SolveRequest,
    #[serde(default)]
    family: Option<FamilyKind>,
    index: usize,
    #[serde(default = "default_t_max")]
    t_max: f64,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_t_max() -> f64 {
    2.0
}

fn default_points() -> usize {
    201
}

/// Perturbed trajectory x_i on a uniform grid next to the exact limit:
/// smooth part samples plus the impulse series for annotation.
#[wasm_bindgen]
pub fn demo_trajectory(input: &str) -> String {
    let cfg: TrajectoryInput = match serde_json::from_str(input) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    if cfg.points < 2 || cfg.points > 4000 {
        return err_json("points must be between 2 and 4000");
    }
    if !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return err_json("t_max must be positive");
    }
    let inner = || -> singlim::Result<serde_json::Value> {
        let limit = solve_singular_full(&cfg.system)?;
        let family = PerturbationFamily::new(
            cfg.system.n_matrix.clone(),
            cfg.family.clone().unwrap_or(FamilyKind::Shift),
        )?;
        let n_i = family.realize(cfg.index)?;
        let solver = PerturbedSolver::new(n_i, cfg.system.x0.clone(), &cfg.system.f)?;
        let quad = QuadratureSpec {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            ..QuadratureSpec::default()
        };
        let mut ts = Vec::with_capacity(cfg.points);
        let mut perturbed = Vec::with_capacity(cfg.points);
        let mut limit_smooth = Vec::with_capacity(cfg.points);
        for p in 0..cfg.points {
            let t = cfg.t_max * p as f64 / (cfg.points - 1) as f64;
            ts.push(t);
            perturbed.push(solver.eval(t, &quad)?);
            limit_smooth.push(limit.solution.smooth().eval(t.max(1e-12)));
        }
        Ok(serde_json::json!({
            "ts": ts,
            "perturbed": perturbed,
            "limit_smooth": limit_smooth,
            "impulses": limit.solution.impulses(),
            "layer_width": solver.layer_width(),
            "nilpotency_index": limit.nilpotency.index,
            "consistent": limit.consistent,
        }))
    };
    match inner() {
        Ok(v) => v.to_string(),
        Err(e) => err_json(e),
    }
}

/// Full convergence study; the page plots abs_error against i per test
/// function and shows the verdict line.
#[wasm_bindgen]
pub fn demo_convergence(input: &str) -> String {
    let cfg: StudyConfig = match serde_json::from_str(input) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    if cfg.indices.last().copied().unwrap_or(0) > 2048 {
        return err_json("indices above 2048 are too slow for the browser demo");
    }
    match run_study(&cfg) {
        Ok(report) => serde_json::to_string(&report).unwrap_or_else(err_json),
        Err(e) => err_json(e),
    }
}

#[derive(Deserialize)]
struct LayerInput {
    system: SolveRequest,
    #[serde(default)]
    family: Option<FamilyKind>,
    indices: Vec<usize>,
    #[serde(default = "default_k_max")]
    k_max: usize,
}

fn default_k_max() -> usize {
    3
}

/// Layer integrals across the family for k = 0..k_max, the data behind the
/// boundedness table.
#[wasm_bindgen]
pub fn demo_layer_integrals(input: &str) -> String {
    let cfg: LayerInput = match serde_json::from_str(input) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    if cfg.indices.is_empty() || cfg.indices.len() > 16 {
        return err_json("between 1 and 16 indices, please");
    }
    if cfg.k_max > 6 {
        return err_json("k_max above 6 is too slow for the browser demo");
    }
    let inner = || -> singlim::Result<serde_json::Value> {
        let family = PerturbationFamily::new(
            cfg.system.n_matrix.clone(),
            cfg.family.clone().unwrap_or(FamilyKind::Shift),
        )?;
        let quad = QuadratureSpec {
            abs_tol: 1e-9,
            ..QuadratureSpec::default()
        };
        let mut table = Vec::new();
        for k in 0..=cfg.k_max {
            let mut row = Vec::new();
            for &i in &cfg.indices {
                let n_i = family.realize(i)?;
                let entry = match layer_integral_estimate(&n_i, k, &quad)? {
                    LayerIntegral::Bounded { value, .. } => {
                        serde_json::json!({ "i": i, "value": value })
                    }
                    LayerIntegral::Divergent => {
                        serde_json::json!({ "i": i, "divergent": true })
                    }
                };
                row.push(entry);
            }
            table.push(serde_json::json!({ "k": k, "estimates": row }));
        }
        Ok(serde_json::json!({ "table": table }))
    };
    match inner() {
        Ok(v) => v.to_string(),
        Err(e) => err_json(e),
    }
}

// Convenience used by the page: a ready-made scalar study so the demo works
// before the user edits anything.
#[wasm_bindgen]
pub fn demo_default_study() -> String {
    let cfg = StudyConfig {
        system: StudySystem::Request(SolveRequest {
            n_matrix: singlim::Matrix::zeros(1, 1),
            x0: vec![2.0],
            f: singlim::parse_signal("[1]", 1)
                .map(singlim::Forcing::Smooth)
                .expect("literal parses"),
            tol: 1e-9,
        }),
        family: FamilySpec::One(FamilyKind::Shift),
        indices: vec![8, 16, 32, 64, 128],
        bank: BankSpec::default(),
        quad: QuadratureSpec {
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            ..QuadratureSpec::default()
        },
        k_search_max: 2,
        verdict_threshold: None,
    };
    serde_json::to_string_pretty(&cfg).expect("config serializes")
}
