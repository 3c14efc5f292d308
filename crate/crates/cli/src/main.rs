//! Command-line front end: solve singular systems, evaluate perturbed
//! trajectories, reduce pencils, and drive the convergence / uniqueness /
//! localization studies from JSON config documents.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 input or usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use singlim::{
    localization_check, run_study, solve_perturbed, solve_singular_full, uniqueness_study,
    weierstrass_reduce, DescriptorRequest, Error, FamilyKind, PerturbationFamily, QuadratureSpec,
    SolveRequest, StudyConfig, StudySystem, TestFunction,
};

#[derive(Parser)]
#[command(
    name = "singlim",
    version,
    about = "Distributional solutions of singular linear systems and their \
             singularly perturbed approximations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve N x' = x + f exactly; prints the smooth part and impulse series as JSON.
    Solve(CommonArgs),
    /// Evaluate a perturbed solution x_i on a time grid; prints CSV rows (t, x_1, ..., x_n).
    Perturb(CommonArgs),
    /// Reduce a pencil system E x' = A x + g to slow and fast subsystems.
    Reduce(CommonArgs),
    /// Pair the distributional solution of a system with one test function.
    Pair(CommonArgs),
    /// Run a convergence study and emit the report.
    Converge(CommonArgs),
    /// Compare the limits reached by several perturbation families.
    Uniqueness(CommonArgs),
    /// Check that a compact-support taper of the forcing leaves pairings unchanged.
    Localize(CommonArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON problem or study configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format; defaults to json, or csv when --out ends in .csv.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override the quadrature absolute tolerance.
    #[arg(long)]
    quad_abs: Option<f64>,
    /// Override the quadrature relative tolerance.
    #[arg(long)]
    quad_rel: Option<f64>,
    /// Override the quadrature subdivision cap.
    #[arg(long)]
    max_subdiv: Option<usize>,
    /// Override the boundedness search depth k_search_max.
    #[arg(long)]
    k_max: Option<usize>,
    /// Print progress and summaries to stderr.
    #[arg(long, short)]
    verbose: bool,
}

impl CommonArgs {
    fn effective_format(&self) -> Format {
        if let Some(f) = self.format {
            return f;
        }
        match &self.out {
            Some(p) if p.extension().map(|e| e == "csv").unwrap_or(false) => Format::Csv,
            _ => Format::Json,
        }
    }

    fn apply_quad_overrides(&self, quad: &mut QuadratureSpec) {
        if let Some(v) = self.quad_abs {
            quad.abs_tol = v;
        }
        if let Some(v) = self.quad_rel {
            quad.rel_tol = v;
        }
        if let Some(v) = self.max_subdiv {
            quad.max_subdivisions = v;
        }
    }

    fn read_config<T: for<'de> Deserialize<'de>>(&self) -> Result<T, Failure> {
        let text = fs::read_to_string(&self.config).map_err(|e| {
            Failure::input(format!("cannot read {}: {e}", self.config.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Failure::input(format!("cannot parse {}: {e}", self.config.display()))
        })
    }

    fn emit(&self, body: &str) -> Result<(), Failure> {
        let mut body = body.to_string();
        if !body.ends_with('\n') {
            body.push('\n');
        }
        match &self.out {
            Some(path) => fs::write(path, &body).map_err(|e| {
                Failure::input(format!("cannot write {}: {e}", path.display()))
            }),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }
}

/// A failure routed to an exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: String) -> Self {
        Failure { code: 2, message }
    }

    fn numeric(message: String) -> Self {
        Failure { code: 1, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            // The input itself is unusable.
            Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::Precondition(_)
            | Error::InsufficientSmoothness { .. }
            | Error::NotNilpotent { .. }
            | Error::NotRegular { .. }
            | Error::MissingIndex { .. }
            | Error::SingularMember { .. } => 2,
            // The computation failed on legitimate input.
            Error::Singular { .. }
            | Error::Overflow
            | Error::QuadratureFailure { .. }
            | Error::IllConditioned { .. }
            | Error::EigenFailure => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct PerturbConfig {
    system: SolveRequest,
    #[serde(default)]
    family: Option<FamilyKind>,
    index: usize,
    #[serde(default = "default_t_max")]
    t_max: f64,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default)]
    quad: QuadratureSpec,
}

fn default_t_max() -> f64 {
    2.0
}

fn default_points() -> usize {
    101
}

#[derive(Deserialize)]
struct PairConfig {
    system: SolveRequest,
    testfn: TestFunction,
    #[serde(default)]
    quad: QuadratureSpec,
}

#[derive(Deserialize)]
struct LocalizeConfig {
    system: StudySystem,
    family: FamilyKind,
    index: usize,
    b: f64,
    testfn: TestFunction,
    #[serde(default)]
    quad: QuadratureSpec,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Perturb(args) => cmd_perturb(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Pair(args) => cmd_pair(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Uniqueness(args) => cmd_uniqueness(args),
        Command::Localize(args) => cmd_localize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn cmd_solve(args: &CommonArgs) -> Result<(), Failure> {
    if args.effective_format() == Format::Csv {
        return Err(Failure::input("solve reports are JSON only".into()));
    }
    let req: SolveRequest = args.read_config()?;
    let solution = solve_singular_full(&req)?;
    if args.verbose {
        eprint!("{solution}");
    }
    args.emit(&to_json(&solution))
}

fn cmd_perturb(args: &CommonArgs) -> Result<(), Failure> {
    let mut cfg: PerturbConfig = args.read_config()?;
    args.apply_quad_overrides(&mut cfg.quad);
    cfg.quad.validate()?;
    if cfg.points < 2 {
        return Err(Failure::input("grid needs at least two points".into()));
    }
    if !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return Err(Failure::input("t_max must be positive".into()));
    }
    let family = PerturbationFamily::new(
        cfg.system.n_matrix.clone(),
        cfg.family.clone().unwrap_or(FamilyKind::Shift),
    )?;
    let n_i = family.realize(cfg.index)?;
    if args.verbose {
        eprintln!(
            "realized member {} of a {}-dimensional family",
            cfg.index,
            family.dim()
        );
    }
    let n = cfg.system.dim();
    let mut body = String::from("t");
    for c in 1..=n {
        body.push_str(&format!(",x{c}"));
    }
    body.push('\n');
    for p in 0..cfg.points {
        let t = cfg.t_max * p as f64 / (cfg.points - 1) as f64;
        let x = solve_perturbed(&n_i, &cfg.system.x0, &cfg.system.f, t, &cfg.quad)?;
        body.push_str(&format!("{t}"));
        for v in &x {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    args.emit(&body)
}

fn cmd_reduce(args: &CommonArgs) -> Result<(), Failure> {
    if args.effective_format() == Format::Csv {
        return Err(Failure::input("reduce reports are JSON only".into()));
    }
    let req: DescriptorRequest = args.read_config()?;
    let reduced = weierstrass_reduce(&req.pencil, req.tol)?;
    if args.verbose {
        eprintln!(
            "slow dimension {}, fast dimension {} (index {}), cond(T) = {:.3e}",
            reduced.slow_dim(),
            reduced.fast_dim(),
            reduced.fast_index(),
            reduced.cond_t
        );
    }
    args.emit(&to_json(&reduced))
}

fn cmd_pair(args: &CommonArgs) -> Result<(), Failure> {
    let mut cfg: PairConfig = args.read_config()?;
    args.apply_quad_overrides(&mut cfg.quad);
    cfg.quad.validate()?;
    let solution = solve_singular_full(&cfg.system)?;
    let pairing = solution.solution.pair(&cfg.testfn, &cfg.quad)?;
    args.emit(&to_json(&pairing))
}

fn cmd_converge(args: &CommonArgs) -> Result<(), Failure> {
    let mut cfg: StudyConfig = args.read_config()?;
    args.apply_quad_overrides(&mut cfg.quad);
    if let Some(k) = args.k_max {
        cfg.k_search_max = k;
    }
    let report = run_study(&cfg)?;
    if args.verbose {
        eprintln!(
            "{} rows, {} failed, verdict {} (threshold {:.3e}, {})",
            report.rows.len(),
            report.failed_rows.len(),
            report.verdict,
            report.threshold,
            report.threshold_source
        );
        for fr in &report.failed_rows {
            eprintln!("warning: row (i={}, {}) failed: {}", fr.i, fr.testfn_id, fr.error);
        }
    }
    let body = match args.effective_format() {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    };
    args.emit(&body)
}

fn cmd_uniqueness(args: &CommonArgs) -> Result<(), Failure> {
    if args.effective_format() == Format::Csv {
        return Err(Failure::input("uniqueness reports are JSON only".into()));
    }
    let mut cfg: StudyConfig = args.read_config()?;
    args.apply_quad_overrides(&mut cfg.quad);
    if let Some(k) = args.k_max {
        cfg.k_search_max = k;
    }
    let report = uniqueness_study(&cfg)?;
    if args.verbose {
        eprintln!(
            "{} families, {} comparisons, agree = {}",
            report.families.len(),
            report.comparisons.len(),
            report.agree
        );
    }
    let agree = report.agree;
    args.emit(&to_json(&report))?;
    if agree {
        Ok(())
    } else {
        Err(Failure::numeric(
            "family limits disagree beyond tolerance".into(),
        ))
    }
}

fn cmd_localize(args: &CommonArgs) -> Result<(), Failure> {
    if args.effective_format() == Format::Csv {
        return Err(Failure::input("localize reports are JSON only".into()));
    }
    let mut cfg: LocalizeConfig = args.read_config()?;
    args.apply_quad_overrides(&mut cfg.quad);
    cfg.quad.validate()?;
    let difference = localization_check(
        &cfg.system,
        &cfg.family,
        cfg.index,
        cfg.b,
        &cfg.testfn,
        &cfg.quad,
    )?;
    let allowance = 2.0 * cfg.quad.abs_tol;
    let within = difference <= allowance;
    args.emit(&to_json(&serde_json::json!({
        "difference": difference,
        "allowance": allowance,
        "within": within,
    })))?;
    if within {
        Ok(())
    } else {
        Err(Failure::numeric(format!(
            "localization difference {difference:.3e} exceeds allowance {allowance:.3e}"
        )))
    }
}
