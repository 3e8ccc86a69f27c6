//! Configuration-driven experiments and their reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponent::{ExponentError, ExponentField, ExponentSpec};
use crate::femspace::{FeSpacePair, PairKind};
use crate::mesh::{MeshError, Triangulation};
use crate::norms::{eoc, pressure_error, quasinorm_error, ErrorRecord, NormError};
use crate::orlicz::{NFunctionKernel, OrliczError};
use crate::projection::{ProjectionError, KORN_CONSTANT};
use crate::solver::{manufactured_by_name, newton_solve, DiscreteSolution, FeProblem, NewtonConfig, RhsFunctional, SolverError, StageRecord, StressMode};
use crate::verification::{
    assumption_scan, bands_stable, decay_factor, equivalence_bands, infsup_scan, korn_constant, orlicz_suite, relative_spread, AssumptionLevel, EquivalenceBand,
    InfSupScan, OrliczSuite, SuiteSizes, VerificationError,
};

pub const SCHEMA: &str = "varpx-report/1";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Orlicz(#[from] OrliczError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    UnitSquare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Subdivisions per side of the unit square, one entry per level.
    pub levels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kappa: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub pair: PairKind,
    #[serde(default = "localized")]
    pub stress_mode: StressMode,
}

fn localized() -> StressMode {
    StressMode::Localized
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: String,
    pub json: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), csv: "convergence.csv".into(), json: "report.json".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    pub levels: Vec<usize>,
    pub assumption_samples: usize,
    pub equivalence_samples: usize,
    pub suite: SuiteSizes,
    /// Allowed relative deviation from the mean over levels (inf-sup, constants).
    pub stability_tolerance: f64,
    pub equivalence_tolerance: f64,
    /// Allowed `(max - min) / max` of `beta_h` for the stable pairs.
    pub infsup_tolerance: f64,
    /// Required `beta(first) / beta(last)` for the equal-order control pair.
    pub control_decay: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            levels: vec![4, 8, 16],
            assumption_samples: 100,
            equivalence_samples: 20,
            suite: SuiteSizes::default(),
            stability_tolerance: 0.2,
            equivalence_tolerance: 0.25,
            infsup_tolerance: 0.25,
            control_decay: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: Domain,
    pub mesh: MeshConfig,
    pub exponent: ExponentSpec,
    pub kernel: KernelConfig,
    pub discretization: DiscretizationConfig,
    #[serde(default = "default_manufactured")]
    pub manufactured: String,
    #[serde(default)]
    pub solver: NewtonConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub eoc_tolerance: f64,
    #[serde(default)]
    pub verification: VerificationConfig,
}

fn default_manufactured() -> String {
    "curl_bubble_sine".into()
}

fn default_tolerance() -> f64 {
    0.15
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.mesh.levels.is_empty() {
            return bad("mesh.levels is empty".into());
        }
        if self.mesh.levels[0] == 0 || self.mesh.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("mesh.levels must be positive and strictly increasing, got {:?}", self.mesh.levels));
        }
        if manufactured_by_name(&self.manufactured).is_none() {
            return bad(format!("unknown manufactured solution {:?}", self.manufactured));
        }
        ExponentField::from_spec(&self.exponent)?;
        NFunctionKernel::new(self.kernel.kappa, self.kernel.mu, 2.0)?;
        if !(self.eoc_tolerance >= 0.0) {
            return bad(format!("eoc_tolerance must be nonnegative, got {}", self.eoc_tolerance));
        }
        let v = &self.verification;
        if v.levels.is_empty() || v.levels[0] == 0 || v.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("verification.levels must be positive and strictly increasing, got {:?}", v.levels));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment { package: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), threads: rayon::current_num_threads() }
    }
}

/// Rates from `(p_minus, p_plus, alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalRates {
    pub p_minus: f64,
    pub p_plus: f64,
    pub alpha: f64,
    /// `min{1, (p+)'/2}`.
    pub velocity_power: f64,
    /// `min{velocity_power, alpha}`.
    pub velocity: f64,
    /// `min{((p+)')^2, 4} / (2 (p-)')`.
    pub pressure_power: f64,
    /// `min{pressure_power, alpha}`.
    pub pressure: f64,
    /// `alpha min{2, (p+)'} / (p-)'`.
    pub alpha_p: f64,
    /// `min{((p+)')^2 / 2, (p+)'} / (p-)'`.
    pub beta_p: f64,
    /// `min{alpha_p, beta_p}`, the rate in the localized conjugate exponent.
    pub pressure_localized: f64,
}

fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

impl TheoreticalRates {
    pub fn new(p_minus: f64, p_plus: f64, alpha: f64) -> Self {
        let (cp, cm) = (conj(p_plus), conj(p_minus));
        let velocity_power = (0.5 * cp).min(1.0);
        let pressure_power = (cp * cp).min(4.0) / (2.0 * cm);
        let alpha_p = alpha * cp.min(2.0) / cm;
        let beta_p = (0.5 * cp * cp).min(cp) / cm;
        TheoreticalRates {
            p_minus,
            p_plus,
            alpha,
            velocity_power,
            velocity: velocity_power.min(alpha),
            pressure_power,
            pressure: pressure_power.min(alpha),
            alpha_p,
            beta_p,
            pressure_localized: alpha_p.min(beta_p),
        }
    }

    pub fn for_field(field: &ExponentField) -> Self {
        Self::new(field.p_minus(), field.p_plus(), field.alpha())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    /// `observed >= expected - tolerance`.
    pub fn at_least(name: &str, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = observed >= expected - tolerance;
        let note = (pass && observed > expected + 0.5).then(|| "observed rate well above the theoretical lower bound".to_string());
        Verdict { name: name.into(), observed, expected, tolerance, pass, note }
    }

    /// `observed <= expected`.
    pub fn at_most(name: &str, observed: f64, expected: f64) -> Self {
        Verdict { name: name.into(), observed, expected, tolerance: 0.0, pass: observed <= expected, note: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub n: usize,
    pub cells: usize,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub errors: ErrorRecord,
    pub eoc_v: Option<f64>,
    pub eoc_q: Option<f64>,
    pub eoc_q_modular: Option<f64>,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub divergence_defect: f64,
    pub stages: Vec<StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub command: String,
    pub environment: Environment,
    pub config: ExperimentConfig,
    pub exponent_label: String,
    pub rates: TheoreticalRates,
    pub levels: Vec<LevelRecord>,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub pass: bool,
}

/// One solved level with everything needed for export.
pub struct LevelSolve {
    pub problem: FeProblem,
    pub solution: DiscreteSolution,
    pub errors: ErrorRecord,
    pub divergence_defect: f64,
}

/// Builds the problem on an `n x n` mesh, solves it and measures the errors.
pub fn solve_level(config: &ExperimentConfig, n: usize, initial: Option<&DiscreteSolution>) -> Result<LevelSolve, ExperimentError> {
    let field = ExponentField::from_spec(&config.exponent)?;
    let pair = manufactured_by_name(&config.manufactured).ok_or_else(|| ExperimentError::Config(format!("unknown manufactured solution {:?}", config.manufactured)))?;
    let space = FeSpacePair::build(Arc::new(Triangulation::unit_square(n)), config.discretization.pair);
    let rhs = RhsFunctional::manufactured(pair.clone(), &space)?;
    let problem = FeProblem::new(space.clone(), field, config.kernel.kappa, config.kernel.mu, rhs, config.discretization.stress_mode)?;
    let guess = initial.map(|s| s.transfer_to(&space));
    let solution = newton_solve(&problem, &config.solver, guess.as_ref())?;
    let divergence_defect = problem.divergence_defect(&solution)?;
    let vel = quasinorm_error(|x| pair.sym_gradient(x), &solution.velocity, problem.localized(), problem.kernel())?;
    let pe = pressure_error(|x| pair.pressure(x), &solution.pressure, problem.localized())?;
    let errors = ErrorRecord {
        h: space.mesh().mesh_size(),
        velocity_quasinorm_error: vel,
        pressure_luxemburg_error: pe.luxemburg,
        modular_pressure_error: pe.modular,
    };
    Ok(LevelSolve { problem, solution, errors, divergence_defect })
}

fn last_pair_eoc(records: &[LevelRecord], f: fn(&ErrorRecord) -> f64) -> Option<f64> {
    let k = records.len();
    if k < 2 {
        return None;
    }
    let (a, b) = (&records[k - 2].errors, &records[k - 1].errors);
    eoc(&[a.h, b.h], &[f(a), f(b)]).ok().map(|v| v[0])
}

/// Solves on every level with warm starts and compares the observed rates of
/// the last two levels against [`TheoreticalRates`].
///
/// A failing level ends the run; the levels solved so far are kept and the
/// error text is stored in `aborted`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport, ExperimentError> {
    config.validate()?;
    if config.mesh.levels.len() < 2 {
        return Err(ExperimentError::Config("a convergence run needs at least two mesh levels".into()));
    }
    let field = ExponentField::from_spec(&config.exponent)?;
    let rates = TheoreticalRates::for_field(&field);
    let mut report = ConvergenceReport {
        schema: SCHEMA.into(),
        command: "converge".into(),
        environment: Environment::current(),
        config: config.clone(),
        exponent_label: field.label().to_string(),
        rates,
        levels: Vec::new(),
        verdicts: Vec::new(),
        aborted: None,
        pass: false,
    };
    let mut previous: Option<DiscreteSolution> = None;
    for (level, &n) in config.mesh.levels.iter().enumerate() {
        let solved = match solve_level(config, n, previous.as_ref()) {
            Ok(s) => s,
            Err(e @ (ExperimentError::Solver(_) | ExperimentError::Norm(_))) => {
                report.aborted = Some(format!("level {level} (n = {n}): {e}"));
                return Ok(report);
            }
            Err(e) => return Err(e),
        };
        let space = solved.problem.space();
        let mut rec = LevelRecord {
            level,
            n,
            cells: space.mesh().num_cells(),
            velocity_dofs: space.num_velocity_dofs(),
            pressure_dofs: space.num_pressure_dofs(),
            errors: solved.errors,
            eoc_v: None,
            eoc_q: None,
            eoc_q_modular: None,
            newton_iterations: solved.solution.newton_iterations,
            final_residual: solved.solution.final_residual,
            divergence_defect: solved.divergence_defect,
            stages: solved.solution.stages.clone(),
        };
        report.levels.push(rec.clone());
        rec.eoc_v = last_pair_eoc(&report.levels, |e| e.velocity_quasinorm_error);
        rec.eoc_q = last_pair_eoc(&report.levels, |e| e.pressure_luxemburg_error);
        rec.eoc_q_modular = last_pair_eoc(&report.levels, |e| e.modular_pressure_error);
        *report.levels.last_mut().expect("just pushed") = rec;
        previous = Some(solved.solution);
    }
    let last = report.levels.last().expect("at least two levels");
    let tol = config.eoc_tolerance;
    let missing = |name: &str, expected: f64| Verdict {
        name: name.into(),
        observed: 0.0,
        expected,
        tolerance: tol,
        pass: false,
        note: Some("rate undefined: nonpositive error".into()),
    };
    report.verdicts.push(match last.eoc_v {
        Some(r) => Verdict::at_least("velocity_quasinorm_eoc", r, rates.velocity, tol),
        None => missing("velocity_quasinorm_eoc", rates.velocity),
    });
    report.verdicts.push(match last.eoc_q {
        Some(r) => Verdict::at_least("pressure_luxemburg_eoc", r, rates.pressure, tol),
        None => missing("pressure_luxemburg_eoc", rates.pressure),
    });
    report.pass = report.verdicts.iter().all(|v| v.pass);
    Ok(report)
}

pub const CSV_HEADER: &str = "level,n,h,err_v_quasinorm,err_q_luxemburg,err_q_modular,eoc_v,eoc_q";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.levels {
        let e = &r.errors;
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e},{},{}",
            r.level,
            r.n,
            e.h,
            e.velocity_quasinorm_error,
            e.pressure_luxemburg_error,
            e.modular_pressure_error,
            opt(r.eoc_v),
            opt(r.eoc_q)
        );
    }
    s
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, ExperimentError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes the CSV and JSON files named in `config.output` below `dir`.
pub fn emit_convergence(report: &ConvergenceReport, dir: &Path) -> Result<(), ExperimentError> {
    write_file(&dir.join(&report.config.output.csv), &convergence_csv(report))?;
    write_file(&dir.join(&report.config.output.json), &to_json(report)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupReportSet {
    pub schema: String,
    pub command: String,
    pub environment: Environment,
    pub config: ExperimentConfig,
    pub scans: Vec<InfSupScan>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

/// Stable pairs: relative spread of `beta_h` over the levels within tolerance.
/// Equal-order control pair: smallest nonzero value decays by `control_decay`.
pub fn run_infsup(config: &ExperimentConfig) -> Result<InfSupReportSet, ExperimentError> {
    config.validate()?;
    let v = &config.verification;
    let mut scans = Vec::new();
    let mut verdicts = Vec::new();
    for kind in [PairKind::Mini, PairKind::TaylorHood] {
        let scan = infsup_scan(kind, &v.levels)?;
        let betas = scan.betas();
        verdicts.push(Verdict::at_most(&format!("{}_beta_variation", pair_name(kind)), relative_spread(&betas), v.infsup_tolerance));
        scans.push(scan);
    }
    let control = infsup_scan(PairKind::EqualOrderP1, &v.levels)?;
    let decay = decay_factor(&control.reduced_betas());
    verdicts.push(Verdict {
        name: "equal_order_p1_reduced_beta_decay".into(),
        observed: decay,
        expected: v.control_decay,
        tolerance: 0.0,
        pass: decay >= v.control_decay,
        note: Some(format!("{} spurious pressure modes on the finest level", control.levels.last().map_or(0, |r| r.spurious_modes))),
    });
    scans.push(control);
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(InfSupReportSet { schema: SCHEMA.into(), command: "infsup".into(), environment: Environment::current(), config: config.clone(), scans, verdicts, pass })
}

pub fn pair_name(kind: PairKind) -> &'static str {
    match kind {
        PairKind::Mini => "mini",
        PairKind::TaylorHood => "taylor_hood",
        PairKind::EqualOrderP1 => "equal_order_p1",
    }
}

/// Largest `|x - mean| / mean` of a positive sequence.
pub fn mean_deviation(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).abs() / mean).fold(0.0, f64::max)
}

pub fn infsup_csv(report: &InfSupReportSet) -> String {
    let mut s = String::from("pair,n,h,pressure_dofs,beta,spurious_modes,reduced_beta\n");
    for scan in &report.scans {
        for r in &scan.levels {
            let _ = writeln!(s, "{},{},{:e},{},{:e},{},{:e}", pair_name(scan.pair), r.n, r.h, r.pressure_dofs, r.beta, r.spurious_modes, r.reduced_beta);
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub command: String,
    pub environment: Environment,
    pub config: ExperimentConfig,
    pub orlicz: OrliczSuite,
    pub assumptions: Vec<AssumptionLevel>,
    pub infsup: InfSupReportSet,
    pub equivalence: Vec<EquivalenceBand>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

/// Orlicz property suite, interpolation assumptions on the MINI pair,
/// inf-sup scan and the norm-equivalence band of the configured exponent.
pub fn run_verification(config: &ExperimentConfig) -> Result<VerificationReport, ExperimentError> {
    config.validate()?;
    let v = &config.verification;
    let seed = config.seed;
    let orlicz = orlicz_suite(&v.suite, seed)?;
    let mut verdicts = vec![
        Verdict::at_least("young_passed", orlicz.young.passed as f64, orlicz.young.total as f64, 0.0),
        Verdict::at_most("biconjugation_error", orlicz.biconjugation_max, 1e-8),
        Verdict::at_most("jacobian_fd_relative_error", orlicz.jacobian.max_relative_error, 1e-5),
        Verdict::at_most("jacobian_asymmetry", orlicz.jacobian.max_asymmetry, 1e-12),
        Verdict::at_least("jacobian_min_eigenvalue", orlicz.jacobian.min_eigenvalue, 0.0, 0.0),
        Verdict::at_least("hammer_min_monotone", orlicz.hammer.min_monotone, 0.0, 0.0),
        Verdict {
            name: "hammer_within_frozen_bands".into(),
            observed: orlicz.hammer.within_frozen as u8 as f64,
            expected: 1.0,
            tolerance: 0.0,
            pass: orlicz.hammer.within_frozen,
            note: None,
        },
    ];

    let assumptions = assumption_scan(&v.levels, v.assumption_samples, seed)?;
    let worst = |f: fn(&AssumptionLevel) -> f64| assumptions.iter().map(f).fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("div_preservation_relative", worst(|a| a.report.max_div_residual), 1e-10));
    verdicts.push(Verdict::at_most("linear_reproduction", worst(|a| a.report.linear_reproduction_error), 1e-12));
    verdicts.push(Verdict::at_most("zero_trace", worst(|a| a.report.boundary_max), 0.0));
    verdicts.push(Verdict::at_most("clement_constants", worst(|a| a.report.constant_error), 1e-13));
    verdicts.push(Verdict::at_most("pi_div_stability_constant", worst(|a| a.report.stability_constant), 20.0));
    verdicts.push(Verdict::at_most("clement_stability_constant", worst(|a| a.report.clement_stability_constant), 10.0));
    let pi_div: Vec<f64> = assumptions.iter().map(|a| a.report.stability_constant).collect();
    let clement: Vec<f64> = assumptions.iter().map(|a| a.report.clement_stability_constant).collect();
    let mut trend = Verdict::at_most("pi_div_stability_trend", mean_deviation(&pi_div), v.stability_tolerance);
    trend.note = Some(format!("relative spread {:.3}", relative_spread(&pi_div)));
    verdicts.push(trend);
    verdicts.push(Verdict::at_most("clement_stability_trend", mean_deviation(&clement), v.stability_tolerance));
    let korn = v.levels.iter().map(|&n| korn_constant(n, 20, seed)).fold(0.0, f64::max);
    verdicts.push(Verdict::at_most("korn_patch_constant", korn, KORN_CONSTANT));

    let infsup = run_infsup(config)?;
    verdicts.extend(infsup.verdicts.iter().cloned());

    let field = ExponentField::from_spec(&config.exponent)?;
    let equivalence = equivalence_bands(&field, &v.levels, v.equivalence_samples, seed)?;
    let stable = bands_stable(&equivalence, v.equivalence_tolerance);
    verdicts.push(Verdict {
        name: "norm_equivalence_band_stable".into(),
        observed: stable as u8 as f64,
        expected: 1.0,
        tolerance: v.equivalence_tolerance,
        pass: stable,
        note: None,
    });
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(VerificationReport {
        schema: SCHEMA.into(),
        command: "verify".into(),
        environment: Environment::current(),
        config: config.clone(),
        orlicz,
        assumptions,
        infsup,
        equivalence,
        verdicts,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub command: String,
    pub environment: Environment,
    pub config: ExperimentConfig,
    pub n: usize,
    pub errors: ErrorRecord,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub divergence_defect: f64,
    pub stages: Vec<StageRecord>,
}

/// Vertex values `x, y, u, v, q` of a solution.
pub fn vertex_fields_csv(solved: &LevelSolve) -> Result<String, ExperimentError> {
    let space = solved.problem.space();
    let mesh = space.mesh();
    let mut at = vec![None; mesh.num_vertices()];
    for (k, cell) in mesh.cells().iter().enumerate() {
        for (i, &v) in cell.iter().enumerate() {
            if at[v].is_none() {
                let mut b = [0.0; 3];
                b[i] = 1.0;
                at[v] = Some((k, b));
            }
        }
    }
    let mut s = String::from("vertex,x,y,u,v,q\n");
    for (v, loc) in at.iter().enumerate() {
        let x = mesh.vertices()[v];
        let (u, q) = match loc {
            Some((k, b)) => {
                let u = solved.solution.velocity.evaluate(*k, b).map_err(|e| ExperimentError::Config(e.to_string()))?;
                let q = solved.solution.pressure.evaluate(*k, b).map_err(|e| ExperimentError::Config(e.to_string()))?;
                (u.value, q.value[0])
            }
            None => ([0.0; 2], 0.0),
        };
        let _ = writeln!(s, "{v},{:e},{:e},{:e},{:e},{:e}", x[0], x[1], u[0], u[1], q);
    }
    Ok(s)
}

/// Single solve on the finest configured level with field export.
pub fn run_solve(config: &ExperimentConfig, dir: &Path) -> Result<SolveReport, ExperimentError> {
    config.validate()?;
    let n = *config.mesh.levels.last().expect("validated");
    let solved = solve_level(config, n, None)?;
    let mut mesh_text = Vec::new();
    solved.problem.space().mesh().write_text(&mut mesh_text)?;
    write_file(&dir.join("mesh.txt"), &String::from_utf8_lossy(&mesh_text))?;
    write_file(&dir.join("fields.csv"), &vertex_fields_csv(&solved)?)?;
    let report = SolveReport {
        schema: SCHEMA.into(),
        command: "solve".into(),
        environment: Environment::current(),
        config: config.clone(),
        n,
        errors: solved.errors,
        newton_iterations: solved.solution.newton_iterations,
        final_residual: solved.solution.final_residual,
        residual_history: solved.solution.residual_history.clone(),
        divergence_defect: solved.divergence_defect,
        stages: solved.solution.stages.clone(),
    };
    write_file(&dir.join(&config.output.json), &to_json(&report)?)?;
    Ok(report)
}
