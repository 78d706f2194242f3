//! Dispatches an [`ExperimentSpec`] and writes its artifacts.
//!
//! Every run writes a result file (CSV or JSON) and a sidecar
//! `<result>.meta.json` holding the full spec, the crate version, blowup
//! counts and acceptance rates. Result files are deterministic for a given
//! spec; the wall-clock timestamp lives only in the sidecar.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::action::{
    discrete_ito_identity_residual, discrete_ito_identity_scale, interacting_action, kinetic_action,
    ActionForm,
};
use crate::analysis::{equivalence_experiment, hbar_sweep};
use crate::classical::{
    action_gap, max_abs, odd_gap_on_lattice, odd_gap_prediction, residual, solve_broken_bvp,
    EquationId, KinkSolution, ProfileKind, BVP_TOLERANCE,
};
use crate::config::{Command, ExperimentSpec, Format};
use crate::error::{Error, Result};
use crate::model::{Branch, Lattice, ModelParams, Path};
use crate::par::{stream_rng, Stream};
use crate::sampler::{sample_wiener_path, tune_proposal};
use crate::transform::{forward_map, inverse_map, numeric_jacobian_det};

/// Environment variable naming the directory for runs without `output_path`.
pub const OUTPUT_DIR_ENV: &str = "PATHLAB_OUTPUT_DIR";

pub const DEFAULT_HBAR_LIST: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
pub const JACOBIAN_TOLERANCE: f64 = 1e-6;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const MIRROR_TOLERANCE: f64 = 1e-12;
/// Smallest L² distance between the shooting solution and the kink for the
/// `bvp` command to count as a distinct solution.
pub const BVP_MIN_DISTANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Passed,
    CriteriaFailed,
    OperationalError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Passed => 0,
            ExitStatus::CriteriaFailed => 2,
            ExitStatus::OperationalError => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub output: PathBuf,
    pub metadata: PathBuf,
    /// Set when the experiment itself failed (no convergence, budget
    /// exceeded, ...); the result file then records the error.
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn status(&self) -> ExitStatus {
        if self.passed {
            ExitStatus::Passed
        } else {
            ExitStatus::CriteriaFailed
        }
    }
}

/// Tabular or structured result of one command.
struct Artifact {
    passed: bool,
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    json: Value,
    blowups: Option<usize>,
    acceptance_rate: Option<f64>,
    proposal_width: Option<f64>,
}

enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

fn is_experiment_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Overflow(_)
            | Error::Singularity { .. }
            | Error::BlowupBudget { .. }
            | Error::Tuning(_)
            | Error::Convergence(_)
            | Error::DegenerateComparison(..)
    )
}

/// Where the result file goes: `output_path` if given, else
/// `<$PATHLAB_OUTPUT_DIR or .>/<command>.<csv|json>`.
pub fn output_location(spec: &ExperimentSpec) -> PathBuf {
    match &spec.output_path {
        Some(p) => PathBuf::from(p),
        None => {
            let dir = std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            dir.join(format!("{}.{}", spec.command.name(), spec.format.extension()))
        }
    }
}

pub fn metadata_location(output: &FsPath) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Runs the experiment described by `spec` and writes its artifacts.
///
/// Returns `Err` only for operational problems (invalid spec, I/O).
/// Experiment failures still produce files and come back as an outcome
/// with `passed == false`.
pub fn execute(spec: &ExperimentSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let result = with_threads(spec.threads, || dispatch(spec))?;
    let (artifact, failure) = match result {
        Ok(a) => (a, None),
        Err(e) if is_experiment_failure(&e) => (failure_artifact(&e), Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let output = output_location(spec);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    match spec.format {
        Format::Csv => write_csv(&output, &artifact)?,
        Format::Json => {
            let doc = json!({
                "command": spec.command.name(),
                "version": env!("CARGO_PKG_VERSION"),
                "spec": spec,
                "passed": artifact.passed,
                "result": artifact.json,
            });
            fs::write(&output, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
        }
    }

    let metadata = metadata_location(&output);
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": spec.command.name(),
        "seed": spec.sampler.seed,
        "spec": spec,
        "proposal_width_used": artifact.proposal_width,
        "n_rejected_blowups": artifact.blowups,
        "acceptance_rate": artifact.acceptance_rate,
        "passed": artifact.passed,
        "failure": failure,
        "output": output.file_name().map(|n| n.to_string_lossy().into_owned()),
        "timestamp_unix": timestamp,
    });
    fs::write(&metadata, serde_json::to_string_pretty(&meta).expect("json") + "\n")?;

    Ok(RunOutcome {
        passed: artifact.passed,
        output,
        metadata,
        failure,
    })
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

fn write_csv(output: &FsPath, artifact: &Artifact) -> Result<()> {
    let mut w = csv::Writer::from_path(output)?;
    w.write_record(&artifact.header)?;
    for row in &artifact.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

fn failure_artifact(e: &Error) -> Artifact {
    Artifact {
        passed: false,
        header: vec!["error"],
        rows: vec![vec![Cell::Text(e.to_string())]],
        json: json!({ "error": e.to_string() }),
        blowups: match e {
            Error::BlowupBudget { rejected, .. } => Some(*rejected),
            _ => None,
        },
        acceptance_rate: None,
        proposal_width: None,
    }
}

fn dispatch(spec: &ExperimentSpec) -> Result<Artifact> {
    let lattice = spec.make_lattice()?;
    let params = spec.model_params()?;
    match spec.command {
        Command::Equivalence => equivalence(spec, &lattice, &params),
        Command::ClassicalLimit => classical_limit(spec, &lattice, &params),
        Command::Bvp => bvp(spec, &lattice, &params),
        Command::Kink => kink(spec, &lattice, &params),
        Command::ItoCheck => ito_check(spec, &lattice, &params),
        Command::JacobianCheck => jacobian_check(spec, &lattice, &params),
    }
}

fn equivalence(spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let mut config = spec.sampler_config();
    if spec.sampler.proposal_width.is_none() {
        config.proposal_width = tune_proposal(lattice, params, spec.branch, &config)?;
    }
    let report = equivalence_experiment(lattice, params, spec.branch, &config, &spec.observables)?;

    let mut rows = Vec::new();
    for row in &report.rows {
        for (k, (m, r)) in row.mapped.iter().zip(&row.metropolis).enumerate() {
            let name = if row.observable.is_vector() {
                format!("{}[{k}]", row.observable)
            } else {
                row.observable.to_string()
            };
            let z = if row.observable.is_vector() {
                crate::analysis::compare(m, r)?.z
            } else {
                row.z
            };
            rows.push(vec![
                Cell::Text(name),
                Cell::Num(m.mean),
                Cell::Num(m.stderr),
                Cell::Num(r.mean),
                Cell::Num(r.stderr),
                Cell::Num(z),
                Cell::Bool(z.abs() < crate::analysis::PASS_THRESHOLD),
            ]);
        }
    }
    Ok(Artifact {
        passed: report.all_pass(),
        header: vec!["observable", "mean_mapped", "stderr_mapped", "mean_metropolis", "stderr_metropolis", "z", "pass"],
        rows,
        json: serde_json::to_value(&report).expect("json"),
        blowups: Some(report.n_rejected_blowups),
        acceptance_rate: Some(report.acceptance_rate),
        proposal_width: Some(report.proposal_width),
    })
}

fn classical_limit(spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let hbars = spec.hbar_list.clone().unwrap_or_else(|| DEFAULT_HBAR_LIST.to_vec());
    let config = spec.sampler_config();
    let report = hbar_sweep(lattice, params, spec.branch, &hbars, &config)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Num(r.hbar),
                Cell::Num(r.rms_dev_from_kink),
                Cell::Num(r.max_el7_residual),
                Cell::Num(r.mean_el9_residual),
                Cell::Int(r.n_blowups),
            ]
        })
        .collect();
    let mut json = serde_json::to_value(&report).expect("json");
    json["mean_paths"] = json!(report.rows.iter().map(|r| r.mean_path.values()).collect::<Vec<_>>());
    json["times"] = json!(lattice.times());
    json["rms_strictly_decreasing"] = json!(report.rms_strictly_decreasing());
    json["final_row_restores_symmetry"] = json!(report.final_row_restores_symmetry());
    Ok(Artifact {
        passed: report.all_pass(),
        header: vec!["hbar", "rms_dev_from_kink", "max_el7_residual", "mean_el9_residual", "n_blowups"],
        rows,
        json,
        blowups: Some(report.rows.iter().map(|r| r.n_blowups).sum()),
        acceptance_rate: None,
        proposal_width: None,
    })
}

fn l2_distance(x: &[f64], y: &[f64], lattice: &Lattice) -> f64 {
    let sum: f64 = x[..x.len() - 1]
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    (sum * lattice.spacing()).sqrt()
}

fn path_rows(lattice: &Lattice, columns: &[&[f64]]) -> Vec<Vec<Cell>> {
    lattice
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            std::iter::once(Cell::Num(t))
                .chain(columns.iter().map(|c| Cell::Num(c[i])))
                .collect()
        })
        .collect()
}

fn bvp(_spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let kink = KinkSolution::odd(*params, Branch::Plus, lattice.half_width()).sample(lattice)?;
    let solution = solve_broken_bvp(lattice, params, &kink)?;
    let el = max_abs(&residual(&solution, EquationId::ElBroken, lattice, params)?);
    let bc = max_abs(&residual(&solution, EquationId::BoundaryCond, lattice, params)?);
    let distance = l2_distance(&solution, &kink, lattice);
    Ok(Artifact {
        passed: el < BVP_TOLERANCE && bc < BVP_TOLERANCE && distance > BVP_MIN_DISTANCE,
        header: vec!["t", "phi", "kink"],
        rows: path_rows(lattice, &[&solution, &kink]),
        json: json!({
            "times": lattice.times(),
            "phi": solution.values(),
            "kink": kink.values(),
            "max_el_residual": el,
            "max_boundary_residual": bc,
            "l2_distance_from_kink": distance,
        }),
        blowups: None,
        acceptance_rate: None,
        proposal_width: None,
    })
}

fn kink(spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let solution = match spec.alpha {
        Some(alpha) => KinkSolution::from_left_value(*params, spec.branch, lattice.half_width(), alpha)?,
        None => KinkSolution::odd(*params, spec.branch, lattice.half_width()),
    };
    let path = solution.sample(lattice)?;
    let flow = match spec.branch {
        Branch::Plus => EquationId::FlowPlus,
        Branch::Minus => EquationId::FlowMinus,
    };
    let flow_residual = max_abs(&residual(&path, flow, lattice, params)?);
    let oriented = match spec.branch {
        Branch::Plus => path.clone(),
        Branch::Minus => -&path,
    };
    let el_broken = residual(&oriented, EquationId::ElBroken, lattice, params)?;
    let mut json = json!({
        "kind": solution.kind,
        "c": solution.c,
        "pole": solution.pole(),
        "times": lattice.times(),
        "phi": path.values(),
        "max_flow_residual": flow_residual,
        "min_el_broken_residual": el_broken.iter().cloned().fold(f64::INFINITY, f64::min),
        "max_el_broken_residual": el_broken.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    });
    if solution.kind == ProfileKind::Tanh && solution.c == 0.0 && spec.branch == Branch::Plus {
        json["action_gap"] = json!(action_gap(&solution, lattice)?);
        json["odd_gap_prediction"] = json!(odd_gap_prediction(path.last(), params));
        json["odd_gap_on_lattice"] = json!(odd_gap_on_lattice(path.last(), params, lattice));
    }
    Ok(Artifact {
        passed: flow_residual.is_finite(),
        header: vec!["t", "phi"],
        rows: path_rows(lattice, &[&path]),
        json,
        blowups: None,
        acceptance_rate: None,
        proposal_width: None,
    })
}

#[derive(Serialize)]
struct Check {
    check: &'static str,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

fn relative(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Exact lattice identities over `n_samples` Brownian paths.
fn ito_check(spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let config = spec.sampler_config();
    let mut rng = stream_rng(config.seed, Stream::Checks, 0);
    let (mut ito, mut mirror, mut exact, mut roundtrip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..config.n_samples {
        let phi = sample_wiener_path(lattice, params, &config, &mut rng);
        let scale = discrete_ito_identity_scale(&phi);
        if scale > 0.0 {
            ito = ito.max(discrete_ito_identity_residual(&phi).abs() / scale);
        }
        let neg = -&phi;
        for form in [ActionForm::ExactLattice, ActionForm::BoundaryForm] {
            let plus = interacting_action(&phi, Branch::Plus, form, lattice, params)?;
            let minus = interacting_action(&neg, Branch::Minus, form, lattice, params)?;
            mirror = mirror.max(relative(plus, minus));
        }
        for branch in [Branch::Plus, Branch::Minus] {
            let chi = forward_map(&phi, branch, lattice, params)?;
            let s = interacting_action(&phi, branch, ActionForm::ExactLattice, lattice, params)?;
            exact = exact.max(relative(s, kinetic_action(&chi, lattice)?));
            let back = inverse_map(&chi, branch, lattice, params)?;
            let err = back
                .iter()
                .zip(phi.iter())
                .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
                .fold(0.0, f64::max);
            roundtrip = roundtrip.max(err);
        }
    }
    let checks = [
        ("ito_identity", ito, IDENTITY_TOLERANCE),
        ("mirror_symmetry", mirror, MIRROR_TOLERANCE),
        ("exact_action_is_kinetic_of_forward_map", exact, IDENTITY_TOLERANCE),
        ("inverse_forward_roundtrip", roundtrip, IDENTITY_TOLERANCE),
    ]
    .map(|(check, err, tol)| Check {
        check,
        max_relative_error: err,
        tolerance: tol,
        pass: err < tol,
    });
    Ok(Artifact {
        passed: checks.iter().all(|c| c.pass),
        header: vec!["check", "max_relative_error", "tolerance", "pass"],
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    Cell::Text(c.check.into()),
                    Cell::Num(c.max_relative_error),
                    Cell::Num(c.tolerance),
                    Cell::Bool(c.pass),
                ]
            })
            .collect(),
        json: json!({ "paths": config.n_samples, "checks": checks }),
        blowups: None,
        acceptance_rate: None,
        proposal_width: None,
    })
}

/// Determinant of `∂χ/∂φ` at one Brownian path.
fn jacobian_check(spec: &ExperimentSpec, lattice: &Lattice, params: &ModelParams) -> Result<Artifact> {
    let config = spec.sampler_config();
    let mut rng = stream_rng(config.seed, Stream::Checks, 1);
    let phi: Path = sample_wiener_path(lattice, params, &config, &mut rng);
    let det = numeric_jacobian_det(&phi, spec.branch, lattice, params)?;
    let pass = (det - 1.0).abs() <= JACOBIAN_TOLERANCE;
    Ok(Artifact {
        passed: pass,
        header: vec!["det", "tolerance_pass"],
        rows: vec![vec![Cell::Num(det), Cell::Bool(pass)]],
        json: json!({ "det": det, "tolerance_pass": pass }),
        blowups: None,
        acceptance_rate: None,
        proposal_width: None,
    })
}
