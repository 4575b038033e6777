//! The four subcommands. Each returns the files it wants written plus a
//! success flag; nothing here touches the filesystem.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sps_core::energy::{identity_residuals, NonlinearitySpec};
use sps_core::scaling::{
    check_axioms, classify_nonlinearity, AxiomCheck, AxiomReport, Classification,
};
use sps_core::solvers::{
    deflated_search, deflated_search_from, eigen_family_check, minimize_eigen, DeflatedSearch,
    FamilyReport, SolveReport, RESIDUAL_TOL,
};
use sps_core::{Grid, RadialFn};

use crate::config::{Command, ExperimentConfig, SweepParam, AXIOM_TS};
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const PROFILE_FILE: &str = "profile.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_HEADER: &str = "param,energy,lambda,grad_norm,pohozaev_rel,converged";

/// Relative gap below which a coefficient or eigenvalue is identified with λ₁.
const LAMBDA_1_MATCH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// File name and contents, in the order they are written.
    pub files: Vec<(String, String)>,
    pub success: bool,
    pub summary: Vec<String>,
    pub diagnostics: Vec<String>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub command: String,
    pub config: ExperimentConfig,
    pub report: SolveReport,
    pub family: FamilyReport,
    pub residual_tol: f64,
    pub residuals_ok: bool,
    pub success: bool,
}

pub fn eigen(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let grid = cfg.validate(Command::Eigen)?;
    let report = minimize_eigen(&grid, &cfg.solver)?;
    let lambda = report
        .lambda
        .ok_or_else(|| CliError::Numerical("eigen solve returned no eigenvalue".into()))?;
    let ts = cfg.ts.clone().unwrap_or_default();
    let family = eigen_family_check(&report.solution, lambda, &ts)?;
    let residuals_ok = report.residuals.worst_relative() <= RESIDUAL_TOL;
    let success = report.converged && residuals_ok && family.all_pass;

    let mut summary = vec![format!(
        "lambda_1 = {lambda:.10} (converged: {}, grad {:.3e}, worst residual {:.3e})",
        report.converged,
        report.grad_sup_norm,
        report.residuals.worst_relative()
    )];
    for m in &family.members {
        summary.push(format!(
            "  t = {}: grad {:.3e} (bound {:.3e}), I_s error {:.3e}{}",
            m.t,
            m.grad_sup_norm,
            m.bound,
            m.i_s_rel_error,
            if m.pass { "" } else { "  FAIL" }
        ));
    }
    let diagnostics = report
        .warnings
        .iter()
        .chain(&family.warnings)
        .cloned()
        .collect();
    let profile = report.solution.to_csv();
    let record = EigenRecord {
        command: Command::Eigen.name().into(),
        config: cfg.clone(),
        report,
        family,
        residual_tol: RESIDUAL_TOL,
        residuals_ok,
        success,
    };
    Ok(Output {
        files: vec![
            (REPORT_FILE.into(), to_json(&record)?),
            (PROFILE_FILE.into(), profile),
        ],
        success,
        summary,
        diagnostics,
    })
}

/// Outcome of one nonlinear solve, shared by `solve` and the sweep rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub classification: Classification,
    /// Which solver produced the first report.
    pub dispatch: String,
    /// Computed only on the asymptotically scaled path.
    pub lambda_1: Option<f64>,
    pub reports: Vec<SolveReport>,
    pub distances: Vec<Vec<f64>>,
    pub exhausted: bool,
    pub warnings: Vec<String>,
    pub success: bool,
}

/// `λ` if `f` is exactly `λ |t| t`.
fn pure_eigen(f: &NonlinearitySpec) -> Option<f64> {
    match (f.terms.as_slice(), f.saturating) {
        ([term], None) if term.exponent == 3.0 => Some(term.coef),
        _ => None,
    }
}

pub fn solve_nonlinearity(
    f: &NonlinearitySpec,
    k: usize,
    grid: &Arc<Grid>,
    cfg: &ExperimentConfig,
) -> Result<SolveRecord, CliError> {
    let classification = classify_nonlinearity(f)?;
    let mut warnings = Vec::new();
    let mut lambda_1 = None;
    let (search, mut dispatch) = match classification {
        Classification::Superscaled => (deflated_search(f, k, grid, &cfg.solver)?, "mountain_pass"),
        Classification::AsymptoticallyScaled { lambda } => {
            let first = minimize_eigen(grid, &cfg.solver)?;
            let l1 = first
                .lambda
                .ok_or_else(|| CliError::Numerical("eigen solve returned no eigenvalue".into()))?;
            if !first.converged {
                warnings.push(format!(
                    "lambda_1 = {l1} is from an unconverged eigen solve"
                ));
            }
            lambda_1 = Some(l1);
            if lambda < l1 * (1.0 - LAMBDA_1_MATCH) {
                (deflated_search(f, k, grid, &cfg.solver)?, "minimize_global")
            } else {
                warnings.push(format!(
                    "asymptotically scaled with lambda = {lambda} >= lambda_1 = {l1}: \
                     the scaled saddle-point geometry of this regime is not implemented; \
                     running deflated Newton without a base solution"
                ));
                let search = deflated_search_from(f, k, grid, &cfg.solver, None)?;
                (search, "deflated_newton")
            }
        }
        Classification::Subscaled | Classification::SuperscaledNegative => {
            (deflated_search(f, k, grid, &cfg.solver)?, "minimize_global")
        }
    };
    let DeflatedSearch {
        mut reports,
        exhausted,
        distances,
    } = search;
    if k > 1 && dispatch != "deflated_newton" {
        dispatch = match dispatch {
            "mountain_pass" => "mountain_pass+deflation",
            _ => "minimize_global+deflation",
        };
    }
    if let Some(lambda) = pure_eigen(f) {
        for r in reports.iter_mut().filter(|r| !r.trivial) {
            r.lambda = Some(lambda);
            r.residuals = identity_residuals(&r.solution, f, Some(lambda));
            r.label = Some(match lambda_1 {
                Some(l1) if ((lambda - l1) / l1).abs() <= LAMBDA_1_MATCH => "lambda_1".into(),
                _ => "eigenvalue (unindexed)".into(),
            });
        }
    }
    if exhausted {
        warnings.push(format!(
            "found {} of the {k} requested solutions",
            reports.len()
        ));
    }
    let success = !reports.is_empty() && !exhausted && reports.iter().all(|r| r.converged);
    Ok(SolveRecord {
        classification,
        dispatch: dispatch.into(),
        lambda_1,
        reports,
        distances,
        exhausted,
        warnings,
        success,
    })
}

fn profile_name(i: usize) -> String {
    if i == 0 {
        PROFILE_FILE.into()
    } else {
        format!("profile_{}.csv", i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFile {
    pub command: String,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub record: SolveRecord,
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let grid = cfg.validate(Command::Solve)?;
    let f = cfg
        .nonlinearity
        .as_ref()
        .ok_or_else(|| CliError::Config("solve needs a nonlinearity".into()))?;
    let record = solve_nonlinearity(f, cfg.k, &grid, cfg)?;

    let mut summary = vec![format!(
        "{} -> {}: {} solution(s){}",
        record.classification.name(),
        record.dispatch,
        record.reports.len(),
        if record.exhausted { " (exhausted)" } else { "" }
    )];
    let mut diagnostics = record.warnings.clone();
    let mut files = Vec::new();
    for (i, r) in record.reports.iter().enumerate() {
        summary.push(format!(
            "  {}: energy {:.10e}, grad {:.3e}, pohozaev {:.3e}, converged {}{}",
            profile_name(i),
            r.energy.total,
            r.grad_sup_norm,
            r.residuals.pohozaev_rel,
            r.converged,
            if r.trivial { ", trivial" } else { "" }
        ));
        diagnostics.extend(
            r.warnings
                .iter()
                .map(|w| format!("{}: {w}", profile_name(i))),
        );
        files.push((profile_name(i), r.solution.to_csv()));
    }
    let success = record.success;
    let file = SolveFile {
        command: Command::Solve.name().into(),
        config: cfg.clone(),
        record,
    };
    files.insert(0, (REPORT_FILE.into(), to_json(&file)?));
    Ok(Output {
        files,
        success,
        summary,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomsFile {
    pub command: String,
    pub config: ExperimentConfig,
    pub ts: Vec<f64>,
    pub report: AxiomReport,
    pub success: bool,
}

fn named_checks(r: &AxiomReport) -> [(&'static str, &AxiomCheck); 9] {
    [
        ("composition", &r.composition),
        ("scalar_commutation", &r.scalar_commutation),
        ("endpoints", &r.endpoints),
        ("norm_identity", &r.norm_identity),
        ("norm_bound", &r.norm_bound),
        ("i_s_law", &r.i_s_law),
        ("j_s_law", &r.j_s_law),
        ("coulomb_law", &r.coulomb_law),
        ("power_laws", &r.power_laws),
    ]
}

pub fn axioms(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let grid = cfg.validate(Command::Axioms)?;
    let ts = cfg.ts.clone().unwrap_or_else(|| AXIOM_TS.to_vec());
    let seeds: Vec<RadialFn> = cfg
        .axiom_widths
        .iter()
        .map(|&w| {
            let mut v: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|r| (-(r * r) / (2.0 * w * w)).exp())
                .collect();
            if let Some(last) = v.last_mut() {
                *last = 0.0;
            }
            RadialFn::new(grid.clone(), v)
        })
        .collect::<Result<_, _>>()?;
    let report = check_axioms(&seeds, &ts)?;

    let mut summary = Vec::new();
    let mut diagnostics = report.warnings.clone();
    for (name, check) in named_checks(&report) {
        summary.push(format!(
            "{name}: worst {:.3e} (tolerance {:.0e}) {}",
            check.worst,
            check.tolerance,
            if check.pass { "pass" } else { "FAIL" }
        ));
        for fail in &check.failures {
            diagnostics.push(format!(
                "{name} fails for seed {} (width {}) at t = {:?}: error {:.3e}",
                fail.seed, cfg.axiom_widths[fail.seed], fail.t, fail.error
            ));
        }
    }
    let success = report.all_pass;
    let file = AxiomsFile {
        command: Command::Axioms.name().into(),
        config: cfg.clone(),
        ts,
        report,
        success,
    };
    Ok(Output {
        files: vec![(REPORT_FILE.into(), to_json(&file)?)],
        success,
        summary,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub classification: Option<Classification>,
    pub dispatch: Option<String>,
    pub energy: Option<f64>,
    pub lambda: Option<f64>,
    pub grad_norm: Option<f64>,
    pub pohozaev_rel: Option<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

fn sweep_row(cfg: &ExperimentConfig, grid: &Arc<Grid>, vary: SweepParam, value: f64) -> SweepRow {
    let mut row = SweepRow {
        param: value,
        classification: None,
        dispatch: None,
        energy: None,
        lambda: None,
        grad_norm: None,
        pohozaev_rel: None,
        converged: false,
        warnings: Vec::new(),
        error: None,
    };
    let record = cfg
        .sweep_nonlinearity(vary, value)
        .and_then(|f| solve_nonlinearity(&f, cfg.k, grid, cfg));
    match record {
        Ok(rec) => {
            row.classification = Some(rec.classification);
            row.dispatch = Some(rec.dispatch.clone());
            row.warnings = rec.warnings.clone();
            if let Some(first) = rec.reports.first() {
                row.energy = Some(first.energy.total);
                row.lambda = first.lambda;
                row.grad_norm = Some(first.grad_sup_norm);
                row.pohozaev_rel = Some(first.residuals.pohozaev_rel);
                row.warnings.extend(first.warnings.iter().cloned());
            }
            row.converged = rec.success;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:?},{},{},{},{},{}\n",
            r.param,
            cell(r.energy),
            cell(r.lambda),
            cell(r.grad_norm),
            cell(r.pohozaev_rel),
            r.converged
        ));
    }
    out
}

/// One parsed `sweep.csv` row; empty cells read back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCsvRow {
    pub param: f64,
    pub energy: Option<f64>,
    pub lambda: Option<f64>,
    pub grad_norm: Option<f64>,
    pub pohozaev_rel: Option<f64>,
    pub converged: bool,
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepCsvRow>, CliError> {
    let parse_err = |i: usize, msg: String| CliError::Config(format!("sweep.csv row {i}: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(CliError::Config(format!(
            "sweep.csv must start with \"{SWEEP_HEADER}\""
        )));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(parse_err(
                    i,
                    format!("expected 6 columns, found {}", cols.len()),
                ));
            }
            let opt = |s: &str| -> Result<Option<f64>, CliError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|e| parse_err(i, format!("{s:?}: {e}")))
                }
            };
            Ok(SweepCsvRow {
                param: cols[0]
                    .parse()
                    .map_err(|e| parse_err(i, format!("param: {e}")))?,
                energy: opt(cols[1])?,
                lambda: opt(cols[2])?,
                grad_norm: opt(cols[3])?,
                pohozaev_rel: opt(cols[4])?,
                converged: cols[5]
                    .parse()
                    .map_err(|e| parse_err(i, format!("converged: {e}")))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub command: String,
    pub config: ExperimentConfig,
    pub vary: SweepParam,
    pub rows: Vec<SweepRow>,
    pub success: bool,
}

/// Runs the rows on the current rayon pool and sorts them by parameter.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let grid = cfg.validate(Command::Sweep)?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a sweep block".into()))?;
    let mut rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .map(|&v| sweep_row(cfg, &grid, spec.vary, v))
        .collect();
    rows.sort_by(|a, b| a.param.total_cmp(&b.param));

    let success = rows.iter().all(|r| r.converged);
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{} = {}: {} energy {} converged {}",
                spec.vary.name(),
                r.param,
                r.dispatch.as_deref().unwrap_or("-"),
                r.energy.map_or("-".into(), |e| format!("{e:.6e}")),
                r.converged
            )
        })
        .collect();
    let diagnostics = rows
        .iter()
        .flat_map(|r| {
            let p = r.param;
            r.error
                .iter()
                .chain(&r.warnings)
                .map(move |w| format!("{} = {p}: {w}", spec.vary.name()))
        })
        .collect();
    let csv = sweep_csv(&rows);
    let file = SweepFile {
        command: Command::Sweep.name().into(),
        config: cfg.clone(),
        vary: spec.vary,
        rows,
        success,
    };
    Ok(Output {
        files: vec![
            (REPORT_FILE.into(), to_json(&file)?),
            (SWEEP_FILE.into(), csv),
        ],
        success,
        summary,
        diagnostics,
    })
}
