//! Subcommand implementations. Each writes its artifacts under an output
//! directory and returns a value the binary turns into an exit status.

use crate::config::Assembled;
use crate::traj::{read_trajectory, write_trajectory};
use crate::{plot, CliError, CliResult};
use mfg_core::audit::{audit_assumptions, AuditCertificate};
use mfg_core::driver::{eps_continuation, pde_residuals, solve_mfg, MfgSolution, PdeResiduals};
use mfg_core::estimates::{evaluate_all, EstimateReport};
use mfg_core::exponents::{admissibility, alpha_formula, alpha_max, Admissibility};
use mfg_core::field::Trajectory;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Timestamped run log; kept apart from the deterministic summaries.
struct RunLog {
    path: PathBuf,
    start: Instant,
}

impl RunLog {
    fn open(dir: &Path, command: &str) -> CliResult<Self> {
        let log = Self { path: dir.join("run.log"), start: Instant::now() };
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        std::fs::write(&log.path, format!("{command} started at unix time {stamp}\n")).map_err(|e| CliError::io(&log.path, e))?;
        Ok(log)
    }

    fn line(&self, msg: &str) {
        let elapsed = self.start.elapsed().as_secs_f64();
        if let Ok(mut f) = std::fs::OpenOptions::new().append(true).open(&self.path) {
            let _ = writeln!(f, "[{elapsed:10.3} s] {msg}");
        }
        log::info!("{msg}");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSummary {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub steps: usize,
}

impl GridSummary {
    fn of(traj: &Trajectory<f64>) -> Self {
        let g = traj.grid();
        Self { d: g.dim(), n: g.n(), t_final: g.t_final(), dt: g.dt(), steps: g.steps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub total: usize,
    pub failed: usize,
    pub failed_entries: Vec<String>,
}

impl CheckSummary {
    pub fn of(report: &EstimateReport) -> Self {
        Self {
            total: report.entries.len(),
            failed: report.failed_count(),
            failed_entries: report.failures().iter().map(|e| e.name.clone()).collect(),
        }
    }
}

/// Deterministic summary of one solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub command: String,
    pub grid: GridSummary,
    pub gamma: f64,
    pub alpha: f64,
    pub eps: f64,
    pub omega: f64,
    pub tol: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub residuals: Vec<f64>,
    pub pde_residuals: PdeResiduals<f64>,
    pub mass_max_deviation: f64,
    pub min_m: f64,
    pub m0_mass_correction: f64,
    pub checks: CheckSummary,
}

pub struct SolveOutcome {
    pub solution: MfgSolution<f64>,
    pub report: EstimateReport,
    pub summary: SolveSummary,
}

/// Keeps report entries whose names start with one of `prefixes`.
pub fn filter_entries(report: EstimateReport, prefixes: &[String]) -> EstimateReport {
    if prefixes.is_empty() {
        return report;
    }
    let entries = report.entries.into_iter().filter(|e| prefixes.iter().any(|p| e.name.starts_with(p.as_str()))).collect();
    EstimateReport { entries }
}

fn write_report(dir: &Path, report: &EstimateReport) -> CliResult<()> {
    write_text(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_text(&dir.join("report.csv"), &report.to_csv())
}

fn report_plots(dir: &Path, report: &EstimateReport) -> CliResult<()> {
    for e in report.entries.iter().filter(|e| e.series.len() >= 2) {
        plot::log_series(&e.series, &dir.join(format!("estimate_{}.png", e.name.replace('.', "_"))))?;
    }
    Ok(())
}

/// Solves the configured problem and writes `u.traj`, `m.traj`, `report.json`,
/// `report.csv`, `summary.json` and `run.log` into `dir`.
pub fn solve(asm: &Assembled, dir: &Path, plots: bool) -> CliResult<SolveOutcome> {
    create_dir(dir)?;
    let log = RunLog::open(dir, "solve")?;
    let p = &asm.problem;
    let g = p.grid;
    log.line(&format!("grid d={} n={} T={} dt={} steps={}", g.dim(), g.n(), g.t_final(), g.dt(), g.steps()));
    let solution = solve_mfg(p, &asm.fixed_point)?;
    log.line(&format!(
        "picard: converged={} iterations={} residual={:e}",
        solution.converged,
        solution.iterations,
        solution.final_residual().unwrap_or(f64::NAN)
    ));
    if !solution.converged {
        log::warn!("fixed point did not converge within {} iterations", asm.fixed_point.max_iters);
    }
    let pde = pde_residuals(p, &solution, asm.fixed_point.cfl, None)?;
    let report = evaluate_all(&solution.u, &solution.m, &p.model, &p.coupling, &asm.monitor)?;
    let report = filter_entries(report, &asm.config.monitor.entries);
    log.line(&format!("estimates: {} entries, {} failed", report.entries.len(), report.failed_count()));

    write_trajectory(&dir.join("u.traj"), &solution.u)?;
    write_trajectory(&dir.join("m.traj"), &solution.m)?;
    write_report(dir, &report)?;
    let mass_max_deviation = solution.m.frames().iter().map(|f| (f.integral() - 1.0).abs()).fold(0.0, f64::max);
    let summary = SolveSummary {
        command: "solve".into(),
        grid: GridSummary::of(&solution.u),
        gamma: p.model.gamma(),
        alpha: p.coupling.alpha,
        eps: p.coupling.eps,
        omega: asm.fixed_point.omega,
        tol: asm.fixed_point.tol,
        converged: solution.converged,
        iterations: solution.iterations,
        final_residual: solution.final_residual(),
        residuals: solution.residuals.clone(),
        pde_residuals: pde,
        mass_max_deviation,
        min_m: solution.m.min(),
        m0_mass_correction: asm.m0_correction,
        checks: CheckSummary::of(&report),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    if plots || asm.config.output.plots {
        plot::trajectory_image(&solution.u, 0, &dir.join("u.png"))?;
        plot::trajectory_image(&solution.m, g.steps(), &dir.join("m.png"))?;
        plot::log_series(&solution.residuals, &dir.join("residuals.png"))?;
        report_plots(dir, &report)?;
    }
    log.line("done");
    Ok(SolveOutcome { solution, report, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RungSummary {
    pub eps: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub delta_u: Option<f64>,
    pub delta_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuationSummary {
    pub command: String,
    pub grid: GridSummary,
    pub rungs: Vec<RungSummary>,
    /// Soft check: the last `m` delta does not exceed the first.
    pub deltas_shrink: bool,
    pub error: Option<String>,
}

/// Runs the ε-ladder and writes `ladder.csv`, `summary.json` and `run.log`.
/// Divergence or a non-finite delta is a numerical failure, reported after
/// the partial results are on disk.
pub fn continuation(asm: &Assembled, dir: &Path) -> CliResult<ContinuationSummary> {
    create_dir(dir)?;
    let log = RunLog::open(dir, "continuation")?;
    let result = eps_continuation(&asm.problem, &asm.fixed_point)?;
    let rungs: Vec<RungSummary> = result
        .rungs
        .iter()
        .map(|r| RungSummary {
            eps: r.eps,
            converged: r.solution.converged,
            iterations: r.solution.iterations,
            final_residual: r.solution.final_residual(),
            delta_u: r.delta_u,
            delta_m: r.delta_m,
        })
        .collect();
    for r in &rungs {
        log.line(&format!("eps={} iterations={} delta_m={:?}", r.eps, r.iterations, r.delta_m));
    }
    let mut csv = String::from("eps,converged,iterations,final_residual,delta_u,delta_m\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &rungs {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.eps, r.converged, r.iterations, opt(r.final_residual), opt(r.delta_u), opt(r.delta_m));
    }
    write_text(&dir.join("ladder.csv"), &csv)?;
    let grid = GridSummary::of(&Trajectory::constant_in_time(asm.problem.grid, &asm.problem.m0));
    let summary = ContinuationSummary {
        command: "continuation".into(),
        grid,
        deltas_shrink: result.deltas_shrink(),
        error: result.error.as_ref().map(|e| e.to_string()),
        rungs,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    if !summary.deltas_shrink {
        log.line("warning: continuation deltas did not shrink");
    }
    log.line("done");
    if let Some(e) = result.error {
        return Err(e.into());
    }
    if summary.rungs.iter().any(|r| r.delta_m.is_some_and(|d| !d.is_finite()) || r.delta_u.is_some_and(|d| !d.is_finite())) {
        return Err(CliError::Numerical(mfg_core::MfgError::NonFinite("continuation delta".into())));
    }
    Ok(summary)
}

/// Audits the configured Hamiltonian and writes `audit.json` and `audit.csv`.
pub fn audit(asm: &Assembled, dir: &Path) -> CliResult<Vec<AuditCertificate>> {
    create_dir(dir)?;
    let log = RunLog::open(dir, "audit")?;
    let certs = audit_assumptions(&asm.problem.model, &asm.audit);
    let mut csv = String::from("assumption,verdict,residual,samples\n");
    for c in &certs {
        let verdict = if c.passed() { "pass" } else { "fail" };
        let _ = writeln!(csv, "{},{},{:e},\"{}\"", c.assumption, verdict, c.residual, c.samples);
        log.line(&format!("{}: {verdict}", c.assumption));
    }
    write_text(&dir.join("audit.csv"), &csv)?;
    write_json(&dir.join("audit.json"), &certs)?;
    log.line("done");
    Ok(certs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentRow {
    pub gamma: f64,
    pub d: usize,
    pub alpha_formula: f64,
    pub alpha_max: f64,
}

/// `α_max` table over the `(γ, d)` grid, computed in parallel.
pub fn exponent_table(gammas: &[f64], dims: &[usize], budget: u32) -> CliResult<Vec<ExponentRow>> {
    let cells: Vec<(f64, usize)> = dims.iter().flat_map(|&d| gammas.iter().map(move |&g| (g, d))).collect();
    cells
        .par_iter()
        .map(|&(gamma, d)| {
            let am = alpha_max(gamma, d, budget)?;
            Ok(ExponentRow { gamma, d, alpha_formula: alpha_formula(gamma, d), alpha_max: am })
        })
        .collect()
}

pub fn exponent_csv(rows: &[ExponentRow]) -> String {
    let mut out = String::from("gamma,d,alpha_formula,alpha_max\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6},{:.6}", r.gamma, r.d, r.alpha_formula, r.alpha_max);
    }
    out
}

/// Admissibility of one `α` at every `(γ, d)`, in parallel.
pub fn exponent_witnesses(gammas: &[f64], dims: &[usize], alpha: f64, budget: u32) -> CliResult<Vec<Admissibility>> {
    let cells: Vec<(f64, usize)> = dims.iter().flat_map(|&d| gammas.iter().map(move |&g| (g, d))).collect();
    cells.par_iter().map(|&(g, d)| admissibility(g, d, alpha, budget).map_err(CliError::from)).collect()
}

/// Writes `alpha_max.csv` and, when `alpha` is given, one witness JSON per cell.
pub fn exponents(
    gammas: &[f64],
    dims: &[usize],
    alpha: Option<f64>,
    budget: u32,
    dir: Option<&Path>,
) -> CliResult<(Vec<ExponentRow>, Vec<Admissibility>)> {
    let rows = exponent_table(gammas, dims, budget)?;
    let adm = match alpha {
        Some(a) => exponent_witnesses(gammas, dims, a, budget)?,
        None => Vec::new(),
    };
    if let Some(dir) = dir {
        create_dir(dir)?;
        write_text(&dir.join("alpha_max.csv"), &exponent_csv(&rows))?;
        for a in &adm {
            write_json(&dir.join(format!("witness_g{}_d{}.json", a.gamma, a.d)), a)?;
        }
    }
    Ok((rows, adm))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub command: String,
    pub grid: GridSummary,
    pub checks: CheckSummary,
}

/// Re-evaluates the estimate suite on stored trajectories. The model and
/// coupling come from the config, rebuilt on the trajectory grid.
pub fn monitor(asm: &Assembled, u_path: &Path, m_path: &Path, dir: &Path) -> CliResult<(EstimateReport, MonitorSummary)> {
    let u = read_trajectory(u_path)?;
    let m = read_trajectory(m_path)?;
    let (gu, gm) = (u.grid(), m.grid());
    if gu != gm {
        return Err(CliError::Format(format!(
            "u and m grids differ: {} vs {}",
            u_path.display(),
            m_path.display()
        )));
    }
    let pg = asm.problem.grid;
    if !gu.same_space(&pg) {
        return Err(CliError::Validation(vec![format!(
            "grid: trajectories have d={} n={}, config has d={} n={}",
            gu.dim(),
            gu.n(),
            pg.dim(),
            pg.n()
        )]));
    }
    create_dir(dir)?;
    let log = RunLog::open(dir, "monitor")?;
    let p = &asm.problem;
    let report = evaluate_all(&u, &m, &p.model, &p.coupling, &asm.monitor)?;
    let report = filter_entries(report, &asm.config.monitor.entries);
    write_report(dir, &report)?;
    let summary = MonitorSummary { command: "monitor".into(), grid: GridSummary::of(&u), checks: CheckSummary::of(&report) };
    write_json(&dir.join("summary.json"), &summary)?;
    log.line(&format!("checks failed: {} of {}", summary.checks.failed, summary.checks.total));
    Ok((report, summary))
}
