//! Run configuration: TOML schema, defaults, validation and problem assembly.
//!
//! Every section and key is optional. An empty file describes the 2-D
//! baseline problem (see the README for the full list of defaults).

use crate::CliError;
use mfg_core::audit::AuditSpec;
use mfg_core::coupling::CouplingParams;
use mfg_core::driver::{FixedPointConfig, MfgProblem};
use mfg_core::estimates::MonitorConfig;
use mfg_core::field::Field;
use mfg_core::grid::TorusGrid;
use mfg_core::hamiltonian::{gamma_window, HamiltonianModel};
use mfg_core::solvers::choose_steps;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Renormalizations of `m0` larger than this are logged as warnings.
pub const M0_QUIET_CORRECTION: f64 = 1e-6;

/// Spatial coefficient given as a constant, a single cosine mode or a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    /// `base + amplitude·cos(2π k·x)`.
    Cosine {
        base: f64,
        amplitude: f64,
        modes: Vec<i64>,
    },
    /// Row-major node values, `n^d` of them.
    Table(Vec<f64>),
}

impl FieldSpec {
    fn cosine(base: f64, amplitude: f64, modes: &[i64]) -> Self {
        FieldSpec::Cosine { base, amplitude, modes: modes.to_vec() }
    }

    /// Samples the spec on `grid`, naming `key` in any error.
    pub fn build(&self, key: &str, grid: TorusGrid<f64>) -> Result<Field<f64>, String> {
        match self {
            FieldSpec::Constant(c) => {
                if !c.is_finite() {
                    return Err(format!("{key}: constant {c} is not finite"));
                }
                Ok(Field::constant(grid, *c))
            }
            FieldSpec::Cosine { base, amplitude, modes } => {
                if modes.len() != grid.dim() {
                    return Err(format!("{key}: cosine modes has {} entries, expected d = {}", modes.len(), grid.dim()));
                }
                if !base.is_finite() || !amplitude.is_finite() {
                    return Err(format!("{key}: cosine base and amplitude must be finite"));
                }
                let k: Vec<f64> = modes.iter().map(|&m| m as f64).collect();
                Ok(Field::from_fn(grid, |x| {
                    let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
                    base + amplitude * (2.0 * PI * phase).cos()
                }))
            }
            FieldSpec::Table(values) => {
                if values.len() != grid.len() {
                    return Err(format!("{key}: table has {} values, expected n^d = {}", values.len(), grid.len()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(format!("{key}: table contains non-finite values"));
                }
                Field::from_values(grid, values.clone()).map_err(|e| format!("{key}: {e}"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Time step; `steps = round(T/dt)`.
    pub dt: Option<f64>,
    /// Alternative to `dt`: choose the step count for this CFL number given
    /// the drift bound `max_drift`.
    pub cfl_target: Option<f64>,
    pub max_drift: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { d: 2, n: 64, t_final: 0.5, dt: None, cfl_target: None, max_drift: 1.0 }
    }
}

/// Time step used when neither `dt` nor `cfl_target` is given.
pub const DEFAULT_DT: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub a: FieldSpec,
    #[serde(rename = "V")]
    pub v: FieldSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { gamma: 1.5, a: FieldSpec::cosine(1.0, 0.2, &[1, 0]), v: FieldSpec::cosine(1.0, 0.2, &[0, 1]) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub alpha: f64,
    pub eps: f64,
    /// Strictly decreasing ε values for `continuation`.
    pub eps_ladder: Vec<f64>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self { alpha: 0.5, eps: 0.05, eps_ladder: vec![0.1, 0.05, 0.025] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(rename = "u_T")]
    pub u_terminal: FieldSpec,
    pub m0: FieldSpec,
    /// Required lower bound `min m0 >= kappa0 > 0`; only positivity when absent.
    pub kappa0: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { u_terminal: FieldSpec::Constant(0.0), m0: FieldSpec::Constant(1.0), kappa0: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub omega: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub cfl: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = FixedPointConfig::<f64>::default();
        Self { omega: d.omega, tol: d.tol, max_iters: d.max_iters, cfl: d.cfl }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    /// Entry-name prefixes to keep in the report; empty keeps everything.
    pub entries: Vec<String>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub betas: Vec<f64>,
    pub pq: Vec<(f64, f64)>,
    pub a3_c: Option<f64>,
    pub gn_p: f64,
    pub audit_seed: u64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        let m = MonitorConfig::default();
        Self {
            entries: Vec::new(),
            c1: m.c1,
            c2: m.c2,
            c3: m.c3,
            betas: m.betas,
            pq: m.pq,
            a3_c: m.a3_c,
            gn_p: m.gn_p,
            audit_seed: m.audit_seed,
        }
    }
}

impl MonitorSection {
    pub fn monitor_config(&self) -> MonitorConfig {
        MonitorConfig {
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            betas: self.betas.clone(),
            pq: self.pq.clone(),
            a3_c: self.a3_c,
            gn_p: self.gn_p,
            audit_seed: self.audit_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), plots: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub coupling: CouplingSection,
    pub data: DataSection,
    pub solver: SolverSection,
    pub monitor: MonitorSection,
    pub audit: AuditSpec,
    pub output: OutputSection,
}

/// A validated configuration with the solver objects built from it.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub config: RunConfig,
    pub problem: MfgProblem<f64>,
    pub fixed_point: FixedPointConfig<f64>,
    pub monitor: MonitorConfig,
    pub audit: AuditSpec,
    /// `|mass(m0) − 1|` before renormalization.
    pub m0_correction: f64,
}

/// Parses TOML text. Parse errors carry line and column.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Assembled, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    assemble(cfg)
}

fn positive(errors: &mut Vec<String>, key: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errors.push(format!("{key}: must be positive and finite, got {v}"));
    }
}

fn build_grid(g: &GridSection, errors: &mut Vec<String>) -> Option<TorusGrid<f64>> {
    let before = errors.len();
    if !(1..=2).contains(&g.d) {
        errors.push(format!("grid.d: the solver supports d = 1 or 2, got {}", g.d));
    }
    if g.n < 4 {
        errors.push(format!("grid.n: must be at least 4, got {}", g.n));
    }
    if !(g.t_final > 0.0) || !g.t_final.is_finite() {
        errors.push(format!("grid.T: must be positive and finite, got {}", g.t_final));
    }
    if let Some(dt) = g.dt {
        positive(errors, "grid.dt", dt);
    }
    if let Some(c) = g.cfl_target {
        positive(errors, "grid.cfl_target", c);
        positive(errors, "grid.max_drift", g.max_drift);
        if g.dt.is_some() {
            errors.push("grid: give either dt or cfl_target, not both".into());
        }
    }
    if errors.len() > before {
        return None;
    }
    let built = match (g.dt, g.cfl_target) {
        (Some(dt), _) => TorusGrid::with_dt(g.d, g.n, g.t_final, dt),
        (None, Some(c)) => TorusGrid::new(g.d, g.n, g.t_final, choose_steps(g.d, g.n, g.t_final, g.max_drift, c)),
        (None, None) => TorusGrid::with_dt(g.d, g.n, g.t_final, DEFAULT_DT),
    };
    match built {
        Ok(grid) => Some(grid),
        Err(e) => {
            errors.push(format!("grid: {e}"));
            None
        }
    }
}

/// Validates every section, collecting all errors, and builds the problem.
pub fn assemble(cfg: RunConfig) -> Result<Assembled, CliError> {
    let mut errors = Vec::new();
    let grid = build_grid(&cfg.grid, &mut errors);

    let m = &cfg.model;
    if let Some(g) = grid {
        let (lo, hi) = gamma_window::<f64>(g.dim());
        if !(m.gamma > lo && m.gamma < hi) {
            errors.push(format!("model.gamma: {} outside the open window ({lo}, {hi}) for d = {}", m.gamma, g.dim()));
        }
    }
    let c = &cfg.coupling;
    positive(&mut errors, "coupling.alpha", c.alpha);
    if !(c.eps >= 0.0) || !c.eps.is_finite() {
        errors.push(format!("coupling.eps: must be >= 0, got {}", c.eps));
    }
    if c.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
        errors.push("coupling.eps_ladder: must be strictly decreasing".into());
    }
    if c.eps_ladder.iter().any(|e| !(*e >= 0.0)) {
        errors.push("coupling.eps_ladder: entries must be >= 0".into());
    }
    let s = &cfg.solver;
    if !(s.omega > 0.0 && s.omega <= 1.0) {
        errors.push(format!("solver.omega: must lie in (0, 1], got {}", s.omega));
    }
    positive(&mut errors, "solver.tol", s.tol);
    if s.max_iters == 0 {
        errors.push("solver.max_iters: must be at least 1".into());
    }
    if !(s.cfl > 0.0 && s.cfl <= 1.0) {
        errors.push(format!("solver.cfl: must lie in (0, 1], got {}", s.cfl));
    }
    let mon = &cfg.monitor;
    for (key, v) in [("monitor.c1", mon.c1), ("monitor.c2", mon.c2), ("monitor.c3", mon.c3), ("monitor.gn_p", mon.gn_p)] {
        positive(&mut errors, key, v);
    }
    if mon.betas.iter().any(|b| !(*b > 1.0)) {
        errors.push("monitor.betas: every beta must exceed 1".into());
    }
    if let Some(g) = grid {
        for (p, q) in &mon.pq {
            if !(*p > g.dim() as f64 / 2.0) || !(*q >= 1.0) || ((1.0 / p + 1.0 / q) - 1.0).abs() > 1e-12 {
                errors.push(format!("monitor.pq: ({p}, {q}) must be conjugate with p > d/2"));
            }
        }
    }
    positive(&mut errors, "audit.radius", cfg.audit.radius);
    if cfg.audit.samples == 0 {
        errors.push("audit.samples: must be at least 1".into());
    }

    let mut fields = None;
    if let Some(g) = grid {
        let built = [
            cfg.model.a.build("model.a", g),
            cfg.model.v.build("model.V", g),
            cfg.data.u_terminal.build("data.u_T", g),
            cfg.data.m0.build("data.m0", g),
        ];
        let mut ok = Vec::new();
        for b in built {
            match b {
                Ok(f) => ok.push(f),
                Err(e) => errors.push(e),
            }
        }
        if ok.len() == 4 {
            let (a, v) = (&ok[0], &ok[1]);
            if !(a.min() > 0.0) {
                errors.push(format!("model.a: must be strictly positive, min = {}", a.min()));
            }
            if !(v.min() > 0.0) {
                errors.push(format!("model.V: must be strictly positive, min = {}", v.min()));
            }
            let m0 = &ok[3];
            let floor = cfg.data.kappa0.unwrap_or(0.0);
            if let Some(k) = cfg.data.kappa0 {
                positive(&mut errors, "data.kappa0", k);
            }
            if !(m0.min() > floor) && !(cfg.data.kappa0.is_some() && m0.min() == floor) {
                errors.push(format!(
                    "data.m0: initial density must satisfy min m0 >= kappa0 > 0, min = {}",
                    m0.min()
                ));
            }
            fields = Some(ok);
        }
    }

    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    let grid = grid.expect("grid built when no errors");
    let mut fields = fields.expect("fields built when no errors").into_iter();
    let (a, v, ut, m0) = (fields.next().unwrap(), fields.next().unwrap(), fields.next().unwrap(), fields.next().unwrap());

    let mass = m0.integral();
    let correction = (mass - 1.0).abs();
    let m0 = if correction > 0.0 {
        if correction <= M0_QUIET_CORRECTION {
            log::info!("data.m0 renormalized from mass {mass:.12} (correction {correction:.3e})");
        } else {
            log::warn!("data.m0 renormalized from mass {mass:.12} (correction {correction:.3e})");
        }
        m0.scale(1.0 / mass)
    } else {
        m0
    };

    let numeric = |e: mfg_core::MfgError| CliError::Validation(vec![e.to_string()]);
    let model = HamiltonianModel::new(a, v, cfg.model.gamma).map_err(numeric)?;
    let coupling = CouplingParams::new(cfg.coupling.alpha, cfg.coupling.eps).map_err(numeric)?;
    let problem = MfgProblem::new(grid, model, coupling, ut, m0).map_err(numeric)?;
    let fixed_point = FixedPointConfig {
        omega: s.omega,
        tol: s.tol,
        max_iters: s.max_iters,
        eps_ladder: cfg.coupling.eps_ladder.clone(),
        cfl: s.cfl,
    };
    let mut audit = cfg.audit.clone();
    audit.alpha.get_or_insert(cfg.coupling.alpha);
    Ok(Assembled {
        monitor: cfg.monitor.monitor_config(),
        config: cfg,
        problem,
        fixed_point,
        audit,
        m0_correction: correction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors_of(text: &str) -> Vec<String> {
        match parse_config(text).and_then(assemble) {
            Err(CliError::Validation(es)) => es,
            other => panic!("expected validation errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_is_the_baseline() {
        let a = assemble(parse_config("").unwrap()).unwrap();
        let g = a.problem.grid;
        assert_eq!((g.dim(), g.n(), g.steps()), (2, 64, 100));
        assert_eq!(g.t_final(), 0.5);
        assert_eq!(a.problem.model.gamma(), 1.5);
        assert_eq!(a.problem.coupling.alpha, 0.5);
        assert_eq!(a.problem.coupling.eps, 0.05);
        assert_eq!(a.fixed_point.omega, 0.5);
        assert_eq!(a.fixed_point.tol, 1e-8);
        assert_eq!(a.problem.model.a().max(), 1.2);
        assert_eq!(a.m0_correction, 0.0);
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_config("[grid]\nn = = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(parse_config("[grid]\nsize = 3\n"), Err(CliError::Parse(_))));
    }

    #[test]
    fn all_errors_collected() {
        let es = errors_of("[grid]\nn = 2\nd = 5\n[solver]\nomega = 2.0\ntol = -1.0\n[coupling]\nalpha = 0.0\n");
        assert!(es.len() >= 4, "{es:?}");
        for key in ["grid.d", "grid.n", "solver.omega", "solver.tol", "coupling.alpha"] {
            assert!(es.iter().any(|e| e.starts_with(key)), "missing {key} in {es:?}");
        }
    }

    #[test]
    fn m0_with_zero_names_the_field() {
        let mut table = vec![1.0; 16];
        table[3] = 0.0;
        table[4] = 2.0;
        let text = format!(
            "[grid]\nd = 1\nn = 16\ndt = 0.01\n[model]\ngamma = 1.75\na = {{ constant = 1.0 }}\nV = {{ constant = 1.0 }}\n[data]\nm0 = {{ table = {table:?} }}\n"
        );
        let es = errors_of(&text);
        assert!(es.iter().any(|e| e.starts_with("data.m0")), "{es:?}");
    }

    #[test]
    fn m0_mass_is_renormalized() {
        let text = "[grid]\nd = 1\nn = 16\ndt = 0.01\n[model]\ngamma = 1.75\na = { constant = 1.0 }\nV = { constant = 1.0 }\n[data]\nm0 = { constant = 1.0001 }\n";
        let a = assemble(parse_config(text).unwrap()).unwrap();
        assert!((a.m0_correction - 1e-4).abs() < 1e-12);
        assert!((a.problem.m0.integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cosine_mode_count_checked() {
        let es = errors_of("[grid]\nd = 1\n[model]\ngamma = 1.75\n");
        assert!(es.iter().any(|e| e.contains("model.a: cosine modes")), "{es:?}");
    }

    #[test]
    fn cfl_target_selects_steps() {
        let a = assemble(parse_config("[grid]\ncfl_target = 0.25\nmax_drift = 0.5\n").unwrap()).unwrap();
        let g = a.problem.grid;
        assert!(g.dt() / g.h() * 2.0 * 0.5 <= 0.25 + 1e-12);
        assert!(matches!(
            parse_config("[grid]\ncfl_target = 0.25\ndt = 0.01\n").and_then(assemble),
            Err(CliError::Validation(_))
        ));
    }
}
