//! Damped Picard iteration for the coupled system and the ε-continuation.

use crate::coupling::{CouplingParams, Mollifier};
use crate::error::{MfgError, Result};
use crate::field::{Field, Trajectory};
use crate::grid::TorusGrid;
use crate::hamiltonian::HamiltonianModel;
use crate::scalar::Real;
use crate::solvers::{drift_trajectory, FpConfig, HjbConfig, TimeStepper, DEFAULT_CFL};
use serde::{Deserialize, Serialize};

const MASS_TOL: f64 = 1e-10;

/// Data of the regularized initial-terminal value problem.
#[derive(Clone, Debug)]
pub struct MfgProblem<T: Real> {
    pub grid: TorusGrid<T>,
    pub model: HamiltonianModel<T>,
    pub coupling: CouplingParams<T>,
    pub u_terminal: Field<T>,
    pub m0: Field<T>,
}

impl<T: Real> MfgProblem<T> {
    pub fn new(
        grid: TorusGrid<T>,
        model: HamiltonianModel<T>,
        coupling: CouplingParams<T>,
        u_terminal: Field<T>,
        m0: Field<T>,
    ) -> Result<Self> {
        for (name, g) in [("a", model.a().grid()), ("u_T", u_terminal.grid()), ("m0", m0.grid())] {
            if !g.same_space(&grid) {
                return Err(MfgError::GridMismatch(format!("{name} is not on the problem grid")));
            }
        }
        if !(m0.min() > T::zero()) {
            return Err(MfgError::InvalidModel(format!("m0 must be strictly positive, min = {}", m0.min())));
        }
        let mass = m0.integral();
        if (mass - T::one()).abs() > T::lit(MASS_TOL) {
            return Err(MfgError::InvalidModel(format!("m0 has mass {mass}, expected 1")));
        }
        if !model.is_normalized() {
            log::warn!("min(a + V) < 1: the normalization H >= 1 does not hold");
        }
        Ok(Self { grid, model, coupling, u_terminal, m0 })
    }

    pub fn with_eps(&self, eps: T) -> Result<Self> {
        let mut out = self.clone();
        out.coupling = self.coupling.with_eps(eps)?;
        Ok(out)
    }
}

/// Picard parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig<T> {
    pub omega: T,
    pub tol: T,
    pub max_iters: usize,
    pub eps_ladder: Vec<T>,
    pub cfl: T,
}

impl<T: Real> Default for FixedPointConfig<T> {
    fn default() -> Self {
        Self { omega: T::lit(0.5), tol: T::lit(1e-8), max_iters: 200, eps_ladder: Vec::new(), cfl: T::lit(DEFAULT_CFL) }
    }
}

impl<T: Real> FixedPointConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > T::zero() && self.omega <= T::one()) {
            return Err(MfgError::Config(format!("damping {} outside (0, 1]", self.omega)));
        }
        if !(self.tol > T::zero()) {
            return Err(MfgError::Config(format!("tolerance {} must be positive", self.tol)));
        }
        if self.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(MfgError::Config("eps ladder must be strictly decreasing".into()));
        }
        if self.eps_ladder.last().is_some_and(|&e| e < T::zero()) {
            return Err(MfgError::Config("eps ladder entries must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Extra source terms added to the HJB and FP right-hand sides.
#[derive(Clone, Debug)]
pub struct Forcing<T> {
    pub hjb: Trajectory<T>,
    pub fp: Trajectory<T>,
}

/// Optional inputs of [`solve_mfg_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions<'a, T> {
    /// Initial density iterate; defaults to `m0` held constant in time.
    pub warm_start: Option<&'a Trajectory<T>>,
    pub forcing: Option<&'a Forcing<T>>,
}

#[derive(Clone, Debug)]
pub struct MfgSolution<T> {
    pub u: Trajectory<T>,
    pub m: Trajectory<T>,
    pub iterations: usize,
    /// `sup |m_new - m^k|` per iteration.
    pub residuals: Vec<T>,
    pub converged: bool,
}

impl<T: Real> MfgSolution<T> {
    pub fn final_residual(&self) -> Option<T> {
        self.residuals.last().copied()
    }
}

pub fn solve_mfg<T: Real>(problem: &MfgProblem<T>, cfg: &FixedPointConfig<T>) -> Result<MfgSolution<T>> {
    solve_mfg_with(problem, cfg, SolveOptions::default())
}

fn hjb_source<T: Real>(
    moll: &Mollifier<T>,
    params: &CouplingParams<T>,
    m: &Trajectory<T>,
    forcing: Option<&Forcing<T>>,
) -> Result<Trajectory<T>> {
    let mut frames = m.frames().iter().map(|f| moll.g_eps(params, f)).collect::<Result<Vec<_>>>()?;
    if let Some(fc) = forcing {
        for (f, extra) in frames.iter_mut().zip(fc.hjb.frames()) {
            *f = f.add(extra);
        }
    }
    Trajectory::new(*m.grid(), frames)
}

pub fn solve_mfg_with<T: Real>(
    problem: &MfgProblem<T>,
    cfg: &FixedPointConfig<T>,
    opts: SolveOptions<'_, T>,
) -> Result<MfgSolution<T>> {
    cfg.validate()?;
    let grid = problem.grid;
    let stepper = TimeStepper::new(grid, cfg.cfl)?;
    let moll = Mollifier::new(grid, problem.coupling.eps)?;
    let mut m = match opts.warm_start {
        Some(w) if w.grid().same_space(&grid) && w.len() == grid.steps() + 1 => w.clone(),
        Some(_) => return Err(MfgError::GridMismatch("warm start trajectory".into())),
        None => Trajectory::constant_in_time(grid, &problem.m0),
    };
    let fp_cfg = FpConfig { initial: problem.m0.clone(), cfl: cfg.cfl, source: opts.forcing.map(|f| f.fp.clone()) };
    let mut residuals = Vec::new();
    for iter in 1..=cfg.max_iters.max(1) {
        let source = hjb_source(&moll, &problem.coupling, &m, opts.forcing)?;
        let hjb_cfg = HjbConfig { source, terminal: problem.u_terminal.clone(), cfl: cfg.cfl };
        let u = stepper.solve_hjb(&hjb_cfg, &problem.model)?;
        let drift = drift_trajectory(&u, &problem.model);
        let m_new = stepper.solve_fp(&fp_cfg, &drift)?;
        let res = m_new.sup_distance(&m);
        if !res.is_finite() || !u.all_finite() {
            return Err(MfgError::NonFinite(format!("Picard iteration {iter}")));
        }
        residuals.push(res);
        log::debug!("picard iteration {iter}: residual {:e}", res.as_f64());
        if res <= cfg.tol {
            return Ok(MfgSolution { u, m: m_new, iterations: iter, residuals, converged: true });
        }
        if iter == cfg.max_iters.max(1) {
            return Ok(MfgSolution { u, m: m_new, iterations: iter, residuals, converged: false });
        }
        let omega = cfg.omega;
        let blended = m
            .frames()
            .iter()
            .zip(m_new.frames())
            .map(|(old, new)| old.zip_map(new, |a, b| (T::one() - omega) * a + omega * b))
            .collect();
        m = Trajectory::new(grid, blended)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Max-norm residuals of the discrete HJB and FP equations, divided by `dt`,
/// evaluated on a candidate solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeResiduals<T> {
    pub hjb: T,
    pub fp: T,
}

pub fn pde_residuals<T: Real>(
    problem: &MfgProblem<T>,
    sol: &MfgSolution<T>,
    cfl: T,
    forcing: Option<&Forcing<T>>,
) -> Result<PdeResiduals<T>> {
    let grid = problem.grid;
    let dt = grid.dt();
    let stepper = TimeStepper::new(grid, cfl)?;
    let moll = Mollifier::new(grid, problem.coupling.eps)?;
    let source = hjb_source(&moll, &problem.coupling, &sol.m, forcing)?;
    let drift = drift_trajectory(&sol.u, &problem.model);
    let mut hjb = T::zero();
    let mut fp = T::zero();
    for n in 0..grid.steps() {
        let u_pred = stepper.hjb_step_backward(sol.u.frame(n + 1), source.frame(n + 1), &problem.model)?;
        hjb = hjb.max(u_pred.sup_distance(sol.u.frame(n)) / dt);
        let src = forcing.map(|f| f.fp.frame(n));
        let m_pred = stepper.fp_step_forward(sol.m.frame(n), &drift[n], src)?;
        fp = fp.max(m_pred.sup_distance(sol.m.frame(n + 1)) / dt);
    }
    Ok(PdeResiduals { hjb, fp })
}

/// One rung of the ε-continuation.
#[derive(Clone, Debug)]
pub struct ContinuationRung<T> {
    pub eps: T,
    pub solution: MfgSolution<T>,
    /// Sup-norm changes of `u` and `m` from the previous rung.
    pub delta_u: Option<T>,
    pub delta_m: Option<T>,
}

#[derive(Clone, Debug)]
pub struct ContinuationResult<T> {
    pub rungs: Vec<ContinuationRung<T>>,
    /// Error that stopped the ladder early, if any.
    pub error: Option<MfgError>,
}

impl<T: Real> ContinuationResult<T> {
    /// Whether the last `m` delta does not exceed the first.
    pub fn deltas_shrink(&self) -> bool {
        let deltas: Vec<T> = self.rungs.iter().filter_map(|r| r.delta_m).collect();
        match (deltas.first(), deltas.last()) {
            (Some(&a), Some(&b)) => b <= a,
            _ => true,
        }
    }
}

/// Solves along `cfg.eps_ladder`, warm-starting each rung from the previous
/// density. An empty ladder uses the problem's own ε.
pub fn eps_continuation<T: Real>(problem: &MfgProblem<T>, cfg: &FixedPointConfig<T>) -> Result<ContinuationResult<T>> {
    cfg.validate()?;
    let ladder = if cfg.eps_ladder.is_empty() { vec![problem.coupling.eps] } else { cfg.eps_ladder.clone() };
    let mut rungs: Vec<ContinuationRung<T>> = Vec::new();
    for &eps in &ladder {
        let prob = problem.with_eps(eps)?;
        let prev = rungs.last().map(|r| &r.solution);
        let opts = SolveOptions { warm_start: prev.map(|s| &s.m), forcing: None };
        match solve_mfg_with(&prob, cfg, opts) {
            Ok(solution) => {
                let delta_u = prev.map(|p| p.u.sup_distance(&solution.u));
                let delta_m = prev.map(|p| p.m.sup_distance(&solution.m));
                log::info!("eps {eps}: {} iterations, delta_m {:?}", solution.iterations, delta_m.map(|d| d.as_f64()));
                rungs.push(ContinuationRung { eps, solution, delta_u, delta_m });
            }
            Err(e) => return Ok(ContinuationResult { rungs, error: Some(e) }),
        }
    }
    let out = ContinuationResult { rungs, error: None };
    if !out.deltas_shrink() {
        log::warn!("continuation deltas did not shrink along the ladder");
    }
    Ok(out)
}
