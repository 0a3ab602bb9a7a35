//! One-step integrators for the HJB and Fokker–Planck equations and the
//! full-trajectory sweeps built on them.
//!
//! HJB, backward in time: `u^n = S_dt(u^{n+1} + dt (f^{n+1} - H(x, Du^{n+1})))`
//! where `S_dt` is the exact discrete heat semigroup.
//!
//! Fokker–Planck, forward: `m^{n+1} = (I - dt Δ)^{-1}(m^n - dt div(v m^n) + dt s^n)`
//! with velocity `v = -D_pH(x, Du^n)` and MUSCL/van Leer face fluxes.

use crate::error::{MfgError, Result};
use crate::field::{Field, Trajectory, VectorField};
use crate::grid::TorusGrid;
use crate::hamiltonian::Hamiltonian;
use crate::ops::gradient;
use crate::scalar::Real;
use crate::spectral::SpectralOps;

/// Largest CFL number for which the limited FP update stays nonnegative.
pub const POSITIVITY_CFL: f64 = 0.25;
/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.25;
const MASS_TOL: f64 = 1e-10;

/// Backward sweep data.
#[derive(Clone, Debug)]
pub struct HjbConfig<T> {
    /// Right-hand side `f` at every time level.
    pub source: Trajectory<T>,
    pub terminal: Field<T>,
    pub cfl: T,
}

/// Forward sweep data.
#[derive(Clone, Debug)]
pub struct FpConfig<T> {
    pub initial: Field<T>,
    pub cfl: T,
    /// Optional additive source, used by manufactured-solution tests.
    pub source: Option<Trajectory<T>>,
}

/// `D_pH(x, Du)` on the grid.
pub fn drift_of<T: Real, H: Hamiltonian<T> + ?Sized>(u: &Field<T>, ham: &H) -> VectorField<T> {
    let grid = *u.grid();
    let d = grid.dim();
    let mut comps = vec![vec![T::zero(); grid.len()]; d];
    let du = gradient(u);
    let mut p = vec![T::zero(); d];
    let mut b = vec![T::zero(); d];
    for node in 0..grid.len() {
        du.at(node, &mut p);
        ham.grad_p(node, &p, &mut b);
        for a in 0..d {
            comps[a][node] = b[a];
        }
    }
    VectorField::from_raw(comps.into_iter().map(|c| Field::from_raw(grid, c)).collect())
}

/// Drift at every frame of a value trajectory.
pub fn drift_trajectory<T: Real, H: Hamiltonian<T> + ?Sized>(u: &Trajectory<T>, ham: &H) -> Vec<VectorField<T>> {
    u.frames().iter().map(|f| drift_of(f, ham)).collect()
}

/// `dt/h · Σ_a max_x |b_a(x)|`.
pub fn cfl_number<T: Real>(drift: &VectorField<T>, dt: T) -> T {
    let h = drift.grid().h();
    let s: T = drift
        .components()
        .iter()
        .map(|c| c.values().iter().fold(T::zero(), |m, &v| m.max(v.abs())))
        .sum();
    dt / h * s
}

/// Smallest step count over `[0, T]` keeping the CFL number at or below
/// `cfl` for a drift bounded by `max_drift` in every component.
pub fn choose_steps<T: Real>(d: usize, n: usize, t_final: T, max_drift: T, cfl: T) -> usize {
    let h = T::one() / T::from_usize_lossy(n);
    if t_final <= T::zero() {
        return 0;
    }
    let dt_max = cfl * h / (T::from_usize_lossy(d) * max_drift).max(T::epsilon());
    (t_final / dt_max).ceil().to_usize().unwrap_or(usize::MAX).max(1)
}

fn check_cfl<T: Real>(drift: &VectorField<T>, dt: T, limit: T) -> Result<()> {
    let cfl = cfl_number(drift, dt);
    if !cfl.is_finite() {
        return Err(MfgError::NonFinite("drift".into()));
    }
    if cfl > limit {
        let max_drift = drift
            .components()
            .iter()
            .flat_map(|c| c.values().iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()));
        return Err(MfgError::Cfl { cfl: cfl.as_f64(), limit: limit.as_f64(), max_drift: max_drift.as_f64() });
    }
    Ok(())
}

#[inline]
fn van_leer<T: Real>(back: T, fwd: T) -> T {
    let prod = back * fwd;
    if prod > T::zero() {
        T::lit(2.0) * prod / (back + fwd)
    } else {
        T::zero()
    }
}

/// `div(v m)` with `v = -b`, face velocities averaged from cell values and
/// MUSCL face states taken from the upwind side.
pub fn advection_divergence<T: Real>(m: &Field<T>, drift: &VectorField<T>) -> Field<T> {
    let grid = *m.grid();
    let h = grid.h();
    let half = T::lit(0.5);
    let mv = m.values();
    let mut out = vec![T::zero(); grid.len()];
    for axis in 0..grid.dim() {
        let b = drift.component(axis).values();
        grid.for_each_along(axis, |node, left, right, right2| {
            let v = -(b[node] + b[right]) * half;
            let flux = if v >= T::zero() {
                let slope = van_leer(mv[node] - mv[left], mv[right] - mv[node]);
                v * (mv[node] + half * slope)
            } else {
                let slope = van_leer(mv[right] - mv[node], mv[right2] - mv[right]);
                v * (mv[right] - half * slope)
            };
            let flux = flux / h;
            out[node] = out[node] + flux;
            out[right] = out[right] - flux;
        });
    }
    Field::from_raw(grid, out)
}

/// Reusable stepper holding the FFT plans for one grid.
#[derive(Clone, Debug)]
pub struct TimeStepper<T: Real> {
    spectral: SpectralOps<T>,
    cfl: T,
    /// `exp(-dt λ)` per mode.
    heat_dt: Vec<T>,
    /// `1/(1 + dt λ)` per mode.
    resolvent_dt: Vec<T>,
}

impl<T: Real> TimeStepper<T> {
    pub fn new(grid: TorusGrid<T>, cfl: T) -> Result<Self> {
        if !(cfl > T::zero() && cfl <= T::one()) {
            return Err(MfgError::Config(format!("CFL factor {cfl} outside (0, 1]")));
        }
        if cfl > T::lit(POSITIVITY_CFL) {
            log::warn!("CFL factor {cfl} above {POSITIVITY_CFL}; density positivity is not guaranteed");
        }
        let spectral = SpectralOps::new(grid);
        let dt = grid.dt();
        let heat_dt = spectral.symbol_table(|lam| (-lam * dt).exp());
        let resolvent_dt = spectral.symbol_table(|lam| T::one() / (T::one() + dt * lam));
        Ok(Self { spectral, cfl, heat_dt, resolvent_dt })
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &SpectralOps<T> {
        &self.spectral
    }

    pub fn cfl(&self) -> T {
        self.cfl
    }

    /// One backward step from `u_next` at level `n+1` to level `n`.
    pub fn hjb_step_backward<H: Hamiltonian<T> + ?Sized>(&self, u_next: &Field<T>, f: &Field<T>, ham: &H) -> Result<Field<T>> {
        let grid = *self.grid();
        let dt = grid.dt();
        let d = grid.dim();
        let mut p = vec![T::zero(); d];
        let mut b = vec![T::zero(); d];
        let mut rhs = vec![T::zero(); grid.len()];
        let mut drift_sum = vec![T::zero(); d];
        let du = gradient(u_next);
        for node in 0..grid.len() {
            du.at(node, &mut p);
            let hval = ham.value_grad(node, &p, &mut b);
            for a in 0..d {
                drift_sum[a] = drift_sum[a].max(b[a].abs());
            }
            rhs[node] = u_next[node] + dt * (f[node] - hval);
        }
        let cfl = dt / grid.h() * drift_sum.iter().copied().sum::<T>();
        if !cfl.is_finite() {
            return Err(MfgError::NonFinite("HJB drift".into()));
        }
        if cfl > self.cfl {
            let max_drift = drift_sum.iter().fold(T::zero(), |m, &v| m.max(v));
            return Err(MfgError::Cfl { cfl: cfl.as_f64(), limit: self.cfl.as_f64(), max_drift: max_drift.as_f64() });
        }
        let out = self.spectral.apply_multipliers(&Field::from_raw(grid, rhs), &self.heat_dt);
        if !out.all_finite() {
            return Err(MfgError::NonFinite("HJB step".into()));
        }
        Ok(out.with_grid(*u_next.grid()))
    }

    /// One forward step from `m_prev` with drift `b` and optional source.
    pub fn fp_step_forward(&self, m_prev: &Field<T>, drift: &VectorField<T>, source: Option<&Field<T>>) -> Result<Field<T>> {
        let grid = *self.grid();
        let dt = grid.dt();
        check_cfl(drift, dt, self.cfl)?;
        let floor = T::lit(crate::coupling::CLIP_FLOOR);
        if let Some((node, &v)) = m_prev.values().iter().enumerate().find(|(_, &v)| v < -floor) {
            return Err(MfgError::NegativeDensity { node, value: v.as_f64() });
        }
        let div = advection_divergence(m_prev, drift);
        let mut explicit: Vec<T> = m_prev.values().iter().zip(div.values()).map(|(&m, &q)| m - dt * q).collect();
        let mut expected = m_prev.integral();
        if let Some(s) = source {
            for (e, &sv) in explicit.iter_mut().zip(s.values()) {
                *e = *e + dt * sv;
            }
            expected = expected + dt * s.integral();
        }
        let out = self.spectral.apply_multipliers(&Field::from_raw(grid, explicit), &self.resolvent_dt).with_grid(*m_prev.grid());
        if !out.all_finite() {
            return Err(MfgError::NonFinite("FP step".into()));
        }
        let drift_mass = (out.integral() - expected).abs();
        if drift_mass > T::lit(MASS_TOL) {
            return Err(MfgError::MassDrift(drift_mass.as_f64()));
        }
        Ok(out)
    }

    /// Backward sweep from the terminal data; `u(T) = u_T` exactly.
    pub fn solve_hjb<H: Hamiltonian<T> + ?Sized>(&self, cfg: &HjbConfig<T>, ham: &H) -> Result<Trajectory<T>> {
        let grid = *self.grid();
        if !cfg.source.grid().same_space(&grid) || cfg.source.len() != grid.steps() + 1 {
            return Err(MfgError::GridMismatch("HJB source trajectory".into()));
        }
        let steps = grid.steps();
        let mut frames = vec![cfg.terminal.clone(); steps + 1];
        for n in (0..steps).rev() {
            frames[n] = self.hjb_step_backward(&frames[n + 1], cfg.source.frame(n + 1), ham)?;
        }
        Trajectory::new(grid, frames)
    }

    /// Forward sweep; step `n` uses `drift[n]`.
    pub fn solve_fp(&self, cfg: &FpConfig<T>, drift: &[VectorField<T>]) -> Result<Trajectory<T>> {
        let grid = *self.grid();
        let steps = grid.steps();
        if drift.len() < steps {
            return Err(MfgError::GridMismatch(format!("{} drift frames for {steps} steps", drift.len())));
        }
        let mut frames = Vec::with_capacity(steps + 1);
        frames.push(cfg.initial.clone());
        for n in 0..steps {
            let src = cfg.source.as_ref().map(|s| s.frame(n));
            let next = self.fp_step_forward(&frames[n], &drift[n], src)?;
            frames.push(next);
        }
        Trajectory::new(grid, frames)
    }
}

/// Single HJB step with a freshly planned stepper.
pub fn hjb_step_backward<T: Real, H: Hamiltonian<T> + ?Sized>(u_next: &Field<T>, f: &Field<T>, ham: &H, cfl: T) -> Result<Field<T>> {
    TimeStepper::new(*u_next.grid(), cfl)?.hjb_step_backward(u_next, f, ham)
}

/// Single FP step with a freshly planned stepper.
pub fn fp_step_forward<T: Real>(m_prev: &Field<T>, drift: &VectorField<T>, cfl: T) -> Result<Field<T>> {
    TimeStepper::new(*m_prev.grid(), cfl)?.fp_step_forward(m_prev, drift, None)
}

pub fn solve_hjb<T: Real, H: Hamiltonian<T> + ?Sized>(cfg: &HjbConfig<T>, ham: &H) -> Result<Trajectory<T>> {
    TimeStepper::new(*cfg.source.grid(), cfg.cfl)?.solve_hjb(cfg, ham)
}

pub fn solve_fp<T: Real>(cfg: &FpConfig<T>, drift: &[VectorField<T>]) -> Result<Trajectory<T>> {
    TimeStepper::new(*cfg.initial.grid(), cfg.cfl)?.solve_fp(cfg, drift)
}
