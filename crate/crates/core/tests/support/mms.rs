//! Forced 1-D problem with the exact solution
//! `u* = 0.1 cos(2πx) cos t`, `m* = 1 + 0.3 cos(2πx) e^{-t}`,
//! `a = V = 1`, `γ = 1.75`, `α = 0.5`, `ε = 0`.

use mfg_core::coupling::CouplingParams;
use mfg_core::driver::{solve_mfg_with, FixedPointConfig, Forcing, MfgProblem, SolveOptions};
use mfg_core::field::{Field, Trajectory};
use mfg_core::grid::TorusGrid;
use mfg_core::hamiltonian::HamiltonianModel;
use std::f64::consts::PI;

pub const GAMMA: f64 = 1.75;
pub const ALPHA: f64 = 0.5;
pub const T_FINAL: f64 = 0.25;
/// Step count for the spatial ladder, small enough that time error is negligible.
pub const SPACE_STEPS: usize = 80_000;
pub const SPACE_LADDER: [usize; 3] = [32, 64, 128];
pub const TIME_N: usize = 256;
pub const TIME_LADDER: [usize; 3] = [400, 800, 1600];

pub fn u_star(t: f64, x: f64) -> f64 {
    0.1 * (2.0 * PI * x).cos() * t.cos()
}

pub fn m_star(t: f64, x: f64) -> f64 {
    1.0 + 0.3 * (2.0 * PI * x).cos() * (-t).exp()
}

/// Residuals of the exact pair in `-u_t + H(Du) - Δu = m^α + f` and
/// `m_t - div(D_pH m) - Δm = s`.
pub fn forcing(grid: TorusGrid<f64>) -> Forcing<f64> {
    let g = GAMMA;
    let hjb = Trajectory::from_fn(grid, |t, x| {
        let (s, c) = (2.0 * PI * x[0]).sin_cos();
        let u_t = -0.1 * c * t.sin();
        let p = -0.2 * PI * s * t.cos();
        let u_xx = -0.4 * PI * PI * c * t.cos();
        let h = (1.0 + p * p).powf(g / 2.0) + 1.0;
        -u_t + h - u_xx - m_star(t, x[0]).powf(ALPHA)
    });
    let fp = Trajectory::from_fn(grid, |t, x| {
        let (s, c) = (2.0 * PI * x[0]).sin_cos();
        let e = (-t).exp();
        let m = m_star(t, x[0]);
        let m_t = -0.3 * c * e;
        let m_x = -0.6 * PI * s * e;
        let m_xx = -1.2 * PI * PI * c * e;
        let p = -0.2 * PI * s * t.cos();
        let p_x = -0.4 * PI * PI * c * t.cos();
        let b = g * (1.0 + p * p).powf((g - 2.0) / 2.0) * p;
        let b_x = g * (1.0 + p * p).powf((g - 4.0) / 2.0) * (1.0 + (g - 1.0) * p * p) * p_x;
        m_t - (b_x * m + b * m_x) - m_xx
    });
    Forcing { hjb, fp }
}

/// Max-in-time sup-norm errors `(u, m)` of the forced solve.
pub fn errors(n: usize, steps: usize) -> (f64, f64) {
    let grid = TorusGrid::new(1, n, T_FINAL, steps).unwrap();
    let model = HamiltonianModel::constant(grid, 1.0, 1.0, GAMMA).unwrap();
    let ut = Field::from_fn(grid, |x| u_star(T_FINAL, x[0]));
    let m0 = Field::from_fn(grid, |x| m_star(0.0, x[0]));
    let m0 = m0.scale(1.0 / m0.integral());
    let prob = MfgProblem::new(grid, model, CouplingParams::new(ALPHA, 0.0).unwrap(), ut, m0).unwrap();
    let forcing = forcing(grid);
    let cfg = FixedPointConfig { omega: 1.0, tol: 1e-12, max_iters: 100, ..FixedPointConfig::default() };
    let sol = solve_mfg_with(&prob, &cfg, SolveOptions { warm_start: None, forcing: Some(&forcing) }).unwrap();
    assert!(sol.converged, "{:?}", sol.residuals);
    let eu = sol.u.sup_distance(&Trajectory::from_fn(grid, |t, x| u_star(t, x[0])));
    let em = sol.m.sup_distance(&Trajectory::from_fn(grid, |t, x| m_star(t, x[0])));
    (eu, em)
}

/// `(u, m)` pairs, one per rung.
pub type Pairs = Vec<(f64, f64)>;

/// Observed orders `log2(e_k / e_{k+1})` of each component over a halving ladder.
pub fn orders(errs: &[(f64, f64)]) -> Pairs {
    errs.windows(2).map(|w| ((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2())).collect()
}

pub fn space_orders() -> (Pairs, Pairs) {
    let errs: Vec<_> = SPACE_LADDER.iter().map(|&n| errors(n, SPACE_STEPS)).collect();
    (orders(&errs), errs)
}

pub fn time_orders() -> (Pairs, Pairs) {
    let errs: Vec<_> = TIME_LADDER.iter().map(|&s| errors(TIME_N, s)).collect();
    (orders(&errs), errs)
}
