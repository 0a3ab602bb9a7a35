//! Model Hamiltonian `H(x,p) = a(x)(1+|p|²)^{γ/2} + V(x)` and its Legendre objects.

use crate::error::{MfgError, Result};
use crate::field::Field;
use crate::scalar::Real;

/// Hamiltonian interface used by the solvers. `node` is a flat grid index.
pub trait Hamiltonian<T: Real> {
    fn dim(&self) -> usize;

    fn value(&self, node: usize, p: &[T]) -> T;

    /// `D_pH(x,p)` written into `out[..d]`.
    fn grad_p(&self, node: usize, p: &[T], out: &mut [T]);

    /// `H(x,p)` with `D_pH(x,p)` written into `out`.
    fn value_grad(&self, node: usize, p: &[T], out: &mut [T]) -> T {
        self.grad_p(node, p, out);
        self.value(node, p)
    }
}

/// `H ≡ 0`. Reduces the HJB step to pure diffusion plus source, which is
/// what the spectral oracle tests compare against.
#[derive(Clone, Copy, Debug)]
pub struct ZeroHamiltonian {
    pub dim: usize,
}

impl<T: Real> Hamiltonian<T> for ZeroHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _node: usize, _p: &[T]) -> T {
        T::zero()
    }

    fn grad_p(&self, _node: usize, _p: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
}

/// Isotropic subquadratic model Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel<T> {
    a: Field<T>,
    v: Field<T>,
    gamma: T,
}

/// Open growth window `(1 + 1/(d+1), 2)` for `γ`.
pub fn gamma_window<T: Real>(d: usize) -> (T, T) {
    (T::one() + T::one() / T::from_usize_lossy(d + 1), T::lit(2.0))
}

impl<T: Real> HamiltonianModel<T> {
    pub fn new(a: Field<T>, v: Field<T>, gamma: T) -> Result<Self> {
        if !a.grid().same_space(v.grid()) {
            return Err(MfgError::GridMismatch("a and V on different grids".into()));
        }
        if !(a.min() > T::zero()) {
            return Err(MfgError::InvalidModel(format!("min a = {} must be positive", a.min())));
        }
        if !(v.min() > T::zero()) {
            return Err(MfgError::InvalidModel(format!("min V = {} must be positive", v.min())));
        }
        let d = a.grid().dim();
        let (lo, hi) = gamma_window::<T>(d);
        if !(gamma > lo && gamma < hi) {
            return Err(MfgError::InvalidModel(format!(
                "gamma = {gamma} outside the growth window ({lo}, {hi}) for d = {d}"
            )));
        }
        Ok(Self { a, v, gamma })
    }

    /// Model with constant coefficients.
    pub fn constant(grid: crate::grid::TorusGrid<T>, a: T, v: T, gamma: T) -> Result<Self> {
        Self::new(Field::constant(grid, a), Field::constant(grid, v), gamma)
    }

    pub fn a(&self) -> &Field<T> {
        &self.a
    }

    pub fn v(&self) -> &Field<T> {
        &self.v
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.a.grid().dim()
    }

    /// Whether `H ≥ 1` holds everywhere, i.e. `min (a + V) ≥ 1`.
    pub fn is_normalized(&self) -> bool {
        self.a.add(&self.v).min() >= T::one()
    }

    /// `max_x H(x, 0) = max (a + V)`.
    pub fn max_h_at_zero(&self) -> T {
        self.a.add(&self.v).max()
    }

    /// `max_x L(x, 0) = -min_x (a + V)`; `H(x,·)` is minimized at `p = 0`.
    pub fn max_l_at_zero(&self) -> T {
        -self.a.add(&self.v).min()
    }

    #[inline]
    fn base(p: &[T]) -> T {
        T::one() + p.iter().map(|&x| x * x).sum::<T>()
    }

    pub fn h_eval(&self, node: usize, p: &[T]) -> T {
        self.a[node] * Self::base(p).powf(self.gamma / T::lit(2.0)) + self.v[node]
    }

    /// `D_pH = aγ(1+|p|²)^{(γ-2)/2} p`.
    pub fn dp_h(&self, node: usize, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); p.len()];
        self.dp_h_into(node, p, &mut out);
        out
    }

    #[inline]
    pub fn dp_h_into(&self, node: usize, p: &[T], out: &mut [T]) {
        let g = self.gamma;
        let coef = self.a[node] * g * Self::base(p).powf((g - T::lit(2.0)) / T::lit(2.0));
        for (o, &pi) in out.iter_mut().zip(p) {
            *o = coef * pi;
        }
    }

    /// Hessian in `p`, row-major `d×d`.
    pub fn dpp_h(&self, node: usize, p: &[T]) -> Vec<T> {
        let d = p.len();
        let g = self.gamma;
        let two = T::lit(2.0);
        let b = Self::base(p);
        let diag = self.a[node] * g * b.powf((g - two) / two);
        let off = self.a[node] * g * (g - two) * b.powf((g - T::lit(4.0)) / two);
        let mut out = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = off * p[i] * p[j] + if i == j { diag } else { T::zero() };
            }
        }
        out
    }

    /// Closed form `a((γ-1)|p|² - 1)(1+|p|²)^{(γ-2)/2} - V`.
    pub fn l_hat(&self, node: usize, p: &[T]) -> T {
        let g = self.gamma;
        let p2 = p.iter().map(|&x| x * x).sum::<T>();
        self.a[node] * ((g - T::one()) * p2 - T::one()) * (T::one() + p2).powf((g - T::lit(2.0)) / T::lit(2.0))
            - self.v[node]
    }

    /// `|D_pH|` as a function of `s = |p|`.
    fn radial_slope(&self, node: usize, s: T) -> T {
        let g = self.gamma;
        self.a[node] * g * (T::one() + s * s).powf((g - T::lit(2.0)) / T::lit(2.0)) * s
    }

    /// Legendre transform `L(x,v) = sup_p (-p·v - H(x,p))`.
    ///
    /// The maximizer lies on the ray `p = -s v/|v|`; the concave radial
    /// objective `s|v| - a(1+s²)^{γ/2} - V` is maximized by bisection on its
    /// derivative.
    pub fn legendre_l(&self, node: usize, v: &[T]) -> Result<T> {
        let speed = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        let radial = |s: T| s * speed - self.a[node] * (T::one() + s * s).powf(self.gamma / T::lit(2.0)) - self.v[node];
        if speed == T::zero() {
            return Ok(radial(T::zero()));
        }
        let mut hi = T::one();
        let mut expansions = 0;
        while self.radial_slope(node, hi) < speed {
            hi = hi * T::lit(2.0);
            expansions += 1;
            if expansions > 200 || !hi.is_finite() {
                return Err(MfgError::LegendreNoConvergence { node });
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if self.radial_slope(node, mid) < speed {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * hi.max(T::one()) {
                return Ok(radial((lo + hi) / T::lit(2.0)));
            }
        }
        Err(MfgError::LegendreNoConvergence { node })
    }
}

impl<T: Real> Hamiltonian<T> for HamiltonianModel<T> {
    fn dim(&self) -> usize {
        HamiltonianModel::dim(self)
    }

    #[inline]
    fn value(&self, node: usize, p: &[T]) -> T {
        self.h_eval(node, p)
    }

    #[inline]
    fn grad_p(&self, node: usize, p: &[T], out: &mut [T]) {
        self.dp_h_into(node, p, out)
    }

    fn value_grad(&self, node: usize, p: &[T], out: &mut [T]) -> T {
        let b = Self::base(p);
        let a = self.a[node];
        let pow = b.powf(self.gamma / T::lit(2.0));
        let coef = a * self.gamma * pow / b;
        for (o, &pi) in out.iter_mut().zip(p) {
            *o = coef * pi;
        }
        a * pow + self.v[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_model(gamma: f64) -> HamiltonianModel<f64> {
        let g = TorusGrid::<f64>::new(2, 8, 1.0, 1).unwrap();
        HamiltonianModel::constant(g, 1.0, 1.0, gamma).unwrap()
    }

    fn varying_model() -> HamiltonianModel<f64> {
        let g = TorusGrid::new(2, 16, 1.0, 1).unwrap();
        let a = Field::from_fn(g, |x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos());
        let v = Field::from_fn(g, |x| 1.0 + 0.2 * (2.0 * PI * x[1]).cos());
        HamiltonianModel::new(a, v, 1.5).unwrap()
    }

    fn random_p(rng: &mut ChaCha8Rng, r: f64) -> [f64; 2] {
        [rng.gen_range(-r..r), rng.gen_range(-r..r)]
    }

    #[test]
    fn fused_value_grad_matches() {
        let g = TorusGrid::new(2, 8, 1.0, 1).unwrap();
        let m = HamiltonianModel::new(
            Field::from_fn(g, |x| 1.0 + 0.3 * x[0]),
            Field::from_fn(g, |x| 0.5 + x[1]),
            1.6,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let node = rng.gen_range(0..g.len());
            let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let mut fused = [0.0f64; 2];
            let v: f64 = m.value_grad(node, &p, &mut fused);
            assert!((v - m.h_eval(node, &p)).abs() <= 1e-13 * v.abs());
            let sep = m.dp_h(node, &p);
            for k in 0..2 {
                assert!((fused[k] - sep[k]).abs() <= 1e-13 * (1.0 + sep[k].abs()));
            }
        }
    }

    #[test]
    fn invariants_checked() {
        let g = TorusGrid::<f64>::new(2, 8, 1.0, 1).unwrap();
        assert!(HamiltonianModel::constant(g, 0.0, 1.0, 1.5).is_err());
        assert!(HamiltonianModel::constant(g, 1.0, 0.0, 1.5).is_err());
        // d = 2 window is (4/3, 2)
        assert!(HamiltonianModel::constant(g, 1.0, 1.0, 1.3).is_err());
        assert!(HamiltonianModel::constant(g, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn hand_evaluations() {
        let m = unit_model(1.5);
        assert_eq!(m.h_eval(0, &[0.0, 0.0]), 2.0);
        let p = [3f64.sqrt(), 0.0];
        assert!((m.h_eval(0, &p) - (2f64.powf(1.5) + 1.0)).abs() < 1e-12);
        assert!((m.h_eval(0, &p) - 3.8284).abs() < 1e-4);
        assert_eq!(m.h_eval(3, &[0.4, -1.0]), m.h_eval(3, &[-0.4, 1.0]));
        let dp = m.dp_h(0, &[1.0, 0.0]);
        assert!((dp[0] - 1.5 * 2f64.powf(-0.25)).abs() < 1e-12);
        assert!((dp[0] - 1.2613).abs() < 1e-4);
        assert_eq!(dp[1], 0.0);
        assert_eq!(m.dp_h(0, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(m.l_hat(0, &[0.0, 0.0]), -2.0);
        let lh = m.l_hat(0, &[1.0, 0.0]);
        assert!((lh - (-0.5 * 2f64.powf(-0.25) - 1.0)).abs() < 1e-12);
        assert!((lh - (-1.4204)).abs() < 1e-4);
    }

    #[test]
    fn hessian_at_origin_is_scaled_identity() {
        let m = varying_model();
        let node = 5;
        let hpp = m.dpp_h(node, &[0.0, 0.0]);
        let s = m.a()[node] * 1.5;
        assert_eq!(hpp, vec![s, 0.0, 0.0, s]);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = varying_model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = 1e-4;
        for _ in 0..200 {
            let node = rng.gen_range(0..m.a().len());
            let p = random_p(&mut rng, 5.0);
            let dp = m.dp_h(node, &p);
            let hpp = m.dpp_h(node, &p);
            for i in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[i] += step;
                pm[i] -= step;
                let fd = (m.h_eval(node, &pp) - m.h_eval(node, &pm)) / (2.0 * step);
                assert!((fd - dp[i]).abs() < 1e-6, "grad {fd} vs {}", dp[i]);
                let dpp_fd_p = m.dp_h(node, &pp);
                let dpp_fd_m = m.dp_h(node, &pm);
                for j in 0..2 {
                    let fd2 = (dpp_fd_p[j] - dpp_fd_m[j]) / (2.0 * step);
                    assert!((fd2 - hpp[j * 2 + i]).abs() < 1e-5);
                }
                // second derivatives directly from H values
                let fd_hh = (m.h_eval(node, &pp) - 2.0 * m.h_eval(node, &p) + m.h_eval(node, &pm)) / (step * step);
                assert!((fd_hh - hpp[i * 2 + i]).abs() < 1e-5 * 100.0);
            }
            assert!((hpp[1] - hpp[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn l_hat_two_formulas_agree() {
        let m = varying_model();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let node = rng.gen_range(0..m.a().len());
            let p = random_p(&mut rng, 20.0);
            let dp = m.dp_h(node, &p);
            let via_dp = dp[0] * p[0] + dp[1] * p[1] - m.h_eval(node, &p);
            let scale = m.h_eval(node, &p);
            assert!((via_dp - m.l_hat(node, &p)).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn legendre_at_zero_velocity() {
        let m = varying_model();
        for node in [0, 7, 100] {
            let l = m.legendre_l(node, &[0.0, 0.0]).unwrap();
            assert_eq!(l, -(m.a()[node] + m.v()[node]));
        }
    }

    #[test]
    fn legendre_duality() {
        let m = varying_model();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let node = rng.gen_range(0..m.a().len());
            let p = random_p(&mut rng, 10.0);
            let v: Vec<f64> = m.dp_h(node, &p).into_iter().map(|x| -x).collect();
            let l = m.legendre_l(node, &v).unwrap();
            assert!((l - m.l_hat(node, &p)).abs() < 1e-8, "{l} vs {}", m.l_hat(node, &p));
        }
    }

    #[test]
    fn legendre_midpoint_convex() {
        let m = varying_model();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let node = rng.gen_range(0..m.a().len());
            let v0 = random_p(&mut rng, 3.0);
            let v1 = random_p(&mut rng, 3.0);
            let mid = [(v0[0] + v1[0]) / 2.0, (v0[1] + v1[1]) / 2.0];
            let lm = m.legendre_l(node, &mid).unwrap();
            let avg = (m.legendre_l(node, &v0).unwrap() + m.legendre_l(node, &v1).unwrap()) / 2.0;
            assert!(lm <= avg + 1e-10);
        }
    }
}
