//! Fourier diagonalization of the periodic stencil operators.
//!
//! The discrete Laplacian is diagonal in the DFT basis with symbol
//! `-Σ_a λ(k_a)`, `λ(k) = 4 sin²(πk/n)/h²`. Heat evolution and the implicit
//! diffusion resolvent are applied exactly through that symbol.

use crate::error::{MfgError, Result};
use crate::field::Field;
use crate::grid::TorusGrid;
use crate::scalar::Real;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Planned transforms and stencil eigenvalues for one spatial grid.
#[derive(Clone)]
pub struct SpectralOps<T: Real> {
    grid: TorusGrid<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Per-axis Laplacian eigenvalue magnitudes `λ(k)`.
    axis_eig: Vec<T>,
    /// `Σ_a λ(k_a)` for every flat mode index.
    mode_eig: Vec<T>,
}

impl<T: Real> std::fmt::Debug for SpectralOps<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps").field("grid", &self.grid).finish()
    }
}

impl<T: Real> SpectralOps<T> {
    pub fn new(grid: TorusGrid<T>) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let h = grid.h();
        let axis_eig: Vec<T> = (0..n)
            .map(|k| {
                let s = (T::PI() * T::from_usize_lossy(k) / T::from_usize_lossy(n)).sin();
                T::lit(4.0) * s * s / (h * h)
            })
            .collect();
        let mode_eig = (0..grid.len())
            .map(|idx| (0..grid.dim()).map(|a| axis_eig[grid.coord(idx, a)]).sum())
            .collect();
        Self { grid, forward, inverse, axis_eig, mode_eig }
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    /// `λ(k)` along one axis.
    pub fn axis_eigenvalue(&self, k: usize) -> T {
        self.axis_eig[k]
    }

    /// Negated Laplacian symbol of flat mode `idx`.
    pub fn mode_eigenvalue(&self, idx: usize) -> T {
        self.mode_eig[idx]
    }

    fn transform(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let grid = &self.grid;
        let n = grid.n();
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, c) in line.iter().enumerate() {
                        data[start + j * stride] = *c;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT.
    pub fn forward(&self, f: &Field<T>) -> Vec<Complex<T>> {
        let mut data: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse DFT including the `1/n^d` normalization; imaginary parts dropped.
    pub fn inverse(&self, mut data: Vec<Complex<T>>) -> Field<T> {
        self.transform(&mut data, &self.inverse);
        let scale = T::one() / T::from_usize_lossy(self.grid.len());
        Field::from_raw(self.grid, data.into_iter().map(|c| c.re * scale).collect())
    }

    /// `symbol(Σ_a λ(k_a))` for every flat mode, for reuse with
    /// [`SpectralOps::apply_multipliers`].
    pub fn symbol_table(&self, symbol: impl Fn(T) -> T) -> Vec<T> {
        self.mode_eig.iter().map(|&lam| symbol(lam)).collect()
    }

    /// Multiplies mode `idx` by `mult[idx]`.
    pub fn apply_multipliers(&self, f: &Field<T>, mult: &[T]) -> Field<T> {
        debug_assert_eq!(mult.len(), self.mode_eig.len());
        let mut hat = self.forward(f);
        for (c, &m) in hat.iter_mut().zip(mult) {
            *c = *c * m;
        }
        self.inverse(hat).with_grid(*f.grid())
    }

    /// Multiplies mode `idx` by `symbol(Σ_a λ(k_a))`.
    pub fn apply_symbol(&self, f: &Field<T>, symbol: impl Fn(T) -> T) -> Field<T> {
        debug_assert!(f.grid().same_space(&self.grid));
        let mut hat = self.forward(f);
        for (c, &lam) in hat.iter_mut().zip(&self.mode_eig) {
            *c = *c * symbol(lam);
        }
        self.inverse(hat).with_grid(*f.grid())
    }

    /// Exact solution at time `t` of `g_t = Δ_h g` with `g(0) = f`.
    pub fn heat_evolve(&self, f: &Field<T>, t: T) -> Result<Field<T>> {
        if t < T::zero() || t.is_nan() {
            return Err(MfgError::NegativeTime(t.as_f64()));
        }
        if t == T::zero() {
            return Ok(f.clone());
        }
        Ok(self.apply_symbol(f, |lam| (-lam * t).exp()))
    }

    /// Backward-Euler diffusion: solves `(I - dt Δ_h) g = f`.
    pub fn resolvent(&self, f: &Field<T>, dt: T) -> Field<T> {
        self.apply_symbol(f, |lam| T::one() / (T::one() + dt * lam))
    }

    /// Periodic convolution `(k * f)(x) = Σ_y k(x - y) f(y) h^d` given the
    /// forward transform of `k`.
    pub fn convolve_hat(&self, f: &Field<T>, kernel_hat: &[Complex<T>]) -> Field<T> {
        let vol = self.grid.cell_volume();
        let mut hat = self.forward(f);
        for (c, k) in hat.iter_mut().zip(kernel_hat) {
            *c = *c * *k * vol;
        }
        self.inverse(hat).with_grid(*f.grid())
    }
}

/// Exact discrete heat evolution of `f` over duration `t`.
pub fn heat_evolve<T: Real>(f: &Field<T>, t: T) -> Result<Field<T>> {
    SpectralOps::new(*f.grid()).heat_evolve(f, t)
}
