//! Mollifier `η_ε` and the nonlocal power coupling `g_ε(m) = η_ε∗(η_ε∗m)^α`.

use crate::error::{MfgError, Result};
use crate::field::Field;
use crate::grid::TorusGrid;
use crate::scalar::Real;
use crate::spectral::SpectralOps;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Clip threshold for roundoff-negative densities.
pub const CLIP_FLOOR: f64 = 1e-12;
/// Anything below this is a positivity failure.
pub const NEGATIVE_LIMIT: f64 = 1e-10;

/// Coupling exponent and mollification width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams<T> {
    pub alpha: T,
    pub eps: T,
}

impl<T: Real> CouplingParams<T> {
    pub fn new(alpha: T, eps: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(MfgError::InvalidModel(format!("alpha = {alpha} must be positive")));
        }
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(MfgError::InvalidModel(format!("eps = {eps} must be nonnegative")));
        }
        Ok(Self { alpha, eps })
    }

    pub fn with_eps(self, eps: T) -> Result<Self> {
        Self::new(self.alpha, eps)
    }

    /// `g(z) = z^α`.
    pub fn g(&self, z: T) -> T {
        z.powf(self.alpha)
    }

    /// `g'(z) = α z^{α-1}`.
    pub fn g_prime(&self, z: T) -> T {
        self.alpha * z.powf(self.alpha - T::one())
    }
}

/// Antiderivative `G(z) = z^{α+1}/(α+1)` of the coupling.
pub fn g_antideriv<T: Real>(params: &CouplingParams<T>, z: T) -> Result<T> {
    if z < T::zero() || z.is_nan() {
        return Err(MfgError::Domain(format!("G(z) needs z >= 0, got {z}")));
    }
    let e = params.alpha + T::one();
    Ok(z.powf(e) / e)
}

/// Wrapped smooth bump of support radius `2ε`, renormalized on the grid.
#[derive(Clone, Debug)]
pub struct Mollifier<T: Real> {
    eps: T,
    kernel: Field<T>,
    /// `None` when the kernel is the discrete identity.
    kernel_hat: Option<Vec<Complex<T>>>,
    spectral: SpectralOps<T>,
}

impl<T: Real> Mollifier<T> {
    pub fn new(grid: TorusGrid<T>, eps: T) -> Result<Self> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(MfgError::InvalidModel(format!("eps = {eps} must be nonnegative")));
        }
        let spectral = SpectralOps::new(grid);
        let radius = T::lit(2.0) * eps;
        if radius < grid.h() {
            let kernel = Field::delta(grid, 0);
            return Ok(Self { eps, kernel, kernel_hat: None, spectral });
        }
        let d = grid.dim();
        let half = T::lit(0.5);
        let mut pos = vec![T::zero(); d];
        let mut values = vec![T::zero(); grid.len()];
        for (node, v) in values.iter_mut().enumerate() {
            grid.position(node, &mut pos);
            let r2: T = pos
                .iter()
                .map(|&x| {
                    let w = if x > half { T::one() - x } else { x };
                    w * w
                })
                .sum();
            let s = r2 / (radius * radius);
            if s < T::one() {
                *v = (-T::one() / (T::one() - s)).exp();
            }
        }
        let total: T = values.iter().copied().sum::<T>() * grid.cell_volume();
        values.iter_mut().for_each(|v| *v = *v / total);
        let kernel = Field::from_raw(grid, values);
        let kernel_hat = Some(spectral.forward(&kernel));
        Ok(Self { eps, kernel, kernel_hat, spectral })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn kernel(&self) -> &Field<T> {
        &self.kernel
    }

    pub fn is_identity(&self) -> bool {
        self.kernel_hat.is_none()
    }

    /// Circular convolution `η_ε ∗ f`.
    pub fn mollify(&self, f: &Field<T>) -> Field<T> {
        match &self.kernel_hat {
            None => f.clone(),
            Some(hat) => self.spectral.convolve_hat(f, hat),
        }
    }

    /// `g_ε(m) = η_ε∗((η_ε∗m)^α)`.
    pub fn g_eps(&self, params: &CouplingParams<T>, m: &Field<T>) -> Result<Field<T>> {
        let inner = clip_density(&self.mollify(m))?;
        let powered = inner.map(|z| params.g(z));
        let out = self.mollify(&powered);
        // the outer convolution of a nonnegative field can leave roundoff negatives
        Ok(out.map(|z| z.max(T::zero())))
    }
}

/// Clips values in `[-1e-12, 0)` to zero; errors below `-1e-10`.
///
/// Values between the two thresholds are clipped as well but logged, since
/// they point at an under-resolved but not broken solve.
pub fn clip_density<T: Real>(m: &Field<T>) -> Result<Field<T>> {
    let floor = T::lit(CLIP_FLOOR);
    let limit = T::lit(NEGATIVE_LIMIT);
    for (node, &v) in m.values().iter().enumerate() {
        if v < -limit || v.is_nan() {
            return Err(MfgError::NegativeDensity { node, value: v.as_f64() });
        }
        if v < -floor {
            log::warn!("density {v} at node {node} clipped to zero");
        }
    }
    Ok(m.map(|v| v.max(T::zero())))
}
