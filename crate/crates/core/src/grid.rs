//! Uniform periodic discretization of the unit torus times a time interval.

use crate::error::{MfgError, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Largest spatial dimension supported by the grid kernels.
pub const MAX_DIM: usize = 3;

/// Periodic grid on `[0,1)^d × [0,T]`.
///
/// Nodes sit at `x_i = i h` with `h = 1/n`; the flat node index is row-major
/// with axis 0 varying slowest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid<T> {
    d: usize,
    n: usize,
    h: T,
    t_final: T,
    dt: T,
    steps: usize,
}

impl<T: Real> TorusGrid<T> {
    /// Grid with an explicit step count. `steps = 0` is only allowed with `T = 0`.
    pub fn new(d: usize, n: usize, t_final: T, steps: usize) -> Result<Self> {
        Self::check_space(d, n)?;
        if !(t_final >= T::zero()) || !t_final.is_finite() {
            return Err(MfgError::InvalidGrid(format!("horizon T = {t_final} must be finite and >= 0")));
        }
        if steps == 0 {
            if t_final > T::zero() {
                return Err(MfgError::InvalidGrid("positive horizon needs at least one step".into()));
            }
            // dt is irrelevant without steps but must stay positive.
            return Ok(Self { d, n, h: Self::spacing(n), t_final, dt: T::one(), steps });
        }
        let dt = t_final / T::from_usize_lossy(steps);
        if !(dt > T::zero()) {
            return Err(MfgError::InvalidGrid("time step must be positive".into()));
        }
        Ok(Self { d, n, h: Self::spacing(n), t_final, dt, steps })
    }

    /// Grid from a requested step size; `steps = round(T/dt)` and `dt` is then
    /// re-derived as `T/steps` so that `steps * dt = T`.
    pub fn with_dt(d: usize, n: usize, t_final: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(MfgError::InvalidGrid(format!("time step {dt} must be positive")));
        }
        if t_final == T::zero() {
            Self::check_space(d, n)?;
            return Ok(Self { d, n, h: Self::spacing(n), t_final, dt, steps: 0 });
        }
        let ratio = (t_final / dt).round();
        let steps = ratio.to_usize().unwrap_or(0).max(1);
        Self::new(d, n, t_final, steps)
    }

    /// Grid from stored header values, kept bit-for-bit. Requires
    /// `|steps·dt − T| <= 1e-12·max(1, T)` when `steps > 0`.
    pub fn from_parts(d: usize, n: usize, t_final: T, dt: T, steps: usize) -> Result<Self> {
        Self::check_space(d, n)?;
        if !(t_final >= T::zero()) || !t_final.is_finite() || !(dt > T::zero()) || !dt.is_finite() {
            return Err(MfgError::InvalidGrid(format!("bad horizon/step T = {t_final}, dt = {dt}")));
        }
        if steps == 0 && t_final > T::zero() {
            return Err(MfgError::InvalidGrid("positive horizon needs at least one step".into()));
        }
        let gap = (T::from_usize_lossy(steps) * dt - t_final).abs();
        if steps > 0 && gap > T::lit(1e-12) * t_final.max(T::one()) {
            return Err(MfgError::InvalidGrid(format!("steps*dt differs from T by {gap}")));
        }
        Ok(Self { d, n, h: Self::spacing(n), t_final, dt, steps })
    }

    fn spacing(n: usize) -> T {
        T::one() / T::from_usize_lossy(n)
    }

    fn check_space(d: usize, n: usize) -> Result<()> {
        if d == 0 || d > MAX_DIM {
            return Err(MfgError::InvalidGrid(format!("dimension {d} not in 1..={MAX_DIM}")));
        }
        if n < 4 {
            return Err(MfgError::InvalidGrid(format!("n = {n} must be at least 4")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of spatial nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> T {
        self.h.powi(self.d as i32)
    }

    /// Time of frame `k`.
    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.dt
    }

    /// Flat-index stride of `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Integer coordinate of `node` along `axis`.
    #[inline]
    pub fn coord(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.n
    }

    /// Visits every node with its periodic neighbours along `axis`, as
    /// `f(node, back, fwd, fwd2)`. Avoids the per-node index arithmetic of
    /// [`TorusGrid::neighbor`] in stencil loops.
    #[inline]
    pub fn for_each_along(&self, axis: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
        let n = self.n;
        let s = self.stride(axis);
        let block = s * n;
        let row_of = |base: usize, i: usize| base + (i % n) * s;
        for base in (0..self.len()).step_by(block) {
            for i in 0..n {
                let row = base + i * s;
                let back = row_of(base, i + n - 1);
                let fwd = row_of(base, i + 1);
                let fwd2 = row_of(base, i + 2);
                for j in 0..s {
                    f(row + j, back + j, fwd + j, fwd2 + j);
                }
            }
        }
    }

    /// Periodic neighbour of `node` shifted by `+1` (`forward = true`) or `-1` along `axis`.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let i = (node / s) % self.n;
        if forward {
            if i + 1 == self.n {
                node + s - self.n * s
            } else {
                node + s
            }
        } else if i == 0 {
            node + (self.n - 1) * s
        } else {
            node - s
        }
    }

    /// Node shifted by an arbitrary signed offset along `axis`.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let s = self.stride(axis);
        let i = ((node / s) % self.n) as isize;
        let n = self.n as isize;
        let j = (i + offset).rem_euclid(n);
        (node as isize + (j - i) * s as isize) as usize
    }

    /// Physical position of `node` written into `out[..d]`.
    pub fn position(&self, node: usize, out: &mut [T]) {
        for (axis, x) in out.iter_mut().enumerate().take(self.d) {
            *x = T::from_usize_lossy(self.coord(node, axis)) * self.h;
        }
    }

    /// Index of the node reflected through the origin, `x ↦ -x`.
    pub fn reflect(&self, node: usize) -> usize {
        (0..self.d).fold(0, |acc, axis| {
            let i = self.coord(node, axis);
            let j = (self.n - i) % self.n;
            acc + j * self.stride(axis)
        })
    }

    /// True if both grids discretize the same torus (time data ignored).
    pub fn same_space(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n
    }

    /// Same spatial grid with new time metadata.
    pub fn with_time(&self, t_final: T, steps: usize) -> Result<Self> {
        Self::new(self.d, self.n, t_final, steps)
    }

    /// Grid with `h` and `dt` both halved.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.d, 2 * self.n, self.t_final, 2 * self.steps)
    }
}
