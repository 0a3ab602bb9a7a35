//! Grid functions: scalar fields, vector fields and time trajectories.

use crate::error::{MfgError, Result};
use crate::grid::{TorusGrid, MAX_DIM};
use crate::scalar::Real;

/// Scalar grid function at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: TorusGrid<T>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    /// Wraps `values`, checking length and finiteness.
    pub fn from_values(grid: TorusGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MfgError::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MfgError::NonFinite(format!("field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_raw(grid: TorusGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid<T>, c: T) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: TorusGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f(x)` at every node; `x` has length `d`.
    pub fn from_fn(grid: TorusGrid<T>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let mut x = [T::zero(); MAX_DIM];
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|node| {
                grid.position(node, &mut x);
                f(&x[..d])
            })
            .collect();
        Self { grid, values }
    }

    /// Discrete delta of unit mass at `node`.
    pub fn delta(grid: TorusGrid<T>, node: usize) -> Self {
        let mut f = Self::zeros(grid);
        f.values[node] = T::one() / grid.cell_volume();
        f
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(self.grid.same_space(&other.grid));
        Self::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `sup f - inf f` over the grid.
    pub fn osc(&self) -> T {
        self.max() - self.min()
    }

    /// `Σ f h^d`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    /// `max |f - g|`.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Same values on a grid with different time metadata.
    pub fn with_grid(mut self, grid: TorusGrid<T>) -> Self {
        debug_assert!(self.grid.same_space(&grid));
        self.grid = grid;
        self
    }
}

impl<T> std::ops::Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// `d` scalar components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    components: Vec<Field<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(components: Vec<Field<T>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| MfgError::GridMismatch("vector field needs components".into()))?;
        if components.len() != first.grid().dim() {
            return Err(MfgError::GridMismatch(format!(
                "{} components for dimension {}",
                components.len(),
                first.grid().dim()
            )));
        }
        if components.iter().any(|c| !c.grid().same_space(first.grid())) {
            return Err(MfgError::GridMismatch("components on different grids".into()));
        }
        Ok(Self { components })
    }

    pub(crate) fn from_raw(components: Vec<Field<T>>) -> Self {
        Self { components }
    }

    pub fn zeros(grid: TorusGrid<T>) -> Self {
        Self { components: (0..grid.dim()).map(|_| Field::zeros(grid)).collect() }
    }

    /// Spatially constant vector `c`.
    pub fn constant(grid: TorusGrid<T>, c: &[T]) -> Self {
        Self { components: c.iter().map(|&v| Field::constant(grid, v)).collect() }
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &Field<T> {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Field<T>] {
        &self.components
    }

    /// Vector at `node` written into `out`.
    #[inline]
    pub fn at(&self, node: usize, out: &mut [T]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.values[node];
        }
    }

    /// Pointwise Euclidean norm.
    pub fn norm(&self) -> Field<T> {
        let grid = *self.grid();
        let values = (0..grid.len())
            .map(|i| self.components.iter().map(|c| c.values[i] * c.values[i]).sum::<T>().sqrt())
            .collect();
        Field::from_raw(grid, values)
    }

    /// Pointwise squared norm `|v|^2`.
    pub fn norm_sq(&self) -> Field<T> {
        self.norm().map(|v| v * v)
    }

    /// `Σ_x v·w h^d`.
    pub fn dot(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.values.iter().zip(&b.values).map(|(&x, &y)| x * y).sum::<T>())
            .sum::<T>()
            * self.grid().cell_volume()
    }
}

/// Time-indexed sequence of fields on one grid, frames `0..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    grid: TorusGrid<T>,
    frames: Vec<Field<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory; the frame count must equal `grid.steps() + 1`.
    pub fn new(grid: TorusGrid<T>, frames: Vec<Field<T>>) -> Result<Self> {
        if frames.len() != grid.steps() + 1 {
            return Err(MfgError::GridMismatch(format!(
                "{} frames for {} steps",
                frames.len(),
                grid.steps()
            )));
        }
        if frames.iter().any(|f| !f.grid().same_space(&grid)) {
            return Err(MfgError::GridMismatch("frames on different spatial grids".into()));
        }
        let frames = frames.into_iter().map(|f| f.with_grid(grid)).collect();
        Ok(Self { grid, frames })
    }

    /// Every frame equal to `f`.
    pub fn constant_in_time(grid: TorusGrid<T>, f: &Field<T>) -> Self {
        let f = f.clone().with_grid(grid);
        Self { grid, frames: vec![f; grid.steps() + 1] }
    }

    pub fn from_fn(grid: TorusGrid<T>, f: impl Fn(T, &[T]) -> T) -> Self {
        let frames = (0..=grid.steps())
            .map(|k| {
                let t = grid.time(k);
                Field::from_fn(grid, |x| f(t, x))
            })
            .collect();
        Self { grid, frames }
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    pub fn frames(&self) -> &[Field<T>] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [Field<T>] {
        &mut self.frames
    }

    pub fn frame(&self, k: usize) -> &Field<T> {
        &self.frames[k]
    }

    pub fn first(&self) -> &Field<T> {
        &self.frames[0]
    }

    pub fn last(&self) -> &Field<T> {
        &self.frames[self.frames.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `sup_{x,t} |a - b|`.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.sup_distance(b))
            .fold(T::zero(), T::max)
    }

    pub fn map_frames(&self, f: impl Fn(&Field<T>) -> Field<T>) -> Self {
        Self { grid: self.grid, frames: self.frames.iter().map(f).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.frames.iter().all(Field::all_finite)
    }

    pub fn min(&self) -> T {
        self.frames.iter().map(Field::min).fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.frames.iter().map(Field::max).fold(T::neg_infinity(), T::max)
    }
}
