//! Periodic finite-difference operators.
//!
//! `divergence` is the exact negative transpose of `gradient` in the
//! `Σ h^d` inner product, so discrete integration by parts holds to roundoff.

use crate::field::{Field, VectorField};
use crate::scalar::Real;

/// Central difference of `f` along `axis`.
pub fn central_diff<T: Real>(f: &Field<T>, axis: usize) -> Field<T> {
    let grid = *f.grid();
    let inv_2h = T::one() / (T::lit(2.0) * grid.h());
    let v = f.values();
    let mut out = vec![T::zero(); grid.len()];
    grid.for_each_along(axis, |i, back, fwd, _| out[i] = (v[fwd] - v[back]) * inv_2h);
    Field::from_raw(grid, out)
}

/// Second-order central gradient, one component per axis.
pub fn gradient<T: Real>(f: &Field<T>) -> VectorField<T> {
    VectorField::from_raw((0..f.grid().dim()).map(|a| central_diff(f, a)).collect())
}

/// Gradient at a single node, written into `out[..d]`.
#[inline]
pub fn gradient_at<T: Real>(f: &Field<T>, node: usize, out: &mut [T]) {
    let grid = f.grid();
    let inv_2h = T::one() / (T::lit(2.0) * grid.h());
    let v = f.values();
    for (axis, o) in out.iter_mut().enumerate().take(grid.dim()) {
        *o = (v[grid.neighbor(node, axis, true)] - v[grid.neighbor(node, axis, false)]) * inv_2h;
    }
}

/// `(2d+1)`-point Laplacian.
pub fn laplacian<T: Real>(f: &Field<T>) -> Field<T> {
    let grid = *f.grid();
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let two = T::lit(2.0);
    let v = f.values();
    let mut out = vec![T::zero(); grid.len()];
    for axis in 0..grid.dim() {
        grid.for_each_along(axis, |i, back, fwd, _| out[i] = out[i] + (v[fwd] - two * v[i] + v[back]) * inv_h2);
    }
    Field::from_raw(grid, out)
}

/// Negative transpose of [`gradient`]; for central differences this is the
/// central divergence.
pub fn divergence<T: Real>(v: &VectorField<T>) -> Field<T> {
    let grid = *v.grid();
    let mut out = vec![T::zero(); grid.len()];
    let inv_2h = T::one() / (T::lit(2.0) * grid.h());
    for (axis, c) in v.components().iter().enumerate() {
        let cv = c.values();
        grid.for_each_along(axis, |i, back, fwd, _| out[i] = out[i] + (cv[fwd] - cv[back]) * inv_2h);
    }
    Field::from_raw(grid, out)
}

/// Discrete Hessian at `node` as a row-major `d×d` matrix: compact second
/// differences on the diagonal, central-central mixed differences off it.
pub fn hessian_at<T: Real>(f: &Field<T>, node: usize, out: &mut [T]) {
    let grid = f.grid();
    let d = grid.dim();
    let h = grid.h();
    let v = f.values();
    let two = T::lit(2.0);
    for a in 0..d {
        let p = grid.neighbor(node, a, true);
        let m = grid.neighbor(node, a, false);
        out[a * d + a] = (v[p] - two * v[node] + v[m]) / (h * h);
        for b in (a + 1)..d {
            let pp = grid.neighbor(p, b, true);
            let pm = grid.neighbor(p, b, false);
            let mp = grid.neighbor(m, b, true);
            let mm = grid.neighbor(m, b, false);
            let x = (v[pp] - v[pm] - v[mp] + v[mm]) / (T::lit(4.0) * h * h);
            out[a * d + b] = x;
            out[b * d + a] = x;
        }
    }
}

/// Pointwise Frobenius norm of the discrete Hessian.
pub fn hessian_norm<T: Real>(f: &Field<T>) -> Field<T> {
    let grid = *f.grid();
    let d = grid.dim();
    let mut buf = vec![T::zero(); d * d];
    let out = (0..grid.len())
        .map(|i| {
            hessian_at(f, i, &mut buf);
            buf.iter().map(|&x| x * x).sum::<T>().sqrt()
        })
        .collect();
    Field::from_raw(grid, out)
}
