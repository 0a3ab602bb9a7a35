//! Discrete Lebesgue and mixed Bochner norms on the unit torus.

use crate::error::{MfgError, Result};
use crate::field::{Field, Trajectory};
use crate::scalar::Real;

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if p.is_nan() || p < T::one() {
        return Err(MfgError::InvalidExponent(p.as_f64()));
    }
    Ok(())
}

/// `(Σ |f|^p h^d)^{1/p}`; `p = ∞` is the max-abs.
pub fn lp_norm<T: Real>(f: &Field<T>, p: T) -> Result<T> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(f.values().iter().fold(T::zero(), |m, v| m.max(v.abs())));
    }
    let vol = f.grid().cell_volume();
    if p == T::one() {
        return Ok(f.values().iter().map(|v| v.abs()).sum::<T>() * vol);
    }
    let s: T = f.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * vol).powf(p.recip()))
}

/// Mixed `L^r(0,T; L^p)` norm with the left-endpoint rectangle rule in time:
/// frames `0..steps` carry weight `dt`, the final frame is not sampled.
pub fn bochner_norm<T: Real>(traj: &Trajectory<T>, r: T, p: T) -> Result<T> {
    check_exponent(r)?;
    check_exponent(p)?;
    let steps = traj.grid().steps();
    let norms = traj.frames()[..steps]
        .iter()
        .map(|f| lp_norm(f, p))
        .collect::<Result<Vec<_>>>()?;
    if r.is_infinite() {
        return Ok(norms.into_iter().fold(T::zero(), T::max));
    }
    let dt = traj.grid().dt();
    let s: T = norms.iter().map(|n| n.powf(r)).sum();
    Ok((s * dt).powf(r.recip()))
}

/// `Σ f g h^d`.
pub fn inner<T: Real>(f: &Field<T>, g: &Field<T>) -> T {
    f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum::<T>() * f.grid().cell_volume()
}

/// Left-endpoint time integral of per-frame scalars `q_k`, `k < steps`.
pub fn time_integral<T: Real>(dt: T, per_frame: &[T]) -> T {
    let steps = per_frame.len().saturating_sub(1);
    per_frame[..steps].iter().copied().sum::<T>() * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use proptest::prelude::*;

    fn grid() -> TorusGrid<f64> {
        TorusGrid::new(2, 8, 1.0, 4).unwrap()
    }

    #[test]
    fn unit_field_has_unit_norm() {
        let f = Field::constant(grid(), 1.0);
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert!((lp_norm(&f, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let f = Field::constant(grid(), -3.0);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 3.0);
    }

    #[test]
    fn half_indicator() {
        let g = grid();
        let f = Field::from_values(g, (0..g.len()).map(|i| if i % 2 == 0 { 2.0 } else { 0.0 }).collect()).unwrap();
        // Σ 4 · h^d over half the nodes = 2
        assert!((lp_norm(&f, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_exponent() {
        let f = Field::constant(grid(), 1.0);
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn bochner_constant_in_time() {
        let g = TorusGrid::new(1, 8, 0.8, 4).unwrap();
        let f = Field::constant(g, 2.0);
        let traj = Trajectory::constant_in_time(g, &f);
        let got = bochner_norm(&traj, 3.0, 2.0).unwrap();
        assert!((got - 0.8f64.powf(1.0 / 3.0) * 2.0).abs() < 1e-13);
        let zero = Trajectory::constant_in_time(g, &Field::zeros(g));
        assert_eq!(bochner_norm(&zero, 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn bochner_hand_quadrature() {
        // two rectangles of width 0.5 sampled at norms 1 and 2 (final frame ignored)
        let g = TorusGrid::new(1, 8, 1.0, 2).unwrap();
        let frames = vec![Field::constant(g, 1.0), Field::constant(g, 2.0), Field::constant(g, 100.0)];
        let traj = Trajectory::new(g, frames).unwrap();
        let got = bochner_norm(&traj, 2.0, 2.0).unwrap();
        assert!((got - 2.5f64.sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn lp_interpolation(vals in proptest::collection::vec(-5.0f64..5.0, 64), p0 in 1.0f64..3.0, dp in 0.1f64..5.0, theta in 0.0f64..1.0) {
            let f = Field::from_values(grid(), vals).unwrap();
            let p1 = p0 + dp;
            // 1/p_θ = θ/p1 + (1-θ)/p0
            let pt = 1.0 / (theta / p1 + (1.0 - theta) / p0);
            let lhs = lp_norm(&f, pt).unwrap();
            let rhs = lp_norm(&f, p1).unwrap().powf(theta) * lp_norm(&f, p0).unwrap().powf(1.0 - theta);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn lp_monotone_in_abs(vals in proptest::collection::vec(-5.0f64..5.0, 64), s in 1.0f64..3.0, p in 1.0f64..6.0) {
            let f = Field::from_values(grid(), vals).unwrap();
            let g = f.scale(s);
            prop_assert!(lp_norm(&f, p).unwrap() <= lp_norm(&g, p).unwrap() + 1e-14);
            prop_assert!(lp_norm(&f, p).unwrap() >= 0.0);
        }
    }
}
