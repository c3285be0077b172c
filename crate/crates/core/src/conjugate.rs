//! Numerical inversion of a gradient map, `∇φ*(y) = argmax_x {⟨x, y⟩ − φ(x)}`.
//!
//! Damped Newton iteration on the residual `∇φ(x) − y` from a warm start.
//! A step is accepted as soon as it stays in the domain and does not increase
//! the residual norm.

use crate::error::{Error, Result};
use crate::geometry::{Cholesky, Matrix, Point};
use crate::potentials::Potential;

/// Anything with a gradient and Hessian that can be inverted.
pub trait GradientMap {
    fn dim(&self) -> usize;
    fn grad(&self, x: &Point) -> Result<Point>;
    fn hess(&self, x: &Point) -> Result<Matrix>;
    fn in_domain(&self, x: &Point) -> bool;
    fn closed_form_inverse(&self, _y: &Point) -> Option<Result<Point>> {
        None
    }
}

impl GradientMap for Potential {
    fn dim(&self) -> usize {
        Potential::dim(self)
    }

    fn grad(&self, x: &Point) -> Result<Point> {
        self.gradient(x)
    }

    fn hess(&self, x: &Point) -> Result<Matrix> {
        self.hessian(x)
    }

    fn in_domain(&self, x: &Point) -> bool {
        Potential::in_domain(self, x)
    }

    fn closed_form_inverse(&self, y: &Point) -> Option<Result<Point>> {
        self.dual_gradient(y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvertSettings {
    /// Target Euclidean norm of `∇φ(x) − y`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step shrink factor in `(0, 1)`.
    pub backtracking_factor: f64,
    pub min_step: f64,
}

impl Default for InvertSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            backtracking_factor: 0.5,
            min_step: 1e-12,
        }
    }
}

impl InvertSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: "must be positive".into(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(Error::InvalidParameter {
                name: "backtracking_factor",
                reason: "must lie in (0, 1)".into(),
            });
        }
        Ok(())
    }
}

/// Result of an inversion. `iterations` is zero for closed forms.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub point: Point,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton inversion of `∇φ(x) = y` starting from `warm_start`.
pub fn invert_gradient<M: GradientMap + ?Sized>(
    map: &M,
    y: &Point,
    warm_start: &Point,
    settings: &InvertSettings,
) -> Result<Inversion> {
    settings.validate()?;
    if y.len() != map.dim() || warm_start.len() != map.dim() {
        return Err(Error::Dimension {
            expected: map.dim(),
            got: if y.len() != map.dim() { y.len() } else { warm_start.len() },
        });
    }
    if !map.in_domain(warm_start) {
        return Err(Error::Precondition("warm start lies outside the mirror domain".into()));
    }
    let mut x = warm_start.clone();
    let mut resid = map.grad(&x)? - y;
    let mut norm = resid.norm();
    for iter in 0..settings.max_iterations {
        if norm <= settings.tolerance {
            return Ok(Inversion {
                point: x,
                iterations: iter,
                residual: norm,
            });
        }
        let direction = -Cholesky::new(&map.hess(&x)?)?.solve(&resid);
        let mut t = 1.0;
        loop {
            let candidate = &x + &direction * t;
            if map.in_domain(&candidate) {
                if let Ok(g) = map.grad(&candidate) {
                    let cand_resid = g - y;
                    let cand_norm = cand_resid.norm();
                    if cand_norm <= norm {
                        x = candidate;
                        resid = cand_resid;
                        norm = cand_norm;
                        break;
                    }
                }
            }
            t *= settings.backtracking_factor;
            if t < settings.min_step {
                return Err(Error::StepFailure {
                    min_step: settings.min_step,
                    residual: norm,
                });
            }
        }
    }
    if norm <= settings.tolerance {
        return Ok(Inversion {
            point: x,
            iterations: settings.max_iterations,
            residual: norm,
        });
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual: norm,
    })
}

/// Closed form when the map provides one, otherwise Newton from the warm start.
pub fn invert<M: GradientMap + ?Sized>(
    map: &M,
    y: &Point,
    warm_start: Option<&Point>,
    settings: &InvertSettings,
) -> Result<Inversion> {
    if let Some(closed) = map.closed_form_inverse(y) {
        let point = closed?;
        return Ok(Inversion {
            point,
            iterations: 0,
            residual: 0.0,
        });
    }
    let warm = warm_start.ok_or_else(|| Error::Precondition("numerical inversion requires a warm start".into()))?;
    invert_gradient(map, y, warm, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mirror::Mirror;
    use crate::rng::{NoiseStream, Purpose};
    use std::sync::Arc;

    fn pt(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    fn logistic(seed: u64) -> Potential {
        let data = crate::harness::data::generate_logistic_data(100, seed);
        Potential::logistic(Arc::new(data), 10.0).unwrap()
    }

    #[test]
    fn quadratic_mirror_inverts_in_one_step() {
        let m = Mirror::quadratic(3);
        let y = pt(&[1.0, 2.0, -3.0]);
        let inv = invert_gradient(&m, &y, &pt(&[10.0, -4.0, 0.0]), &InvertSettings::default()).unwrap();
        assert_eq!(inv.iterations, 1);
        assert!((inv.point - y).amax() < 1e-12);
    }

    #[test]
    fn gaussian_potential_inverts_in_one_step() {
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let pot = Potential::gaussian(cov.clone()).unwrap();
        let y = pt(&[0.5, -1.5]);
        let inv = invert_gradient(&pot, &y, &pt(&[3.0, 3.0]), &InvertSettings::default()).unwrap();
        assert_eq!(inv.iterations, 1);
        assert!((inv.point - cov * y).amax() < 1e-10);
    }

    #[test]
    fn logistic_round_trip_from_noisy_warm_start() {
        let pot = logistic(5);
        let mut s = NoiseStream::new(41, Purpose::Auxiliary, 0, 0);
        for _ in 0..20 {
            let theta = s.normal_vector(2);
            let y = pot.gradient(&theta).unwrap();
            let warm = &theta + s.normal_vector(2) * 0.1;
            let inv = invert_gradient(&pot, &y, &warm, &InvertSettings::default()).unwrap();
            assert!((inv.point - theta).norm() < 1e-8);
        }
    }

    #[test]
    fn round_trip_property_many_kinds() {
        let mut s = NoiseStream::new(42, Purpose::Auxiliary, 0, 0);
        let maps: Vec<Box<dyn GradientMap>> = vec![
            Box::new(logistic(6)),
            Box::new(Potential::generalized_gaussian(Matrix::from_diagonal(&pt(&[1.0, 4.0, 9.0])), 0.75).unwrap()),
            Box::new(Mirror::power_norm(1.5, 2).unwrap()),
        ];
        for map in &maps {
            for _ in 0..100 {
                let x = s.normal_vector(map.dim()) + Point::from_element(map.dim(), 0.5);
                let y = map.grad(&x).unwrap();
                let warm = &x + s.normal_vector(map.dim()) * 0.01;
                let inv = invert_gradient(map.as_ref(), &y, &warm, &InvertSettings::default()).unwrap();
                assert!((inv.point - &x).norm() < 1e-7 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn barrier_backtracks_to_stay_inside() {
        let m = Mirror::barrier(Potential::box_barrier(vec![0.01, 1.0]).unwrap()).unwrap();
        let target = pt(&[0.0099, -0.999]);
        let y = m.grad(&target).unwrap();
        let inv = invert_gradient(&m, &y, &Point::zeros(2), &InvertSettings::default()).unwrap();
        assert!((inv.point - target).norm() < 1e-9);
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let pot = logistic(7);
        let y = pot.gradient(&pt(&[3.0, -2.0])).unwrap();
        let settings = InvertSettings {
            max_iterations: 1,
            ..InvertSettings::default()
        };
        match invert_gradient(&pot, &y, &pt(&[-3.0, 3.0]), &settings) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_settings_and_warm_start() {
        let m = Mirror::barrier(Potential::box_barrier(vec![1.0]).unwrap()).unwrap();
        let bad = InvertSettings {
            tolerance: 0.0,
            ..InvertSettings::default()
        };
        assert!(invert_gradient(&m, &pt(&[1.0]), &pt(&[0.0]), &bad).is_err());
        assert!(invert_gradient(&m, &pt(&[1.0]), &pt(&[2.0]), &InvertSettings::default()).is_err());
    }

    #[test]
    fn domain_exit_below_min_step_fails() {
        let m = Mirror::barrier(Potential::box_barrier(vec![1.0]).unwrap()).unwrap();
        let y = m.grad(&pt(&[0.999])).unwrap();
        let settings = InvertSettings {
            min_step: 0.6,
            ..InvertSettings::default()
        };
        let r = invert_gradient(&m, &y, &pt(&[0.0]), &settings);
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }
}
