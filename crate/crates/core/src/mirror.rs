//! Mirror maps of Legendre type.
//!
//! A [`Mirror`] reshapes the geometry of the diffusion: the chain moves in the
//! dual coordinates `∇φ(x)` and is mapped back through `∇φ*`. Closed-form
//! inverses are used where they exist; everything else goes through
//! [`crate::conjugate`].

use crate::conjugate::{self, GradientMap, InvertSettings};
use crate::error::{Error, Result};
use crate::geometry::{Matrix, Point};
use crate::potentials::Potential;

#[derive(Clone, Debug)]
pub enum Mirror {
    /// `‖x‖² / 2`; the classical Langevin geometry.
    Quadratic { dim: usize },
    /// `φ = V` for a strictly convex potential (Newton-Langevin).
    PotentialAsMirror(Potential),
    /// `‖x‖^p` with `1 < p < 2` in the presets.
    PowerNorm { p: f64, dim: usize },
    /// A box barrier as mirror; inverted numerically.
    Barrier(Potential),
}

impl Mirror {
    pub fn quadratic(dim: usize) -> Self {
        Self::Quadratic { dim }
    }

    pub fn power_norm(p: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("power-norm exponent must exceed 1, got {p}"),
            });
        }
        Ok(Self::PowerNorm { p, dim })
    }

    pub fn barrier(pot: Potential) -> Result<Self> {
        let is_box = match &pot {
            Potential::BoxBarrier { .. } => true,
            Potential::Scaled { base, .. } => matches!(base.as_ref(), Potential::BoxBarrier { .. }),
            _ => false,
        };
        if !is_box {
            return Err(Error::InvalidParameter {
                name: "pot",
                reason: "barrier mirror requires a box-barrier potential".into(),
            });
        }
        Ok(Self::Barrier(pot))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { dim } | Self::PowerNorm { dim, .. } => *dim,
            Self::PotentialAsMirror(p) | Self::Barrier(p) => p.dim(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Quadratic { .. } => "quadratic".into(),
            Self::PotentialAsMirror(p) => format!("potential({})", p.family()),
            Self::PowerNorm { p, .. } => format!("power-norm({p})"),
            Self::Barrier(_) => "barrier".into(),
        }
    }

    pub fn singular_at_origin(&self) -> bool {
        match self {
            Self::PowerNorm { p, .. } => *p < 2.0,
            Self::PotentialAsMirror(pot) => pot.singular_at_origin(),
            _ => false,
        }
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        match self {
            Self::PotentialAsMirror(p) | Self::Barrier(p) => p.in_domain(x),
            _ => x.iter().all(|v| v.is_finite()),
        }
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }

    pub fn grad(&self, x: &Point) -> Result<Point> {
        self.check_dim(x)?;
        match self {
            Self::Quadratic { .. } => Ok(x.clone()),
            Self::PotentialAsMirror(p) | Self::Barrier(p) => p.gradient(x),
            Self::PowerNorm { p, .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Ok(Point::zeros(x.len()));
                }
                Ok(x * (p * r.powf(p - 2.0)))
            }
        }
    }

    pub fn hess(&self, x: &Point) -> Result<Matrix> {
        self.check_dim(x)?;
        let d = x.len();
        match self {
            Self::Quadratic { .. } => Ok(Matrix::identity(d, d)),
            Self::PotentialAsMirror(p) | Self::Barrier(p) => p.hessian(x),
            Self::PowerNorm { p, .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::Degenerate {
                        family: "power-norm",
                        detail: "Hessian is unbounded at the origin".into(),
                    });
                }
                let u = x / r;
                // p r^{p−2} [I + (p−2) ûûᵀ]; radial eigenvalue p(p−1) r^{p−2}.
                Ok((Matrix::identity(d, d) + &u * u.transpose() * (p - 2.0)) * (p * r.powf(p - 2.0)))
            }
        }
    }

    /// A matrix `M` with `M Mᵀ = ∇²φ(x)`.
    pub fn hess_factor(&self, x: &Point) -> Result<Matrix> {
        self.check_dim(x)?;
        let d = x.len();
        match self {
            Self::Quadratic { .. } => Ok(Matrix::identity(d, d)),
            Self::PotentialAsMirror(p) | Self::Barrier(p) => p.hessian_factor(x),
            Self::PowerNorm { p, .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::Degenerate {
                        family: "power-norm",
                        detail: "Hessian is unbounded at the origin".into(),
                    });
                }
                let u = x / r;
                let radial = &u * u.transpose();
                let tangential = Matrix::identity(d, d) - &radial;
                Ok((tangential + radial * (p - 1.0).sqrt()) * (p * r.powf(p - 2.0)).sqrt())
            }
        }
    }

    /// Closed-form `∇φ*(y)`, if available for this kind.
    pub fn dual_grad_closed_form(&self, y: &Point) -> Option<Result<Point>> {
        if let Err(e) = self.check_dim(y) {
            return Some(Err(e));
        }
        match self {
            Self::Quadratic { .. } => Some(Ok(y.clone())),
            Self::PotentialAsMirror(p) => p.dual_gradient(y),
            Self::PowerNorm { p, .. } => {
                let ny = y.norm();
                if ny == 0.0 {
                    return Some(Ok(Point::zeros(y.len())));
                }
                // ‖∇φ(x)‖ = p ‖x‖^{p−1}.
                let r = (ny / p).powf(1.0 / (p - 1.0));
                let x = y * (r / ny);
                debug_assert!({
                    let back = self.grad(&x).unwrap();
                    (back - y).norm() <= 1e-9 * (1.0 + ny)
                });
                Some(Ok(x))
            }
            Self::Barrier(_) => None,
        }
    }

    /// `∇φ*(y)`: the closed form when available, otherwise Newton inversion
    /// from `warm_start`.
    pub fn dual_grad(&self, y: &Point, warm_start: Option<&Point>, settings: &InvertSettings) -> Result<Point> {
        conjugate::invert(self, y, warm_start, settings).map(|inv| inv.point)
    }
}

impl GradientMap for Mirror {
    fn dim(&self) -> usize {
        Mirror::dim(self)
    }

    fn grad(&self, x: &Point) -> Result<Point> {
        Mirror::grad(self, x)
    }

    fn hess(&self, x: &Point) -> Result<Matrix> {
        Mirror::hess(self, x)
    }

    fn in_domain(&self, x: &Point) -> bool {
        Mirror::in_domain(self, x)
    }

    fn closed_form_inverse(&self, y: &Point) -> Option<Result<Point>> {
        self.dual_grad_closed_form(y)
    }
}

/// Smallest eigenvalue of `C ∇²V(x) − ∇²φ(x)`; nonnegative when the mirror
/// Hessian is dominated by `C` times the potential Hessian at `x`.
pub fn loewner_margin(mirror: &Mirror, pot: &Potential, constant: f64, x: &Point) -> Result<f64> {
    let gap = pot.hessian(x)? * constant - mirror.hess(x)?;
    Ok(crate::geometry::min_eigenvalue(&gap))
}
