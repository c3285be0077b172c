//! Closed-form divergences between Gaussian laws. Divergences are of `p`
//! from `q`, e.g. `χ²(p‖q) = ∫ p²/q − 1`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::{check_symmetric, min_eigenvalue, sym_sqrt, Cholesky, Matrix, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: Point,
    pub covariance: Matrix,
}

impl GaussianParams {
    pub fn new(mean: Point, covariance: Matrix) -> Result<Self> {
        if covariance.nrows() != mean.len() || !covariance.is_square() {
            return Err(Error::Dimension {
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        check_symmetric(&covariance)?;
        Cholesky::new(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Point::from_element(1, mean), Matrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianDivergences {
    /// `+∞` when `2Σ_q − Σ_p` is not positive definite.
    pub chi2: f64,
    pub kl: f64,
    pub w2sq: f64,
}

fn same_dim(p: &GaussianParams, q: &GaussianParams) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

pub fn gaussian_chi2(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    same_dim(p, q)?;
    let lp = Cholesky::new(&p.covariance)?.log_det();
    let lq = Cholesky::new(&q.covariance)?.log_det();
    let mixed = &q.covariance * 2.0 - &p.covariance;
    let Ok(m) = Cholesky::new(&mixed) else {
        return Ok(f64::INFINITY);
    };
    let delta = &p.mean - &q.mean;
    let quad = delta.dot(&m.solve(&delta));
    let log_ratio = lq - 0.5 * lp - 0.5 * m.log_det() + quad;
    Ok(log_ratio.exp_m1().max(0.0))
}

pub fn gaussian_kl(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    same_dim(p, q)?;
    let cq = Cholesky::new(&q.covariance)?;
    let cp = Cholesky::new(&p.covariance)?;
    let trace = (cq.inverse() * &p.covariance).trace();
    let delta = &p.mean - &q.mean;
    let quad = delta.dot(&cq.solve(&delta));
    Ok((0.5 * (trace + quad - p.dim() as f64 + cq.log_det() - cp.log_det())).max(0.0))
}

pub fn gaussian_w2sq(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    same_dim(p, q)?;
    let root_q = sym_sqrt(&q.covariance);
    let inner = &root_q * &p.covariance * &root_q;
    let cross = sym_sqrt(&inner);
    let bures = (&p.covariance + &q.covariance - cross * 2.0).trace();
    Ok(((&p.mean - &q.mean).norm_squared() + bures).max(0.0))
}

/// `H² = ∫(√p − √q)² = 2(1 − BC)`, ranging over `[0, 2]`.
pub fn gaussian_hellinger2(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    same_dim(p, q)?;
    let avg = (&p.covariance + &q.covariance) * 0.5;
    let ca = Cholesky::new(&avg)?;
    let lp = Cholesky::new(&p.covariance)?.log_det();
    let lq = Cholesky::new(&q.covariance)?.log_det();
    let delta = &p.mean - &q.mean;
    let log_bc = 0.25 * lp + 0.25 * lq - 0.5 * ca.log_det() - delta.dot(&ca.solve(&delta)) / 8.0;
    Ok((-2.0 * log_bc.exp_m1()).clamp(0.0, 2.0))
}

fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Probability of the interval `(a, b)` under `N(m, s²)`, computed from the
/// tail nearest to the interval so small masses keep their precision.
fn interval_mass(m: f64, s: f64, a: f64, b: f64) -> f64 {
    let (za, zb) = ((a - m) / s, (b - m) / s);
    if za >= 0.0 {
        upper_tail(za) - upper_tail(zb)
    } else if zb <= 0.0 {
        upper_tail(-zb) - upper_tail(-za)
    } else {
        1.0 - upper_tail(-za) - upper_tail(zb)
    }
}

/// Total variation between two univariate Gaussians from the crossing points
/// of their densities.
pub fn gaussian_tv_1d(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::Precondition("total variation is computed for 1-D Gaussians only".into()));
    }
    let (m1, v1, m2, v2) = (p.mean[0], p.covariance[(0, 0)], q.mean[0], q.covariance[(0, 0)]);
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    // ln p − ln q = A x² + B x + C.
    let a = 0.5 * (1.0 / v2 - 1.0 / v1);
    let b = m1 / v1 - m2 / v2;
    let c = 0.5 * (m2 * m2 / v2 - m1 * m1 / v1) + 0.5 * (v2 / v1).ln();
    let mut cuts = vec![f64::NEG_INFINITY];
    if a.abs() <= 1e-14 * (1.0 / v1 + 1.0 / v2) {
        if b == 0.0 {
            return Ok(0.0);
        }
        cuts.push(-c / b);
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let r = disc.sqrt();
            // Stable quadratic roots.
            let t = -0.5 * (b + b.signum() * r);
            let (r1, r2) = if t == 0.0 { (-r / (2.0 * a), r / (2.0 * a)) } else { (t / a, c / t) };
            cuts.push(r1.min(r2));
            cuts.push(r1.max(r2));
        }
    }
    cuts.push(f64::INFINITY);
    let mut tv = 0.0;
    for w in cuts.windows(2) {
        let diff = interval_mass(m1, s1, w[0], w[1]) - interval_mass(m2, s2, w[0], w[1]);
        tv += diff.max(0.0);
    }
    Ok(tv.clamp(0.0, 1.0))
}

pub fn gaussian_divergences(p: &GaussianParams, q: &GaussianParams) -> Result<GaussianDivergences> {
    Ok(GaussianDivergences {
        chi2: gaussian_chi2(p, q)?,
        kl: gaussian_kl(p, q)?,
        w2sq: gaussian_w2sq(p, q)?,
    })
}

/// Minimum eigenvalue of `2Σ_q − Σ_p`, the finiteness margin of `χ²(p‖q)`.
pub fn chi2_margin(p: &GaussianParams, q: &GaussianParams) -> f64 {
    min_eigenvalue(&(&q.covariance * 2.0 - &p.covariance))
}
