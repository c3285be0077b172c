//! Target potentials `V` with `π ∝ exp(−V)`.
//!
//! Each family provides its value, gradient, Hessian and a factor `M` with
//! `M Mᵀ = ∇²V`. Families whose gradient has a closed-form inverse also
//! expose it through [`Potential::dual_gradient`], which the Newton-Langevin
//! step uses before falling back to numerical inversion.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Cholesky, Matrix, Point};

/// A covariance (scatter) matrix together with its precision and the
/// Cholesky factor of the precision.
#[derive(Clone, Debug)]
pub struct Scatter {
    pub covariance: Matrix,
    pub precision: Matrix,
    /// Lower-triangular `L` with `L Lᵀ = Σ⁻¹`.
    pub precision_factor: Matrix,
}

impl Scatter {
    pub fn new(covariance: Matrix) -> Result<Self> {
        let precision = Cholesky::new(&covariance)?.inverse();
        let precision_factor = Cholesky::new(&precision)?.into_lower();
        Ok(Self {
            covariance,
            precision,
            precision_factor,
        })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let cov = Matrix::from_diagonal(&Point::from_column_slice(variances));
        Self::new(cov)
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Covariates and binary responses for Bayesian logistic regression.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticData {
    /// `n × d` design matrix, one observation per row.
    pub covariates: Matrix,
    /// Responses in `{0, 1}`.
    pub labels: Vec<f64>,
}

impl LogisticData {
    pub fn new(covariates: Matrix, labels: Vec<f64>) -> Result<Self> {
        if covariates.nrows() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} rows of covariates but {} labels",
                covariates.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|y| **y != 0.0 && **y != 1.0) {
            return Err(Error::Dataset(format!("label {bad} is not 0 or 1")));
        }
        Ok(Self { covariates, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    /// Reads a CSV with header `x1,...,xd,y`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Dataset(e.to_string()))?
            .clone();
        let d = headers.len().saturating_sub(1);
        if d == 0 || &headers[d] != "y" {
            return Err(Error::Dataset("last column must be `y`".into()));
        }
        for (i, name) in headers.iter().take(d).enumerate() {
            if name != format!("x{}", i + 1) {
                return Err(Error::Dataset(format!("column {} should be x{}, found `{name}`", i + 1, i + 1)));
            }
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Dataset(e.to_string()))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Dataset(format!("bad number `{s}`: {e}")))
            };
            for field in record.iter().take(d) {
                values.push(parse(field)?);
            }
            labels.push(parse(&record[d])?);
        }
        let covariates = Matrix::from_row_slice(labels.len(), d, &values);
        Self::new(covariates, labels)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for j in 0..d {
            out.push_str(&format!("x{},", j + 1));
        }
        out.push_str("y\n");
        for i in 0..self.len() {
            for j in 0..d {
                out.push_str(&format!("{:.16e},", self.covariates[(i, j)]));
            }
            out.push_str(&format!("{}\n", self.labels[i]));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum Potential {
    /// `⟨x, Σ⁻¹x⟩ / 2`.
    Gaussian(Scatter),
    /// `⟨x, Σ⁻¹x⟩^γ / 2` with `γ > 1/2`.
    GeneralizedGaussian { scatter: Scatter, gamma: f64 },
    /// `‖x‖ + β‖x − c‖²`.
    NormPlusQuadratic { beta: f64, center: Point },
    /// Negative log posterior of logistic regression under an isotropic
    /// Gaussian prior.
    LogisticPosterior {
        data: Arc<LogisticData>,
        prior_variance: f64,
    },
    /// `−Σᵢ ln(aᵢ² − xᵢ²)` on the box `∏[−aᵢ, aᵢ]`.
    BoxBarrier { half_widths: Vec<f64> },
    /// `scale · base`.
    Scaled { base: Box<Potential>, scale: f64 },
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Potential {
    pub fn gaussian(covariance: Matrix) -> Result<Self> {
        Ok(Self::Gaussian(Scatter::new(covariance)?))
    }

    pub fn gaussian_diagonal(variances: &[f64]) -> Result<Self> {
        Ok(Self::Gaussian(Scatter::diagonal(variances)?))
    }

    pub fn generalized_gaussian(covariance: Matrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.5) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must exceed 1/2, got {gamma}"),
            });
        }
        Ok(Self::GeneralizedGaussian {
            scatter: Scatter::new(covariance)?,
            gamma,
        })
    }

    pub fn norm_plus_quadratic(beta: f64, center: Point) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be nonnegative, got {beta}"),
            });
        }
        Ok(Self::NormPlusQuadratic { beta, center })
    }

    pub fn logistic(data: Arc<LogisticData>, prior_variance: f64) -> Result<Self> {
        if !(prior_variance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "prior_variance",
                reason: format!("must be positive, got {prior_variance}"),
            });
        }
        if data.dim() == 0 {
            return Err(Error::Dataset("dataset has no covariates".into()));
        }
        Ok(Self::LogisticPosterior {
            data,
            prior_variance,
        })
    }

    pub fn box_barrier(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() || half_widths.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "half_widths",
                reason: "must be a nonempty list of positive reals".into(),
            });
        }
        Ok(Self::BoxBarrier { half_widths })
    }

    pub fn scaled(base: Potential, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be positive, got {scale}"),
            });
        }
        Ok(Self::Scaled {
            base: Box::new(base),
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(s) => s.dim(),
            Self::GeneralizedGaussian { scatter, .. } => scatter.dim(),
            Self::NormPlusQuadratic { center, .. } => center.len(),
            Self::LogisticPosterior { data, .. } => data.dim(),
            Self::BoxBarrier { half_widths } => half_widths.len(),
            Self::Scaled { base, .. } => base.dim(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::GeneralizedGaussian { .. } => "generalized-gaussian",
            Self::NormPlusQuadratic { .. } => "norm-plus-quadratic",
            Self::LogisticPosterior { .. } => "logistic-posterior",
            Self::BoxBarrier { .. } => "box-barrier",
            Self::Scaled { base, .. } => base.family(),
        }
    }

    /// Whether the gradient is undefined at the origin.
    pub fn singular_at_origin(&self) -> bool {
        match self {
            Self::NormPlusQuadratic { .. } => true,
            Self::GeneralizedGaussian { gamma, .. } => *gamma < 1.0,
            Self::Scaled { base, .. } => base.singular_at_origin(),
            _ => false,
        }
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        match self {
            Self::BoxBarrier { half_widths } => x.iter().zip(half_widths).all(|(xi, a)| xi.abs() < *a),
            Self::Scaled { base, .. } => base.in_domain(x),
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

    fn check_domain(&self, x: &Point) -> Result<()> {
        self.check_dim(x)?;
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.family(),
            })
        }
    }

    /// `V(x)`; `+∞` outside the box for barrier families.
    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            Self::Gaussian(s) => 0.5 * x.dot(&(&s.precision * x)),
            Self::GeneralizedGaussian { scatter, gamma } => {
                let q = x.dot(&(&scatter.precision * x));
                0.5 * q.powf(*gamma)
            }
            Self::NormPlusQuadratic { beta, center } => x.norm() + beta * (x - center).norm_squared(),
            Self::LogisticPosterior {
                data,
                prior_variance,
            } => {
                let t = &data.covariates * x;
                let likelihood: f64 = t
                    .iter()
                    .zip(&data.labels)
                    .map(|(ti, yi)| yi * ti - softplus(*ti))
                    .sum();
                x.norm_squared() / (2.0 * prior_variance) - likelihood
            }
            Self::BoxBarrier { half_widths } => {
                if !self.in_domain(x) {
                    return Ok(f64::INFINITY);
                }
                x.iter()
                    .zip(half_widths)
                    .map(|(xi, a)| -(a * a - xi * xi).ln())
                    .sum()
            }
            Self::Scaled { base, scale } => scale * base.value(x)?,
        })
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check_domain(x)?;
        Ok(match self {
            Self::Gaussian(s) => &s.precision * x,
            Self::GeneralizedGaussian { scatter, gamma } => {
                let px = &scatter.precision * x;
                let q = x.dot(&px);
                if q == 0.0 {
                    return Ok(Point::zeros(x.len()));
                }
                px * (gamma * q.powf(gamma - 1.0))
            }
            Self::NormPlusQuadratic { beta, center } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::NonDifferentiable {
                        family: self.family(),
                    });
                }
                x / r + (x - center) * (2.0 * beta)
            }
            Self::LogisticPosterior {
                data,
                prior_variance,
            } => {
                let t = &data.covariates * x;
                let resid = Point::from_iterator(
                    t.len(),
                    t.iter().zip(&data.labels).map(|(ti, yi)| sigmoid(*ti) - yi),
                );
                x / *prior_variance + data.covariates.transpose() * resid
            }
            Self::BoxBarrier { half_widths } => Point::from_iterator(
                x.len(),
                x.iter().zip(half_widths).map(|(xi, a)| 2.0 * xi / (a * a - xi * xi)),
            ),
            Self::Scaled { base, scale } => base.gradient(x)? * *scale,
        })
    }

    pub fn hessian(&self, x: &Point) -> Result<Matrix> {
        self.check_domain(x)?;
        let d = x.len();
        Ok(match self {
            Self::Gaussian(s) => s.precision.clone(),
            Self::GeneralizedGaussian { scatter, gamma } => {
                let px = &scatter.precision * x;
                let q = x.dot(&px);
                if q == 0.0 {
                    if *gamma == 1.0 {
                        return Ok(scatter.precision.clone());
                    }
                    return Err(Error::Degenerate {
                        family: self.family(),
                        detail: "Hessian is singular or unbounded at the origin".into(),
                    });
                }
                let c = gamma * q.powf(gamma - 1.0);
                (&scatter.precision + &px * px.transpose() * (2.0 * (gamma - 1.0) / q)) * c
            }
            Self::NormPlusQuadratic { beta, .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::Degenerate {
                        family: self.family(),
                        detail: "Hessian is unbounded at the origin".into(),
                    });
                }
                let u = x / r;
                (Matrix::identity(d, d) - &u * u.transpose()) / r + Matrix::identity(d, d) * (2.0 * beta)
            }
            Self::LogisticPosterior {
                data,
                prior_variance,
            } => {
                let mut h = Matrix::identity(d, d) / *prior_variance;
                for i in 0..data.len() {
                    let row = data.covariates.row(i);
                    let t = row.dot(&x.transpose());
                    let s = sigmoid(t);
                    let w = s * (1.0 - s);
                    h += row.transpose() * row * w;
                }
                h
            }
            Self::BoxBarrier { half_widths } => Matrix::from_diagonal(&Point::from_iterator(
                d,
                x.iter().zip(half_widths).map(|(xi, a)| {
                    let gap = a * a - xi * xi;
                    2.0 * (a * a + xi * xi) / (gap * gap)
                }),
            )),
            Self::Scaled { base, scale } => base.hessian(x)? * *scale,
        })
    }

    /// A matrix `M` with `M Mᵀ = ∇²V(x)`.
    ///
    /// Closed forms are used for the Gaussian, generalized Gaussian, norm and
    /// box families; the logistic posterior goes through Cholesky.
    pub fn hessian_factor(&self, x: &Point) -> Result<Matrix> {
        self.check_domain(x)?;
        let d = x.len();
        match self {
            Self::Gaussian(s) => Ok(s.precision_factor.clone()),
            Self::GeneralizedGaussian { scatter, gamma } => {
                let l = &scatter.precision_factor;
                let w = l.transpose() * x;
                let q = w.norm_squared();
                if q == 0.0 {
                    if *gamma == 1.0 {
                        return Ok(l.clone());
                    }
                    return Err(Error::Degenerate {
                        family: self.family(),
                        detail: "Hessian is singular or unbounded at the origin".into(),
                    });
                }
                // ∇²V = c L (I + 2(γ−1) ŵŵᵀ) Lᵀ and (I + αŵŵᵀ)² = I + 2(γ−1)ŵŵᵀ.
                let c = gamma * q.powf(gamma - 1.0);
                let alpha = (2.0 * gamma - 1.0).sqrt() - 1.0;
                let inner = Matrix::identity(d, d) + &w * w.transpose() * (alpha / q);
                Ok(l * inner * c.sqrt())
            }
            Self::NormPlusQuadratic { beta, .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::Degenerate {
                        family: self.family(),
                        detail: "Hessian is unbounded at the origin".into(),
                    });
                }
                let u = x / r;
                let radial = &u * u.transpose();
                let tangential = Matrix::identity(d, d) - &radial;
                Ok(radial * (2.0 * beta).sqrt() + tangential * (1.0 / r + 2.0 * beta).sqrt())
            }
            Self::BoxBarrier { .. } => {
                let h = self.hessian(x)?;
                Ok(Matrix::from_diagonal(&h.diagonal().map(f64::sqrt)))
            }
            Self::LogisticPosterior { .. } => Ok(Cholesky::new(&self.hessian(x)?)?.into_lower()),
            Self::Scaled { base, scale } => Ok(base.hessian_factor(x)? * scale.sqrt()),
        }
    }

    /// Closed-form `∇V*(y) = argmax_x {⟨x, y⟩ − V(x)}` when one exists.
    ///
    /// For the norm family, dual points inside the subdifferential at the
    /// origin map to the origin itself.
    pub fn dual_gradient(&self, y: &Point) -> Option<Result<Point>> {
        if let Err(e) = self.check_dim(y) {
            return Some(Err(e));
        }
        match self {
            Self::Gaussian(s) => Some(Ok(&s.covariance * y)),
            Self::GeneralizedGaussian { scatter, gamma } => {
                let sy = &scatter.covariance * y;
                let m = y.dot(&sy);
                if m == 0.0 {
                    return Some(Ok(Point::zeros(y.len())));
                }
                let q = (m / (gamma * gamma)).powf(1.0 / (2.0 * gamma - 1.0));
                Some(Ok(sy / (gamma * q.powf(gamma - 1.0))))
            }
            Self::NormPlusQuadratic { beta, center } => {
                if *beta <= 0.0 {
                    return None;
                }
                let z = y + center * (2.0 * beta);
                let nz = z.norm();
                if nz <= 1.0 {
                    return Some(Ok(Point::zeros(y.len())));
                }
                Some(Ok(z * ((nz - 1.0) / (2.0 * beta * nz))))
            }
            Self::BoxBarrier { half_widths } => Some(Ok(Point::from_iterator(
                y.len(),
                y.iter().zip(half_widths).map(|(yi, a)| {
                    let a2 = a * a;
                    yi * a2 / (1.0 + (1.0 + yi * yi * a2).sqrt())
                }),
            ))),
            Self::LogisticPosterior { .. } => None,
            Self::Scaled { base, scale } => base.dual_gradient(&(y / *scale)),
        }
    }

    /// Known mean of `π`, where the family makes it available.
    pub fn known_mean(&self) -> Option<Point> {
        match self {
            Self::Gaussian(_) | Self::GeneralizedGaussian { .. } => Some(Point::zeros(self.dim())),
            Self::BoxBarrier { .. } => Some(Point::zeros(self.dim())),
            Self::Scaled { base, .. } => match base.as_ref() {
                Self::BoxBarrier { .. } => Some(Point::zeros(self.dim())),
                _ => None,
            },
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{finite_diff_gradient, finite_diff_hessian, gradient_step, hessian_step, relative_error};
    use crate::rng::{NoiseStream, Purpose};

    fn pt(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    fn small_logistic() -> Potential {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, -1.0, -2.0, 0.1]);
        let data = LogisticData::new(x, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        Potential::logistic(Arc::new(data), 10.0).unwrap()
    }

    #[test]
    fn direct_values() {
        let g = Potential::gaussian_diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(g.value(&pt(&[1.0, 0.0])).unwrap(), 0.5);

        let gg = Potential::generalized_gaussian(Matrix::identity(2, 2), 0.75).unwrap();
        let v = gg.value(&pt(&[2.0, 0.0])).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);

        let npq = Potential::norm_plus_quadratic(0.0005, pt(&[1.0, 1.0])).unwrap();
        assert!((npq.value(&pt(&[1.0, 1.0])).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_gradient_and_hessian() {
        let g = Potential::gaussian_diagonal(&[1.0, 2.0]).unwrap();
        let grad = g.gradient(&pt(&[1.0, 2.0])).unwrap();
        assert!(relative_error(grad.as_slice(), &[1.0, 1.0]) < 1e-15);
        let h = g.hessian(&pt(&[5.0, -3.0])).unwrap();
        assert!((h - Matrix::from_diagonal(&pt(&[1.0, 0.5]))).amax() < 1e-15);
    }

    #[test]
    fn gaussian_factor_is_diagonal_root() {
        let g = Potential::gaussian_diagonal(&[1.0, 4.0]).unwrap();
        let m = g.hessian_factor(&pt(&[0.3, 0.3])).unwrap();
        assert!((m - Matrix::from_diagonal(&pt(&[1.0, 0.5]))).amax() < 1e-15);
        let id = Potential::gaussian_diagonal(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(id.hessian_factor(&pt(&[1.0, 2.0, 3.0])).unwrap(), Matrix::identity(3, 3));
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let p = small_logistic();
        let Potential::LogisticPosterior { data, .. } = &p else { unreachable!() };
        let mut expected = Point::zeros(2);
        for i in 0..data.len() {
            expected += data.covariates.row(i).transpose() * (0.5 - data.labels[i]);
        }
        let g = p.gradient(&Point::zeros(2)).unwrap();
        assert!((g - expected).amax() < 1e-15);
    }

    #[test]
    fn norm_hessian_at_unit_point() {
        let npq = Potential::norm_plus_quadratic(0.0005, pt(&[1.0, 1.0])).unwrap();
        let h = npq.hessian(&pt(&[1.0, 0.0])).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.001, 0.0, 0.0, 1.001]);
        assert!((h - expected).amax() < 1e-15);
    }

    #[test]
    fn singular_points_error() {
        let npq = Potential::norm_plus_quadratic(0.0005, pt(&[1.0, 1.0])).unwrap();
        assert!(matches!(npq.gradient(&Point::zeros(2)), Err(Error::NonDifferentiable { .. })));
        assert!(matches!(npq.hessian(&Point::zeros(2)), Err(Error::Degenerate { .. })));
        let gg = Potential::generalized_gaussian(Matrix::identity(2, 2), 0.75).unwrap();
        assert!(matches!(gg.hessian(&Point::zeros(2)), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn box_outside_is_infinite() {
        let b = Potential::box_barrier(vec![0.01, 1.0]).unwrap();
        assert_eq!(b.value(&pt(&[0.02, 0.0])).unwrap(), f64::INFINITY);
        assert!(matches!(b.gradient(&pt(&[0.02, 0.0])), Err(Error::Domain { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let g = Potential::gaussian_diagonal(&[1.0, 1.0]).unwrap();
        assert!(matches!(g.value(&pt(&[1.0])), Err(Error::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn invalid_parameters() {
        assert!(Potential::generalized_gaussian(Matrix::identity(2, 2), 0.5).is_err());
        assert!(Potential::box_barrier(vec![0.0]).is_err());
        assert!(Potential::scaled(Potential::gaussian_diagonal(&[1.0]).unwrap(), 0.0).is_err());
        assert!(Potential::norm_plus_quadratic(-1.0, pt(&[0.0])).is_err());
    }

    /// Interior sample for each family.
    fn families() -> Vec<(Potential, Box<dyn Fn(&mut NoiseStream) -> Point>)> {
        let cov = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5]);
        vec![
            (
                Potential::gaussian(cov.clone()).unwrap(),
                Box::new(|s: &mut NoiseStream| s.normal_vector(3)),
            ),
            (
                Potential::generalized_gaussian(cov.clone(), 0.75).unwrap(),
                Box::new(|s: &mut NoiseStream| s.normal_vector(3) + pt(&[0.5, 0.0, 0.0])),
            ),
            (
                Potential::generalized_gaussian(cov, 1.6).unwrap(),
                Box::new(|s: &mut NoiseStream| s.normal_vector(3)),
            ),
            (
                Potential::norm_plus_quadratic(0.05, pt(&[1.0, 1.0])).unwrap(),
                Box::new(|s: &mut NoiseStream| {
                    let v = s.normal_vector(2);
                    let r = s.uniform_in(0.5, 3.0);
                    v.normalize() * r
                }),
            ),
            (small_logistic(), Box::new(|s: &mut NoiseStream| s.normal_vector(2))),
            (
                Potential::box_barrier(vec![0.01, 1.0]).unwrap(),
                Box::new(|s: &mut NoiseStream| pt(&[s.uniform_in(-0.008, 0.008), s.uniform_in(-0.8, 0.8)])),
            ),
            (
                Potential::scaled(Potential::box_barrier(vec![1.0, 2.0]).unwrap(), 3.0).unwrap(),
                Box::new(|s: &mut NoiseStream| pt(&[s.uniform_in(-0.8, 0.8), s.uniform_in(-1.6, 1.6)])),
            ),
        ]
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut s = NoiseStream::new(21, Purpose::Auxiliary, 0, 0);
        for (pot, draw) in families() {
            for _ in 0..50 {
                let x = draw(&mut s);
                let v = |p: &Point| pot.value(p).unwrap();
                // Box points near the wall need steps small relative to the gap.
                let wall = match &pot {
                    Potential::BoxBarrier { half_widths } => Some(half_widths.iter().cloned().fold(f64::MAX, f64::min)),
                    Potential::Scaled { base, .. } => match base.as_ref() {
                        Potential::BoxBarrier { half_widths } => Some(half_widths.iter().cloned().fold(f64::MAX, f64::min)),
                        _ => None,
                    },
                    _ => None,
                };
                let fd = finite_diff_gradient(v, &x, wall.map_or(gradient_step(&x), |a| 1e-6 * a)).unwrap();
                let g = pot.gradient(&x).unwrap();
                let err = relative_error(g.as_slice(), fd.as_slice());
                assert!(err < 1e-5, "{} gradient err {err} at {x}", pot.family());

                let step = wall.map_or(hessian_step(&x), |a| 1e-4 * a);
                let fh = finite_diff_hessian(v, &x, step).unwrap();
                let h = pot.hessian(&x).unwrap();
                let err = relative_error(h.as_slice(), fh.as_slice());
                assert!(err < 1e-4, "{} hessian err {err} at {x}", pot.family());

                let m = pot.hessian_factor(&x).unwrap();
                let resid = (&m * m.transpose() - &h).norm() / h.norm();
                assert!(resid < 1e-10, "{} factor residual {resid}", pot.family());
            }
        }
    }

    #[test]
    fn midpoint_convexity() {
        let mut s = NoiseStream::new(22, Purpose::Auxiliary, 0, 0);
        for (pot, draw) in families() {
            for _ in 0..50 {
                let x = draw(&mut s);
                let y = draw(&mut s);
                let mid = (&x + &y) * 0.5;
                let lhs = pot.value(&mid).unwrap();
                let rhs = 0.5 * (pot.value(&x).unwrap() + pot.value(&y).unwrap());
                assert!(lhs <= rhs + 1e-12, "{}: {lhs} > {rhs}", pot.family());
            }
        }
    }

    #[test]
    fn box_barrier_is_exp_concave_with_nu_axes() {
        let a = vec![0.01, 1.0];
        let nu = a.len() as f64;
        let b = Potential::box_barrier(a).unwrap();
        let mut s = NoiseStream::new(23, Purpose::Auxiliary, 0, 0);
        let e = |p: &Point| (-b.value(p).unwrap() / nu).exp();
        for _ in 0..50 {
            let x = pt(&[s.uniform_in(-0.0099, 0.0099), s.uniform_in(-0.99, 0.99)]);
            let y = pt(&[s.uniform_in(-0.0099, 0.0099), s.uniform_in(-0.99, 0.99)]);
            let mid = (&x + &y) * 0.5;
            assert!(e(&mid) >= 0.5 * (e(&x) + e(&y)) - 1e-15);
        }
    }

    #[test]
    fn scaled_is_exact_multiple() {
        let base = small_logistic();
        let scaled = Potential::scaled(base.clone(), 0.37).unwrap();
        let x = pt(&[0.4, -1.2]);
        assert_eq!(scaled.gradient(&x).unwrap(), base.gradient(&x).unwrap() * 0.37);
        assert_eq!(scaled.hessian(&x).unwrap(), base.hessian(&x).unwrap() * 0.37);
        assert_eq!(scaled.value(&x).unwrap(), base.value(&x).unwrap() * 0.37);
    }

    #[test]
    fn closed_form_duals_invert_gradients() {
        let mut s = NoiseStream::new(24, Purpose::Auxiliary, 0, 0);
        for (pot, draw) in families() {
            for _ in 0..20 {
                let x = draw(&mut s);
                let Some(inv) = pot.dual_gradient(&pot.gradient(&x).unwrap()) else {
                    continue;
                };
                let back = inv.unwrap();
                assert!(relative_error(back.as_slice(), x.as_slice()) < 1e-9, "{}", pot.family());
            }
        }
    }

    #[test]
    fn norm_dual_inside_subdifferential_is_origin() {
        let npq = Potential::norm_plus_quadratic(0.0005, pt(&[1.0, 1.0])).unwrap();
        let x = npq.dual_gradient(&pt(&[0.3, -0.2])).unwrap().unwrap();
        assert_eq!(x, Point::zeros(2));
    }

    #[test]
    fn csv_round_trip() {
        let x = Matrix::from_row_slice(2, 2, &[0.125, -3.5, 1e-3, 7.0]);
        let data = LogisticData::new(x, vec![0.0, 1.0]).unwrap();
        let text = data.to_csv_string();
        assert!(text.starts_with("x1,x2,y\n"));
        let back = LogisticData::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_rejects_bad_headers_and_labels() {
        assert!(LogisticData::from_reader("a,b,y\n1,2,0\n".as_bytes()).is_err());
        assert!(LogisticData::from_reader("x1,x2,y\n1,2,3\n".as_bytes()).is_err());
        assert!(LogisticData::from_reader("x1,x2\n1,2\n".as_bytes()).is_err());
    }
}
