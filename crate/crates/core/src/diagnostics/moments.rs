//! Moment errors of sample clouds.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{Cholesky, Matrix, Point};

/// Family whose scatter matrix is being estimated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScatterFamily {
    Gaussian,
    /// Density `∝ exp(−⟨x, Σ⁻¹x⟩^γ / 2)`.
    GeneralizedGaussian { gamma: f64 },
}

impl ScatterFamily {
    /// `E⟨X, Σ⁻¹X⟩` in dimension `d`: `d` for the Gaussian and
    /// `2^{1/γ} Γ((d+2)/(2γ)) / Γ(d/(2γ))` in general.
    pub fn radial_second_moment(self, d: usize) -> f64 {
        match self {
            Self::Gaussian => d as f64,
            Self::GeneralizedGaussian { gamma } => {
                let d = d as f64;
                let k = 2.0 * gamma;
                ((1.0 / gamma) * std::f64::consts::LN_2 + ln_gamma((d + 2.0) / k) - ln_gamma(d / k)).exp()
            }
        }
    }
}

/// `‖mean(cloud) − target‖²`.
pub fn mean_error(cloud: &[Point], target: &Point) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::Precondition("empty sample cloud".into()));
    }
    let mut m = Point::zeros(target.len());
    for x in cloud {
        if x.len() != target.len() {
            return Err(Error::Dimension {
                expected: target.len(),
                got: x.len(),
            });
        }
        m += x;
    }
    m /= cloud.len() as f64;
    Ok((m - target).norm_squared())
}

/// `(1/n) Σ xᵢxᵢᵀ`.
pub fn second_moment(cloud: &[Point]) -> Result<Matrix> {
    let Some(first) = cloud.first() else {
        return Err(Error::Precondition("empty sample cloud".into()));
    };
    let d = first.len();
    let mut s = Matrix::zeros(d, d);
    for x in cloud {
        s.ger(1.0, x, x, 1.0);
    }
    Ok(s / cloud.len() as f64)
}

/// Scatter estimate `Σ̂ = S · d / E⟨X, Σ⁻¹X⟩` from a raw second moment `S`,
/// and its relative squared error `‖Σ̂ − Σ‖²_F / ‖Σ‖²_F`.
pub fn scatter_error_from_moment(moment: &Matrix, sigma: &Matrix, family: ScatterFamily) -> Result<f64> {
    if moment.shape() != sigma.shape() {
        return Err(Error::Dimension {
            expected: sigma.nrows(),
            got: moment.nrows(),
        });
    }
    Cholesky::new(moment).map_err(|_| Error::Precondition("second-moment matrix is rank deficient".into()))?;
    let d = sigma.nrows();
    let estimate = moment * (d as f64 / family.radial_second_moment(d));
    Ok((estimate - sigma).norm_squared() / sigma.norm_squared())
}

/// Relative squared scatter error of a cloud; needs more points than
/// dimensions.
pub fn scatter_error(cloud: &[Point], sigma: &Matrix, family: ScatterFamily) -> Result<f64> {
    if cloud.len() <= sigma.nrows() {
        return Err(Error::Precondition(format!(
            "scatter estimation needs more than {} points, got {}",
            sigma.nrows(),
            cloud.len()
        )));
    }
    scatter_error_from_moment(&second_moment(cloud)?, sigma, family)
}
