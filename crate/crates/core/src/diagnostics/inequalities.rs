//! Quadrature checks of functional inequalities for 1-D laws on a grid.
//!
//! Masses are cell probabilities, so density ratios are mass ratios and
//! derivatives are taken across cell interfaces.

use crate::error::{Error, Result};
use crate::fokker_planck::{grid_divergence, DensityField, Divergence, Grid1D, ScalarMirror, ScalarPotential};

use super::gaussian::{gaussian_chi2, gaussian_w2sq, GaussianParams};

/// Slack for the Poincaré-type comparisons.
pub const POINCARE_SLACK: f64 = 1e-8;
/// Slack for the gradient-domination comparison.
pub const LOJASIEWICZ_SLACK: f64 = 1e-8;
/// Slack for the exp-concave KL bound.
pub const EXP_CONCAVE_SLACK: f64 = 1e-8;
/// Slack for the perturbation KL bound.
pub const PERTURBATION_SLACK: f64 = 1e-10;

fn same_len(a: &DensityField, grid: &Grid1D) -> Result<()> {
    if a.len() != grid.n {
        return Err(Error::Dimension {
            expected: grid.n,
            got: a.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareResidual {
    /// `var_π g`.
    pub variance: f64,
    /// `E_π[(g′)² / φ″]`.
    pub energy: f64,
}

impl PoincareResidual {
    pub fn holds(&self) -> bool {
        self.variance <= self.energy + POINCARE_SLACK
    }
}

/// Both sides of the mirror Poincaré inequality with curvature `φ″`.
pub fn poincare_terms(
    grid: &Grid1D,
    pi: &DensityField,
    curvature: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    g_prime: impl Fn(f64) -> f64,
) -> Result<PoincareResidual> {
    same_len(pi, grid)?;
    let mean = pi.expect(grid, &g);
    let variance = pi.expect(grid, |x| (g(x) - mean).powi(2));
    let mut energy = 0.0;
    for (i, m) in pi.masses.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        let x = grid.center(i);
        let c = curvature(x);
        if !(c > 0.0) {
            return Err(Error::Precondition(format!("mirror curvature {c} at x = {x} is not positive")));
        }
        energy += m * g_prime(x).powi(2) / c;
    }
    Ok(PoincareResidual { variance, energy })
}

/// Mirror Poincaré residual for the target `e^{−V}` discretised on `grid`.
pub fn mirror_poincare_residual(
    grid: &Grid1D,
    target: &ScalarPotential,
    mirror: &ScalarMirror,
    g: impl Fn(f64) -> f64,
    g_prime: impl Fn(f64) -> f64,
) -> Result<PoincareResidual> {
    let pi = DensityField::from_log_density(grid, |x| -target.value(x));
    poincare_terms(grid, &pi, |x| mirror.second_derivative(target, x), g, g_prime)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `χ²(μ‖π)^{3/2} ≤ (9 C_P / 4) ∫ |∂(μ/π)|² dμ`.
pub fn lojasiewicz_check(grid: &Grid1D, pi: &DensityField, mu: &DensityField, c_p: f64) -> Result<InequalityCheck> {
    same_len(pi, grid)?;
    same_len(mu, grid)?;
    if mu.masses.iter().zip(&pi.masses).any(|(m, p)| *p == 0.0 && *m > 0.0) {
        return Err(Error::Precondition("μ is not absolutely continuous with respect to π".into()));
    }
    let chi2 = grid_divergence(mu, pi, Divergence::Chi2)?;
    let ratio: Vec<f64> = mu
        .masses
        .iter()
        .zip(&pi.masses)
        .map(|(m, p)| if *p > 0.0 { m / p } else { 0.0 })
        .collect();
    let dx = grid.spacing();
    let mut fisher = 0.0;
    for i in 0..grid.n - 1 {
        if pi.masses[i] == 0.0 || pi.masses[i + 1] == 0.0 {
            continue;
        }
        let slope = (ratio[i + 1] - ratio[i]) / dx;
        fisher += 0.5 * (mu.masses[i] + mu.masses[i + 1]) * slope * slope;
    }
    let lhs = chi2.powf(1.5);
    let rhs = 2.25 * c_p * fisher;
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + LOJASIEWICZ_SLACK,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportCheck {
    pub w2sq: f64,
    pub chi2: f64,
    /// `9 C_P √χ²`.
    pub bound9: f64,
    /// `8 C_P √χ²`, the square-root member of the sharper family.
    pub bound8: f64,
    /// `2 C_P χ²`.
    pub bound_linear: f64,
}

impl TransportCheck {
    pub fn holds9(&self) -> bool {
        self.w2sq <= self.bound9
    }

    pub fn holds8(&self) -> bool {
        self.w2sq <= self.bound8
    }

    pub fn holds_linear(&self) -> bool {
        self.w2sq <= self.bound_linear
    }
}

/// Transport-cost bounds for `μ = p` against `π = q` from closed forms.
pub fn transport_inequality_check(p: &GaussianParams, q: &GaussianParams, c_p: f64) -> Result<TransportCheck> {
    let w2sq = gaussian_w2sq(p, q)?;
    let chi2 = gaussian_chi2(p, q)?;
    let root = chi2.sqrt();
    Ok(TransportCheck {
        w2sq,
        chi2,
        bound9: 9.0 * c_p * root,
        bound8: 8.0 * c_p * root,
        bound_linear: 2.0 * c_p * chi2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlBound {
    pub kl: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Pairs of grid points per side used by the midpoint concavity test.
const CONCAVITY_SAMPLES: usize = 64;

/// `KL(π̃‖π) ≤ ν` for `π̃ ∝ e^{−b} π`, after checking midpoint concavity of
/// `e^{−b/ν}` on the support of `π`.
pub fn exp_concave_kl_check(grid: &Grid1D, pi: &DensityField, b: impl Fn(f64) -> f64, nu: f64) -> Result<KlBound> {
    same_len(pi, grid)?;
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("must be positive, got {nu}"),
        });
    }
    let support: Vec<f64> = (0..grid.n).filter(|&i| pi.masses[i] > 0.0).map(|i| grid.center(i)).collect();
    if support.is_empty() {
        return Err(Error::Precondition("π has empty support".into()));
    }
    let h = |x: f64| (-b(x) / nu).exp();
    let stride = (support.len() / CONCAVITY_SAMPLES).max(1);
    let picks: Vec<f64> = support.iter().step_by(stride).cloned().collect();
    for (k, &x) in picks.iter().enumerate() {
        for &y in &picks[k + 1..] {
            let (hx, hy, hm) = (h(x), h(y), h((x + y) / 2.0));
            if hm < 0.5 * (hx + hy) - 1e-12 * (1.0 + hx.abs() + hy.abs()) {
                return Err(Error::Precondition(format!(
                    "exp(-b/nu) fails midpoint concavity between {x} and {y}"
                )));
            }
        }
    }
    let logs: Vec<f64> = (0..grid.n)
        .map(|i| {
            if pi.masses[i] > 0.0 {
                pi.masses[i].ln() - b(grid.center(i))
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ln_z = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let mut kl = 0.0;
    for (i, l) in logs.iter().enumerate() {
        if pi.masses[i] > 0.0 {
            let tilted = (l - ln_z).exp();
            kl += tilted * (l - ln_z - pi.masses[i].ln());
        }
    }
    let kl = kl.max(0.0);
    Ok(KlBound {
        kl,
        bound: nu,
        holds: kl <= nu + EXP_CONCAVE_SLACK,
    })
}

/// `KL(π‖π_β) ≤ β E_π x²` with `π_β ∝ π e^{−β x²}`.
pub fn perturbation_kl_bound_check(grid: &Grid1D, target: &ScalarPotential, beta: f64) -> Result<KlBound> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be nonnegative, got {beta}"),
        });
    }
    let pi = DensityField::from_log_density(grid, |x| -target.value(x));
    let perturbed = DensityField::from_log_density(grid, |x| -target.value(x) - beta * x * x);
    let kl = grid_divergence(&pi, &perturbed, Divergence::Kl)?;
    let bound = beta * pi.expect(grid, |x| x * x);
    Ok(KlBound {
        kl,
        bound,
        holds: kl <= bound + PERTURBATION_SLACK,
    })
}

/// Uniform masses on `grid`.
pub fn uniform_field(grid: &Grid1D) -> DensityField {
    DensityField {
        masses: vec![1.0 / grid.n as f64; grid.n],
    }
}
