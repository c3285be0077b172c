//! 1-D finite-volume solver for `∂ₜμ = ∂ₓ(μ (φ″)⁻¹ ∂ₓ ln(μ/π))`.
//!
//! Cells carry probability masses. The interface flux is the arithmetic mean
//! of the neighbouring masses times `(φ″)⁻¹` at the interface times the
//! difference of `ln(μ/π)` across it. Boundaries are zero-flux, time stepping
//! is explicit Euler under the bound `dt ≤ 0.25 dx² min φ″`, and the mass is
//! renormalised after every step.
//!
//! `ln π` is computed from the potential directly, so targets with tails far
//! below the smallest positive double are handled without underflow.

use crate::error::{Error, Result};

/// Fraction of `dx² min φ″` allowed as a time step.
pub const CFL_FACTOR: f64 = 0.25;
pub const MIN_CELLS: usize = 64;
/// Half-width of the truncated domain in target standard deviations.
pub const TRUNCATION_SDS: f64 = 8.0;
/// Largest rise of `V` above its value at the mean kept in the domain. The
/// mass beyond it is below `e^{-40}`, and steeper tails would make the
/// explicit step lose positivity.
pub const TRUNCATION_HEIGHT: f64 = 40.0;

/// A 1-D potential `V` with `π ∝ exp(−V)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarPotential {
    /// `(x − m)² / (2σ²)`.
    Gaussian { mean: f64, variance: f64 },
    /// `cosh x − 1`.
    Cosh,
    /// `x⁴/4 + x²/2`.
    QuarticQuadratic,
    /// `|x|`; not differentiable at 0, so it cannot serve as a mirror.
    Laplace,
    /// `base + β x²`.
    Perturbed { base: Box<ScalarPotential>, beta: f64 },
}

impl ScalarPotential {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "variance",
                reason: format!("must be positive, got {variance}"),
            });
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, variance } => (x - mean).powi(2) / (2.0 * variance),
            Self::Cosh => x.cosh() - 1.0,
            Self::QuarticQuadratic => x.powi(4) / 4.0 + x * x / 2.0,
            Self::Laplace => x.abs(),
            Self::Perturbed { base, beta } => base.value(x) + beta * x * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, variance } => (x - mean) / variance,
            Self::Cosh => x.sinh(),
            Self::QuarticQuadratic => x.powi(3) + x,
            Self::Laplace => x.signum(),
            Self::Perturbed { base, beta } => base.derivative(x) + 2.0 * beta * x,
        }
    }

    /// `V″(x)`; zero away from the origin for the Laplace family.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { variance, .. } => 1.0 / variance,
            Self::Cosh => x.cosh(),
            Self::QuarticQuadratic => 3.0 * x * x + 1.0,
            Self::Laplace => 0.0,
            Self::Perturbed { base, beta } => base.second_derivative(x) + 2.0 * beta,
        }
    }

    pub fn strictly_convex(&self) -> bool {
        match self {
            Self::Laplace => false,
            Self::Perturbed { base, beta } => *beta > 0.0 || base.strictly_convex(),
            _ => true,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Gaussian { mean, variance } => format!("gaussian(m={mean}, var={variance})"),
            Self::Cosh => "cosh".into(),
            Self::QuarticQuadratic => "quartic-quadratic".into(),
            Self::Laplace => "laplace".into(),
            Self::Perturbed { base, beta } => format!("{}+{beta}x^2", base.name()),
        }
    }

    /// Mean and standard deviation of `π` by quadrature on a wide bracket.
    pub fn moments(&self) -> (f64, f64) {
        if let Self::Gaussian { mean, variance } = self {
            return (*mean, variance.sqrt());
        }
        // V grows at least linearly for every family here, so a bracket where
        // V exceeds its minimum by 60 holds all but e^{-60} of the mass.
        let centre = 0.0;
        let vmin = self.value(centre);
        let mut half = 1.0;
        while self.value(centre - half) - vmin < 60.0 || self.value(centre + half) - vmin < 60.0 {
            half *= 2.0;
        }
        let grid = Grid1D {
            lo: centre - half,
            hi: centre + half,
            n: 20_000,
        };
        let field = DensityField::from_log_density(&grid, |x| -self.value(x));
        let xs = grid.centers();
        let m: f64 = field.masses.iter().zip(&xs).map(|(p, x)| p * x).sum();
        let v: f64 = field.masses.iter().zip(&xs).map(|(p, x)| p * (x - m).powi(2)).sum();
        (m, v.sqrt())
    }

    /// `[m − 8s, m + 8s]` with `n` cells, shrunk on either side to the point
    /// where `V` exceeds its value at the mean by [`TRUNCATION_HEIGHT`].
    pub fn truncated_grid(&self, n: usize) -> Result<Grid1D> {
        let (m, s) = self.moments();
        let base = self.value(m);
        let edge = |end: f64| {
            if self.value(end) - base <= TRUNCATION_HEIGHT {
                return end;
            }
            let (mut inner, mut outer) = (m, end);
            for _ in 0..100 {
                let mid = 0.5 * (inner + outer);
                if self.value(mid) - base > TRUNCATION_HEIGHT {
                    outer = mid;
                } else {
                    inner = mid;
                }
            }
            outer
        };
        Grid1D::new(edge(m - TRUNCATION_SDS * s), edge(m + TRUNCATION_SDS * s), n)
    }
}

/// The mirror map of the 1-D dynamics, through `φ″`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarMirror {
    /// `φ = x²/2`; classical Langevin.
    Quadratic,
    /// `φ = V` of the target; Newton-Langevin.
    Newton,
    /// `φ = V` of a given potential.
    Potential(ScalarPotential),
}

impl ScalarMirror {
    pub fn second_derivative(&self, target: &ScalarPotential, x: f64) -> f64 {
        match self {
            Self::Quadratic => 1.0,
            Self::Newton => target.second_derivative(x),
            Self::Potential(p) => p.second_derivative(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Newton => "newton",
            Self::Potential(_) => "potential",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need finite lo < hi, got [{lo}, {hi}]"),
            });
        }
        if n < MIN_CELLS {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need at least {MIN_CELLS} cells, got {n}"),
            });
        }
        Ok(Self { lo, hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Position of the interface between cells `i` and `i + 1`.
    pub fn interface(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 1.0) * self.spacing()
    }
}

/// Cell probabilities on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub masses: Vec<f64>,
}

impl DensityField {
    /// Validates nonnegativity and unit mass within `1e-12`.
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if let Some(i) = masses.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Precondition(format!("cell {i} has invalid mass {}", masses[i])));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("total mass {total} differs from 1")));
        }
        Ok(Self { masses })
    }

    /// Masses proportional to `exp(log_density(xᵢ))` at the cell centres.
    pub fn from_log_density(grid: &Grid1D, log_density: impl Fn(f64) -> f64) -> Self {
        let logs: Vec<f64> = grid.centers().into_iter().map(log_density).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut masses: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = masses.iter().sum();
        masses.iter_mut().for_each(|m| *m /= total);
        Self { masses }
    }

    /// Masses proportional to `density(xᵢ)` at the cell centres.
    pub fn from_density(grid: &Grid1D, density: impl Fn(f64) -> f64) -> Result<Self> {
        let mut masses: Vec<f64> = grid.centers().into_iter().map(density).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Precondition("density has no mass on the grid".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Self::new(masses)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `E[f]` under the cell masses.
    pub fn expect(&self, grid: &Grid1D, f: impl Fn(f64) -> f64) -> f64 {
        self.masses.iter().enumerate().map(|(i, m)| m * f(grid.center(i))).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divergence {
    Chi2,
    Kl,
    Tv,
    Hellinger2,
}

impl Divergence {
    pub const ALL: [Divergence; 4] = [Self::Chi2, Self::Kl, Self::Tv, Self::Hellinger2];

    /// Metric name used in the CSV output.
    pub fn metric(self) -> &'static str {
        match self {
            Self::Chi2 => "chi2",
            Self::Kl => "kl",
            Self::Tv => "tv",
            Self::Hellinger2 => "hellinger2",
        }
    }
}

/// Cellwise divergence between `μ` and `π`. `χ²` and KL are `+∞` when `μ`
/// puts mass where `π` has none. `H² = Σ(√μ − √π)²` ranges over `[0, 2]`.
pub fn grid_divergence(mu: &DensityField, pi: &DensityField, kind: Divergence) -> Result<f64> {
    if mu.len() != pi.len() {
        return Err(Error::Dimension {
            expected: pi.len(),
            got: mu.len(),
        });
    }
    let pairs = mu.masses.iter().zip(&pi.masses);
    Ok(match kind {
        Divergence::Chi2 => {
            let mut s = 0.0;
            for (m, p) in pairs {
                if *p == 0.0 {
                    if *m > 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
                s += (m - p).powi(2) / p;
            }
            s
        }
        Divergence::Kl => {
            let mut s = 0.0;
            for (m, p) in pairs {
                if *m == 0.0 {
                    continue;
                }
                if *p == 0.0 {
                    return Ok(f64::INFINITY);
                }
                s += m * (m / p).ln();
            }
            s.max(0.0)
        }
        Divergence::Tv => 0.5 * pairs.map(|(m, p)| (m - p).abs()).sum::<f64>(),
        Divergence::Hellinger2 => pairs.map(|(m, p)| (m.sqrt() - p.sqrt()).powi(2)).sum(),
    })
}

/// A target discretised on a grid together with the interface mobilities.
#[derive(Clone, Debug)]
pub struct FpProblem {
    pub grid: Grid1D,
    pub target: ScalarPotential,
    pub mirror: ScalarMirror,
    /// Normalised `ln πᵢ` (log cell masses).
    pub log_pi: Vec<f64>,
    pub pi: DensityField,
    /// `(φ″)⁻¹` at each of the `n − 1` interior interfaces.
    mobility: Vec<f64>,
    min_curvature: f64,
}

/// `μ ∝ π e^{a x}`; for a Gaussian target of variance `σ²` this is the
/// target shifted by `a σ²`.
pub fn tilted(problem: &FpProblem, a: f64) -> DensityField {
    let grid = problem.grid;
    let logs: Vec<f64> = (0..grid.n).map(|i| problem.log_pi[i] + a * grid.center(i)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut masses: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    DensityField { masses }
}

/// Snapshots of `μ_t` and the largest mass drift seen before renormalising.
#[derive(Clone, Debug)]
pub struct FpTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    pub max_mass_drift: f64,
}

impl FpTrajectory {
    pub fn divergence_series(&self, pi: &DensityField, kind: Divergence) -> Result<Vec<f64>> {
        self.fields.iter().map(|f| grid_divergence(f, pi, kind)).collect()
    }
}

impl FpProblem {
    pub fn new(target: ScalarPotential, mirror: ScalarMirror, grid: Grid1D) -> Result<Self> {
        let pi = DensityField::from_log_density(&grid, |x| -target.value(x));
        let log_pi: Vec<f64> = {
            let logs: Vec<f64> = grid.centers().iter().map(|&x| -target.value(x)).collect();
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
            logs.into_iter().map(|l| l - lse).collect()
        };
        let mut min_curvature = f64::INFINITY;
        let mut mobility = Vec::with_capacity(grid.n - 1);
        for i in 0..grid.n - 1 {
            let c = mirror.second_derivative(&target, grid.interface(i));
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Degenerate {
                    family: "mirror",
                    detail: format!("φ″ = {c} at x = {}", grid.interface(i)),
                });
            }
            min_curvature = min_curvature.min(c);
            mobility.push(1.0 / c);
        }
        // The bound also sees the cell centres so a curvature minimum between
        // interfaces is not missed.
        for x in grid.centers() {
            min_curvature = min_curvature.min(mirror.second_derivative(&target, x));
        }
        Ok(Self {
            grid,
            target,
            mirror,
            log_pi,
            pi,
            mobility,
            min_curvature,
        })
    }

    /// Largest admissible explicit time step.
    pub fn max_dt(&self) -> f64 {
        CFL_FACTOR * self.grid.spacing().powi(2) * self.min_curvature
    }

    /// Evolves `mu0` to `t_end` with step `dt`, recording a snapshot at
    /// `t = 0`, every `record_every` steps, and at the end.
    pub fn evolve(&self, mu0: &DensityField, t_end: f64, dt: f64, record_every: usize) -> Result<FpTrajectory> {
        let bound = self.max_dt();
        if !(dt > 0.0) || dt > bound {
            return Err(Error::Cfl { dt, bound });
        }
        if mu0.len() != self.grid.n {
            return Err(Error::Dimension {
                expected: self.grid.n,
                got: mu0.len(),
            });
        }
        if let Some(i) = mu0.masses.iter().position(|m| !(*m > 0.0)) {
            return Err(Error::Precondition(format!("initial mass in cell {i} is not positive")));
        }
        let record_every = record_every.max(1);
        let n = self.grid.n;
        let dx = self.grid.spacing();
        let steps = (t_end / dt).round() as usize;
        let mut mu = mu0.masses.clone();
        let mut flux = vec![0.0; n - 1];
        let mut times = vec![0.0];
        let mut fields = vec![mu0.clone()];
        let mut max_drift: f64 = 0.0;
        for k in 1..=steps {
            for i in 0..n - 1 {
                let r_left = mu[i].ln() - self.log_pi[i];
                let r_right = mu[i + 1].ln() - self.log_pi[i + 1];
                let gradient = (r_right - r_left) / dx;
                flux[i] = 0.5 * (mu[i] + mu[i + 1]) * self.mobility[i] * gradient / dx;
            }
            for i in 0..n {
                let inflow = if i + 1 < n { flux[i] } else { 0.0 };
                let outflow = if i > 0 { flux[i - 1] } else { 0.0 };
                mu[i] += dt * (inflow - outflow);
            }
            let t = k as f64 * dt;
            let mut total = 0.0;
            for (i, m) in mu.iter().enumerate() {
                if !(*m > 0.0) {
                    return Err(Error::Stability { cell: i, time: t, mass: *m });
                }
                total += m;
            }
            max_drift = max_drift.max((total - 1.0).abs());
            mu.iter_mut().for_each(|m| *m /= total);
            if k % record_every == 0 || k == steps {
                times.push(t);
                fields.push(DensityField { masses: mu.clone() });
            }
        }
        Ok(FpTrajectory {
            times,
            fields,
            max_mass_drift: max_drift,
        })
    }
}

/// Least-squares fit of `ln v ≈ c − rate · t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const FIT_FLOOR: f64 = 1e-8;
pub const FIT_MIN_POINTS: usize = 5;

/// Fits the exponential rate of `values` over the window where each value
/// lies in `[1e-8, 0.5 · values[0]]`. Infinite values are skipped.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Dimension {
            expected: times.len(),
            got: values.len(),
        });
    }
    let ceiling = values.first().copied().unwrap_or(0.0) * 0.5;
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite() && **v >= FIT_FLOOR && **v <= ceiling)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if window.len() < FIT_MIN_POINTS {
        return Err(Error::Fit {
            needed: FIT_MIN_POINTS,
            found: window.len(),
        });
    }
    let n = window.len() as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = window.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = window.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = window.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    Ok(DecayFit {
        rate: (-slope).max(0.0),
        intercept,
        r_squared,
        points: window.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_problem(sigma: f64, mirror: ScalarMirror, n: usize) -> FpProblem {
        let target = ScalarPotential::gaussian(0.0, sigma * sigma).unwrap();
        let grid = target.truncated_grid(n).unwrap();
        FpProblem::new(target, mirror, grid).unwrap()
    }

    #[test]
    fn tilt_of_gaussian_is_a_shift() {
        let p = gaussian_problem(10.0, ScalarMirror::Newton, 128);
        let a = tilted(&p, 0.5 / 100.0);
        let b = DensityField::from_log_density(&p.grid, |x| -(x - 0.5f64).powi(2) / 200.0);
        assert!(a.masses.iter().zip(&b.masses).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn stationary_at_target() {
        let p = gaussian_problem(1.0, ScalarMirror::Newton, 256);
        let traj = p.evolve(&p.pi, 1.0, p.max_dt(), 100).unwrap();
        for f in &traj.fields {
            assert!(grid_divergence(f, &p.pi, Divergence::Chi2).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let p = gaussian_problem(1.0, ScalarMirror::Newton, 128);
        assert!(matches!(p.evolve(&p.pi, 1.0, 2.0 * p.max_dt(), 1), Err(Error::Cfl { .. })));
    }

    #[test]
    fn divergences_vanish_at_equality_and_saturate_when_disjoint() {
        let a = DensityField::new(vec![0.25; 4]).unwrap();
        for k in Divergence::ALL {
            assert_eq!(grid_divergence(&a, &a, k).unwrap(), 0.0);
        }
        let p = DensityField::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let q = DensityField::new(vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        assert_eq!(grid_divergence(&q, &p, Divergence::Tv).unwrap(), 1.0);
        assert!((grid_divergence(&q, &p, Divergence::Hellinger2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(grid_divergence(&q, &p, Divergence::Chi2).unwrap(), f64::INFINITY);
        assert_eq!(grid_divergence(&q, &p, Divergence::Kl).unwrap(), f64::INFINITY);
    }

    #[test]
    fn gaussian_grid_divergences_match_closed_forms() {
        let target = ScalarPotential::gaussian(0.0, 1.0).unwrap();
        let grid = Grid1D::new(-12.0, 12.0, 4000).unwrap();
        let pi = DensityField::from_log_density(&grid, |x| -target.value(x));
        let mu = DensityField::from_log_density(&grid, |x| -(x - 0.5f64).powi(2) / 2.0);
        let chi2 = grid_divergence(&mu, &pi, Divergence::Chi2).unwrap();
        let kl = grid_divergence(&mu, &pi, Divergence::Kl).unwrap();
        assert!((chi2 - (0.25f64.exp() - 1.0)).abs() < 1e-3);
        assert!((kl - 0.125).abs() < 1e-3);
        // TV = 2Φ(m/2) − 1 and H² = 2(1 − e^{−m²/8}) for unit-variance shifts.
        let tv = grid_divergence(&mu, &pi, Divergence::Tv).unwrap();
        let erf_quarter_sqrt2 = statrs::function::erf::erf(0.25 / 2f64.sqrt());
        assert!((tv - erf_quarter_sqrt2).abs() < 1e-3);
        let h2 = grid_divergence(&mu, &pi, Divergence::Hellinger2).unwrap();
        assert!((h2 - 2.0 * (1.0 - (-0.25f64 / 8.0).exp())).abs() < 1e-3);
    }

    #[test]
    fn fit_exact_exponentials() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let v: Vec<f64> = t.iter().map(|t| 7.0 * (-3.0 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap().rate - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_ou_chi_squared() {
        // χ²(N(m e^{−t}, σ²) ‖ N(0, σ²)) = exp(m² e^{−2t} / σ²) − 1 with m = 0.5, σ = 10.
        let t: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|t| (0.0025 * (-2.0 * t).exp()).exp_m1()).collect();
        let fit = fit_decay_rate(&t, &v).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-3, "{}", fit.rate);
    }

    #[test]
    fn fit_needs_points() {
        let r = fit_decay_rate(&[0.0, 1.0, 2.0], &[1.0, 0.1, 0.01]);
        assert!(matches!(r, Err(Error::Fit { needed: 5, found: 2 })));
    }

    #[test]
    fn newton_rate_is_two_for_both_scales() {
        for sigma in [1.0, 10.0] {
            let p = gaussian_problem(sigma, ScalarMirror::Newton, 256);
            let mu0 = tilted(&p, 0.5 / (sigma * sigma));
            let dt = p.max_dt();
            let traj = p.evolve(&mu0, 8.0, dt, (0.05 / dt).ceil() as usize).unwrap();
            let chi2 = traj.divergence_series(&p.pi, Divergence::Chi2).unwrap();
            let fit = fit_decay_rate(&traj.times, &chi2).unwrap();
            assert!((fit.rate - 2.0).abs() < 0.1, "sigma {sigma}: rate {}", fit.rate);
            assert!(chi2.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            assert!(traj.max_mass_drift < 1e-10);
        }
    }

    #[test]
    fn cosh_rate_is_at_least_two() {
        let target = ScalarPotential::Cosh;
        let grid = target.truncated_grid(512).unwrap();
        let p = FpProblem::new(target, ScalarMirror::Newton, grid).unwrap();
        let mu0 = tilted(&p, 0.5);
        let dt = p.max_dt();
        let traj = p.evolve(&mu0, 8.0, dt, (0.05 / dt).ceil() as usize).unwrap();
        let chi2 = traj.divergence_series(&p.pi, Divergence::Chi2).unwrap();
        let fit = fit_decay_rate(&traj.times, &chi2).unwrap();
        assert!(fit.rate >= 2.0 * 0.95, "rate {}", fit.rate);
    }

    #[test]
    fn steep_tails_report_instability() {
        let target = ScalarPotential::Cosh;
        let grid = Grid1D::new(-6.5, 6.5, 256).unwrap();
        let p = FpProblem::new(target, ScalarMirror::Newton, grid).unwrap();
        let r = p.evolve(&tilted(&p, 0.5), 1.0, p.max_dt(), 100);
        assert!(matches!(r, Err(Error::Stability { .. })));
    }

    #[test]
    fn truncation_keeps_gaussians_at_eight_sds() {
        let g = ScalarPotential::gaussian(1.0, 4.0).unwrap().truncated_grid(128).unwrap();
        assert!((g.lo + 15.0).abs() < 1e-12 && (g.hi - 17.0).abs() < 1e-12);
        let c = ScalarPotential::Cosh.truncated_grid(128).unwrap();
        assert!((ScalarPotential::Cosh.value(c.hi) - TRUNCATION_HEIGHT).abs() < 1e-9);
    }

    #[test]
    fn moments_by_quadrature() {
        let (m, s) = ScalarPotential::Laplace.moments();
        assert!(m.abs() < 1e-10);
        assert!((s - 2f64.sqrt()).abs() < 1e-4);
    }
}
