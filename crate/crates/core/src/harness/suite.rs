//! The inequality suite and the property oracles run by `check`.

use crate::conjugate::{invert_gradient, GradientMap, InvertSettings};
use crate::diagnostics::gaussian::{gaussian_chi2, gaussian_hellinger2, gaussian_kl, gaussian_tv_1d};
use crate::diagnostics::inequalities::{
    exp_concave_kl_check, lojasiewicz_check, mirror_poincare_residual, perturbation_kl_bound_check,
    transport_inequality_check, uniform_field,
};
use crate::diagnostics::transport::{exact_w2_discrete, sinkhorn_distance, SinkhornSettings};
use crate::diagnostics::GaussianParams;
use crate::error::Result;
use crate::fokker_planck::{grid_divergence, DensityField, Divergence, FpProblem, Grid1D, ScalarMirror, ScalarPotential};
use crate::geometry::{Matrix, Point};
use crate::mirror::Mirror;
use crate::potentials::Potential;
use crate::rng::{NoiseStream, Purpose};

use super::output::CheckRecord;

/// Random smooth test functions per Brascamp–Lieb target.
pub const TEST_FUNCTIONS: usize = 20;
/// Allowed gap between variance and energy for linear test functions.
pub const LINEAR_EQUALITY_TOLERANCE: f64 = 1e-6;
pub const SWEEP_MEANS: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
pub const SWEEP_VARIANCES: [f64; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
pub const PERTURBATION_BETAS: [f64; 3] = [1e-3, 1e-2, 1e-1];
/// Cells of the quadrature grids.
const CELLS: usize = 4000;

/// Closed-form divergences of one sweep member against `N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub tag: String,
    pub mean: f64,
    pub variance: f64,
    pub chi2: f64,
    pub kl: f64,
    pub tv: f64,
    pub hellinger2: f64,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub checks: Vec<CheckRecord>,
    pub sweep: Vec<SweepRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn record(check: &str, instance: String, lhs: f64, rhs: f64, holds: bool) -> CheckRecord {
    CheckRecord {
        check: check.to_string(),
        instance,
        lhs,
        rhs,
        holds,
    }
}

/// `g(x) = a sin(w x + c) + b x + e x²` and its derivative.
#[derive(Clone, Copy, Debug)]
pub struct TestFunction {
    pub a: f64,
    pub w: f64,
    pub c: f64,
    pub b: f64,
    pub e: f64,
}

impl TestFunction {
    /// Draws coefficients on the natural length scale `scale` of the target.
    pub fn draw(stream: &mut NoiseStream, scale: f64) -> Self {
        Self {
            a: stream.normal() * scale,
            w: stream.uniform_in(0.2, 3.0) / scale,
            c: stream.uniform_in(0.0, std::f64::consts::TAU),
            b: stream.normal(),
            e: stream.normal() / scale,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.a * (self.w * x + self.c).sin() + self.b * x + self.e * x * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.a * self.w * (self.w * x + self.c).cos() + self.b + 2.0 * self.e * x
    }
}

fn brascamp_lieb(seed: u64, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let targets = [
        ("gaussian-var4", ScalarPotential::gaussian(0.0, 4.0)?),
        ("cosh", ScalarPotential::Cosh),
        ("quartic", ScalarPotential::QuarticQuadratic),
    ];
    for (t, (name, target)) in targets.iter().enumerate() {
        let grid = target.truncated_grid(CELLS)?;
        let (_, s) = target.moments();
        let mut stream = NoiseStream::new(seed, Purpose::Auxiliary, t as u32, 0);
        for k in 0..TEST_FUNCTIONS {
            let g = TestFunction::draw(&mut stream, s);
            let r = mirror_poincare_residual(&grid, target, &ScalarMirror::Newton, |x| g.value(x), |x| g.derivative(x))?;
            checks.push(record("brascamp-lieb", format!("{name} g{k}"), r.variance, r.energy, r.holds()));
        }
    }
    for var in [0.25, 1.0, 4.0, 100.0] {
        let target = ScalarPotential::gaussian(0.0, var)?;
        let grid = target.truncated_grid(CELLS)?;
        let r = mirror_poincare_residual(&grid, &target, &ScalarMirror::Newton, |x| 2.0 * x - 1.0, |_| 2.0)?;
        let holds = (r.variance - r.energy).abs() <= LINEAR_EQUALITY_TOLERANCE * r.energy.max(1.0);
        checks.push(record("brascamp-lieb-linear", format!("gaussian-var{var}"), r.variance, r.energy, holds));
    }
    Ok(())
}

fn exp_concave(checks: &mut Vec<CheckRecord>) -> Result<()> {
    let target = ScalarPotential::gaussian(0.0, 1.0)?;
    let grid = target.truncated_grid(CELLS)?;
    let pi = DensityField::from_log_density(&grid, |x| -target.value(x));
    let c = exp_concave_kl_check(&grid, &pi, |_| 3.7, 0.5)?;
    checks.push(record("exp-concave-kl", "gaussian b=const nu=0.5".into(), c.kl, c.bound, c.holds));

    let unit = Grid1D::new(0.0, 1.0, 100_000)?;
    for nu in [0.1, 1.0, 5.0] {
        let c = exp_concave_kl_check(&unit, &uniform_field(&unit), |x| -nu * x.ln(), nu)?;
        checks.push(record("exp-concave-kl", format!("unif[0,1] b=-nu ln x nu={nu}"), c.kl, c.bound, c.holds));
    }

    let sym = Grid1D::new(-1.0, 1.0, 100_000)?;
    for beta in [1e-4, 1e-2, 1.0] {
        let c = exp_concave_kl_check(&sym, &uniform_field(&sym), |x| -beta * (1.0 - x * x).ln(), beta)?;
        checks.push(record("exp-concave-kl", format!("unif[-1,1] b=beta barrier beta={beta}"), c.kl, c.bound, c.holds));
    }
    Ok(())
}

fn perturbation(checks: &mut Vec<CheckRecord>) -> Result<()> {
    let wide = Grid1D::new(-60.0, 60.0, 60_000)?;
    let gauss = ScalarPotential::gaussian(0.0, 1.0)?;
    let gauss_grid = gauss.truncated_grid(CELLS)?;
    for beta in PERTURBATION_BETAS {
        let c = perturbation_kl_bound_check(&wide, &ScalarPotential::Laplace, beta)?;
        checks.push(record("perturbation-kl", format!("laplace beta={beta}"), c.kl, c.bound, c.holds));
        let c = perturbation_kl_bound_check(&gauss_grid, &gauss, beta)?;
        checks.push(record("perturbation-kl", format!("gaussian beta={beta}"), c.kl, c.bound, c.holds));
    }
    Ok(())
}

fn sweep(checks: &mut Vec<CheckRecord>) -> Result<Vec<SweepRow>> {
    let grid = Grid1D::new(-12.0, 12.0, CELLS)?;
    let pi = DensityField::from_log_density(&grid, |x| -x * x / 2.0);
    let q = GaussianParams::scalar(0.0, 1.0)?;
    let mut rows = Vec::new();
    for &m in &SWEEP_MEANS {
        for &v in &SWEEP_VARIANCES {
            let instance = format!("N({m}, {v}) vs N(0, 1)");
            let mu = DensityField::from_log_density(&grid, |x| -(x - m) * (x - m) / (2.0 * v));
            let l = lojasiewicz_check(&grid, &pi, &mu, 1.0)?;
            checks.push(record("lojasiewicz", instance.clone(), l.lhs, l.rhs, l.holds));
            let p = GaussianParams::scalar(m, v)?;
            let t = transport_inequality_check(&p, &q, 1.0)?;
            checks.push(record("transport-9", instance.clone(), t.w2sq, t.bound9, t.holds9()));
            checks.push(record("transport-8", instance, t.w2sq, t.bound8, t.holds8()));
            rows.push(SweepRow {
                tag: format!("gauss-m{m}-v{v}"),
                mean: m,
                variance: v,
                chi2: gaussian_chi2(&p, &q)?,
                kl: gaussian_kl(&p, &q)?,
                tv: gaussian_tv_1d(&p, &q)?,
                hellinger2: gaussian_hellinger2(&p, &q)?,
            });
        }
    }
    Ok(rows)
}

/// Every inequality check of the `inequality-suite` preset.
pub fn inequality_suite(seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    brascamp_lieb(seed, &mut checks)?;
    exp_concave(&mut checks)?;
    perturbation(&mut checks)?;
    let sweep = sweep(&mut checks)?;
    Ok(SuiteReport { checks, sweep })
}

/// Oracle comparisons that complement the inequality suite: Sinkhorn
/// against exact assignment, gradient inversion round trips, Fokker–Planck
/// stationarity and the Gaussian divergence chain.
pub fn property_checks(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut checks = Vec::new();

    for run in 0..3u32 {
        let mut s = NoiseStream::new(seed, Purpose::Auxiliary, 100 + run, 0);
        let a: Vec<Point> = (0..32).map(|_| s.normal_vector(2)).collect();
        let b: Vec<Point> = (0..32).map(|_| s.normal_vector(2)).collect();
        let entropic = sinkhorn_distance(&a, &b, &SinkhornSettings::default())?;
        let exact = exact_w2_discrete(&a, &b)?;
        let gap = (entropic - exact).abs();
        checks.push(record("sinkhorn-vs-exact", format!("n=32 clouds #{run}"), gap, 5e-3, gap <= 5e-3));
    }

    let data = std::sync::Arc::new(super::data::generate_logistic_data(100, seed));
    let maps: Vec<(&str, Box<dyn GradientMap>)> = vec![
        ("quadratic", Box::new(Mirror::quadratic(2))),
        ("power-norm-1.5", Box::new(Mirror::power_norm(1.5, 2)?)),
        (
            "generalized-gaussian",
            Box::new(Potential::generalized_gaussian(Matrix::from_diagonal(&Point::from_column_slice(&[1.0, 4.0, 9.0])), 0.75)?),
        ),
        ("logistic", Box::new(Potential::logistic(data, 10.0)?)),
        ("box-barrier", Box::new(Mirror::barrier(Potential::box_barrier(vec![0.01, 1.0])?)?)),
    ];
    for (k, (name, map)) in maps.iter().enumerate() {
        let mut s = NoiseStream::new(seed, Purpose::Auxiliary, 200 + k as u32, 0);
        let mut worst: f64 = 0.0;
        let mut failed = 0;
        for _ in 0..100 {
            let x = if *name == "box-barrier" {
                Point::from_column_slice(&[s.uniform_in(-0.0099, 0.0099), s.uniform_in(-0.99, 0.99)])
            } else {
                s.normal_vector(map.dim()) + Point::from_element(map.dim(), 0.5)
            };
            let y = map.grad(&x)?;
            let warm = if *name == "box-barrier" {
                Point::zeros(2)
            } else {
                &x + s.normal_vector(map.dim()) * 0.01
            };
            match invert_gradient(map.as_ref(), &y, &warm, &InvertSettings::default()) {
                Ok(inv) => worst = worst.max((inv.point - &x).norm() / (1.0 + x.norm())),
                Err(_) => failed += 1,
            }
        }
        let holds = failed == 0 && worst <= 1e-7;
        checks.push(record("inversion-round-trip", format!("{name} x100"), worst, 1e-7, holds));
    }

    for (name, target) in [("gaussian", ScalarPotential::gaussian(0.0, 1.0)?), ("cosh", ScalarPotential::Cosh)] {
        let problem = FpProblem::new(target.clone(), ScalarMirror::Newton, target.truncated_grid(256)?)?;
        let traj = problem.evolve(&problem.pi, 1.0, problem.max_dt(), 100)?;
        let worst = traj
            .fields
            .iter()
            .map(|f| grid_divergence(f, &problem.pi, Divergence::Chi2))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(record("fp-stationarity", name.into(), worst, 1e-10, worst < 1e-10));
    }

    let q = GaussianParams::scalar(0.0, 1.0)?;
    let mut worst_gap = f64::NEG_INFINITY;
    for &m in &SWEEP_MEANS {
        for &v in &[0.5, 1.0, 1.5] {
            let p = GaussianParams::scalar(m, v)?;
            let (tv, h2, kl, chi2) = (
                gaussian_tv_1d(&p, &q)?,
                gaussian_hellinger2(&p, &q)?,
                gaussian_kl(&p, &q)?,
                gaussian_chi2(&p, &q)?,
            );
            worst_gap = worst_gap.max(h2 - kl).max(kl - chi2).max(2.0 * tv * tv - kl);
        }
    }
    checks.push(record(
        "gaussian-divergence-chain",
        "2TV^2 <= KL, H^2 <= KL <= chi2".into(),
        worst_gap,
        0.0,
        worst_gap <= 1e-12,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_function_derivative_matches_differences() {
        let mut s = NoiseStream::new(3, Purpose::Auxiliary, 0, 0);
        for _ in 0..10 {
            let g = TestFunction::draw(&mut s, 2.0);
            for x in [-1.3, 0.0, 2.2] {
                let fd = (g.value(x + 1e-6) - g.value(x - 1e-6)) / 2e-6;
                assert!((fd - g.derivative(x)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn suite_has_expected_shape() {
        let r = inequality_suite(0).unwrap();
        let count = |name: &str| r.checks.iter().filter(|c| c.check == name).count();
        assert_eq!(count("brascamp-lieb"), 3 * TEST_FUNCTIONS);
        assert_eq!(count("lojasiewicz"), SWEEP_MEANS.len() * SWEEP_VARIANCES.len());
        assert_eq!(count("perturbation-kl"), 6);
        assert_eq!(r.sweep.len(), 63);
        let failing: Vec<_> = r.checks.iter().filter(|c| !c.holds).collect();
        assert!(failing.is_empty(), "{failing:#?}");
    }
}
