//! Mirror Poincaré, Łojasiewicz and transport inequalities evaluated on
//! grids and Gaussian closed forms, then the full suite.
//!
//! `cargo run --release --example inequality_checks`

use mirror_langevin::diagnostics::inequalities::{lojasiewicz_check, poincare_terms, transport_inequality_check};
use mirror_langevin::diagnostics::GaussianParams;
use mirror_langevin::fokker_planck::{tilted, FpProblem, ScalarMirror, ScalarPotential};
use mirror_langevin::harness::suite::inequality_suite;
use mirror_langevin::Result;

fn main() -> Result<()> {
    let target = ScalarPotential::Cosh;
    let problem = FpProblem::new(target.clone(), ScalarMirror::Newton, target.truncated_grid(2000)?)?;
    let bl = poincare_terms(&problem.grid, &problem.pi, |x| target.second_derivative(x), |x| x.sin() + x * x, |x| x.cos() + 2.0 * x)?;
    println!("Brascamp-Lieb on cosh: var {:.6} <= {:.6}: {}", bl.variance, bl.energy, bl.holds());
    let mu = tilted(&problem, 0.7);
    let l = lojasiewicz_check(&problem.grid, &problem.pi, &mu, 1.0)?;
    println!("Lojasiewicz on cosh with C_P = 1: {:.6} <= {:.6}: {}", l.lhs, l.rhs, l.holds);
    let p = GaussianParams::scalar(0.5, 1.5)?;
    let q = GaussianParams::scalar(0.0, 1.0)?;
    let t = transport_inequality_check(&p, &q, 1.0)?;
    println!("transport N(0.5, 1.5) vs N(0, 1): W2^2 {:.5}, bounds {:.5} / {:.5}", t.w2sq, t.bound9, t.bound8);
    let report = inequality_suite(0)?;
    let failed = report.checks.iter().filter(|c| !c.holds).count();
    println!("inequality suite: {} checks, {failed} failed", report.checks.len());
    Ok(())
}
