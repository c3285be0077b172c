//! χ² decay of the Newton-Langevin and Langevin diffusions on Gaussians of
//! several widths, from the 1-D finite-volume solver.
//!
//! `cargo run --release --example fokker_planck_decay`

use mirror_langevin::fokker_planck::{fit_decay_rate, tilted, Divergence, FpProblem, ScalarMirror, ScalarPotential};
use mirror_langevin::Result;

fn main() -> Result<()> {
    for sigma in [0.1, 1.0, 10.0] {
        let v = sigma * sigma;
        for (mirror, t_end) in [(ScalarMirror::Newton, 12.0), (ScalarMirror::Quadratic, 12.0 * v)] {
            let target = ScalarPotential::gaussian(0.0, v)?;
            let grid = target.truncated_grid(512)?;
            let problem = FpProblem::new(target, mirror.clone(), grid)?;
            let dt = problem.max_dt();
            let every = ((t_end / dt) as usize / 200).max(1);
            let traj = problem.evolve(&tilted(&problem, 0.5 / sigma), t_end, dt, every)?;
            let chi2 = traj.divergence_series(&problem.pi, Divergence::Chi2)?;
            let fit = fit_decay_rate(&traj.times, &chi2)?;
            println!("sigma {sigma:>5} {:<9} chi2 rate {:.4} (r^2 {:.5})", mirror.name(), fit.rate, fit.r_squared);
        }
    }
    Ok(())
}
