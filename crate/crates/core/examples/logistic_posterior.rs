//! NLA on a Bayesian logistic-regression posterior: running-mean error
//! against a quadrature reference and the Newton work per step.
//!
//! `cargo run --release --example logistic_posterior`

use std::sync::Arc;

use mirror_langevin::harness::data::generate_logistic_data;
use mirror_langevin::samplers::{run_chain, ChainState, SamplerConfig, SamplerKind, Target};
use mirror_langevin::{Point, Potential, Result};

fn main() -> Result<()> {
    let data = Arc::new(generate_logistic_data(100, 0));
    let pot = Potential::logistic(data, 10.0)?;
    let reference = quadrature_mean(&pot)?;
    println!("posterior mean by quadrature: ({:.4}, {:.4})", reference[0], reference[1]);
    let target = Target::Density(pot);
    for (kind, h) in [(SamplerKind::Nla, 0.1), (SamplerKind::Ula, 0.01)] {
        let mut sum = Point::zeros(2);
        let mut newton = 0usize;
        let mut worst = 0usize;
        let mut rec = |i: usize, s: &ChainState| {
            newton += s.newton_iterations;
            worst = worst.max(s.newton_iterations);
            if i > 5_000 {
                sum += &s.x;
            }
        };
        run_chain(&kind, &target, &SamplerConfig::new(h, 20_000, 3), Point::zeros(2), &mut rec)?;
        let err = (sum / 15_000.0 - &reference).norm_squared();
        println!("{} h = {h}: mean_sq_error {err:.3e}, Newton iterations mean {:.2}, max {worst}", kind.tag(), newton as f64 / 20_000.0);
    }
    Ok(())
}

fn quadrature_mean(pot: &Potential) -> Result<Point> {
    let (n, half) = (301, 3.0);
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = Point::from_column_slice(&[-half + 2.0 * half * i as f64 / (n - 1) as f64 + 1.0, -half + 2.0 * half * j as f64 / (n - 1) as f64]);
            logs.push((-pot.value(&x)?, x));
        }
    }
    let top = logs.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m) = (0.0, Point::zeros(2));
    for (l, x) in &logs {
        let w = (l - top).exp();
        z += w;
        m += x * w;
    }
    Ok(m / z)
}
