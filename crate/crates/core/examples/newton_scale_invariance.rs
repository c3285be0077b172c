//! NLA iterates for `N(0, σ²I)` are σ times those for `N(0, I)` under the
//! same noise, so one step size serves every scale. ULA's stable step
//! shrinks with the smallest variance.
//!
//! `cargo run --release --example newton_scale_invariance`

use mirror_langevin::samplers::{run_chain, ChainState, SamplerConfig, SamplerKind, Target};
use mirror_langevin::{Point, Potential, Result};

fn trajectory(kind: &SamplerKind, variance: f64, h: f64, start: f64) -> Result<Vec<f64>> {
    let target = Target::Density(Potential::gaussian_diagonal(&[variance])?);
    let mut xs = Vec::new();
    let mut rec = |_: usize, s: &ChainState| xs.push(s.x[0]);
    run_chain(kind, &target, &SamplerConfig::new(h, 2_000, 4), Point::from_element(1, start), &mut rec)?;
    Ok(xs)
}

fn main() -> Result<()> {
    let unit = trajectory(&SamplerKind::Nla, 1.0, 0.1, 3.0)?;
    for sigma in [1e-2, 1.0, 1e2] {
        let scaled = trajectory(&SamplerKind::Nla, sigma * sigma, 0.1, 3.0 * sigma)?;
        let gap = scaled.iter().zip(&unit).map(|(a, b)| (a / sigma - b).abs()).fold(0.0, f64::max);
        let var = scaled[500..].iter().map(|x| x * x).sum::<f64>() / (scaled.len() - 500) as f64;
        println!("NLA sigma {sigma:>6}: max |x/sigma - x_unit| = {gap:.2e}, sample variance / sigma^2 = {:.3}", var / (sigma * sigma));
    }
    for variance in [1e-4, 1.0] {
        let xs = trajectory(&SamplerKind::Ula, variance, 0.1, 3.0 * variance.sqrt())?;
        let last = xs.last().copied().unwrap_or(f64::NAN);
        println!("ULA h = 0.1, variance {variance:>6}: final |x| = {:.3e}", last.abs());
    }
    Ok(())
}
