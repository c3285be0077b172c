//! ULA, TULA, NLA and MALA on an ill-conditioned 2-D Gaussian.
//!
//! `cargo run --release --example gaussian_samplers`

use mirror_langevin::diagnostics::moments::second_moment;
use mirror_langevin::samplers::{run_chain, NoRecorder, SamplerConfig, SamplerKind, Target};
use mirror_langevin::{Matrix, Point, Potential, Result};

fn main() -> Result<()> {
    let sigma = Matrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 0.01]);
    let target = Target::Density(Potential::gaussian(sigma.clone())?);
    let kinds = [SamplerKind::Ula, SamplerKind::Tula { taming: 0.1 }, SamplerKind::Nla, SamplerKind::Mala];
    println!("target variances (100, 0.01); h = 0.005 for the Euclidean kernels, 0.5 for NLA");
    println!("NLA at step h has stationary variance 2/(2 - h) times the target's");
    for kind in &kinds {
        let h = if matches!(kind, SamplerKind::Nla) { 0.5 } else { 0.005 };
        let config = SamplerConfig {
            burn_in: 2_000,
            ..SamplerConfig::new(h, 20_000, 1)
        };
        let run = run_chain(kind, &target, &config, Point::from_column_slice(&[5.0, 0.05]), &mut NoRecorder)?;
        let m = second_moment(&run.retained)?;
        println!(
            "{:<5} var x1 {:>9.3}  var x2 {:>7.4}  failure: {}",
            kind.tag(),
            m[(0, 0)],
            m[(1, 1)],
            run.failure.map_or("none".into(), |f| f.message)
        );
    }
    Ok(())
}
