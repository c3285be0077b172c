//! Mirror-Langevin with `φ = ‖x‖^{3/2}` against ULA and TULA on
//! `V = ‖x‖ + β‖x‖²`, started far from the mode. The gradient of `V` never
//! enters the open unit ball, so Newton-Langevin's dual contraction is
//! not well posed here.
//!
//! `cargo run --release --example laplace_mirror`

use mirror_langevin::samplers::{run_chain, ChainState, SamplerConfig, SamplerKind, Target};
use mirror_langevin::{Mirror, Point, Potential, Result};

fn main() -> Result<()> {
    let d = 10;
    let target = Target::Density(Potential::norm_plus_quadratic(0.0005, Point::zeros(d))?);
    let x0 = Point::from_element(d, 1000.0 / (d as f64).sqrt());
    let kinds = [
        SamplerKind::Ula,
        SamplerKind::Tula { taming: 0.1 },
        SamplerKind::Mla(Mirror::power_norm(1.5, d)?),
    ];
    println!("d = {d}, beta = 5e-4, |x0| = 1000, h = 0.1");
    for kind in &kinds {
        let mut norms = Vec::new();
        let mut rec = |i: usize, s: &ChainState| {
            if [10, 100, 1000, 2000].contains(&i) {
                norms.push(s.x.norm());
            }
        };
        let run = run_chain(kind, &target, &SamplerConfig::new(0.1, 2_000, 2), x0.clone(), &mut rec)?;
        let shown: Vec<String> = norms.iter().map(|n| format!("{n:9.2}")).collect();
        println!("{:<5} |x| at 10/100/1000/2000: {}{}", kind.tag(), shown.join(" "), run.failure.map_or(String::new(), |f| format!("  ({})", f.message)));
    }
    Ok(())
}
