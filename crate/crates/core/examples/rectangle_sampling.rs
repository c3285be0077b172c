//! Uniform sampling of the thin box `[-0.01, 0.01] × [-1, 1]`: NLA on a
//! scaled log-barrier against projected Langevin, scored by Sinkhorn
//! distance to an iid uniform cloud.
//!
//! `cargo run --release --example rectangle_sampling`

use mirror_langevin::diagnostics::{sinkhorn_distance, SinkhornSettings};
use mirror_langevin::rng::{NoiseStream, Purpose};
use mirror_langevin::samplers::{run_cloud, BoxBody, SamplerConfig, SamplerKind, Target};
use mirror_langevin::{Point, Potential, Result};

fn main() -> Result<()> {
    let half = vec![0.01, 1.0];
    let body = BoxBody::new(half.clone())?;
    let mut ref_stream = NoiseStream::new(0, Purpose::Reference, 0, 0);
    let reference: Vec<Point> = (0..300).map(|_| body.sample_uniform(&mut ref_stream)).collect();
    let settings = SinkhornSettings::default();
    let barrier = Target::Density(Potential::scaled(Potential::box_barrier(half)?, 1e-4)?);
    let uniform = Target::Uniform(body.clone());
    for (kind, target) in [(SamplerKind::Nla, &barrier), (SamplerKind::Pla(body.clone()), &uniform)] {
        let mut scores = Vec::new();
        let mut outside = 0;
        let config = SamplerConfig::new(1e-5, 1_000, 0);
        run_cloud(&kind, target, &config, vec![Point::zeros(2); 300], &mut |i, pts| {
            outside += pts.iter().filter(|x| !body.contains_strictly(x)).count();
            if [1, 10, 100, 1000].contains(&i) {
                scores.push(sinkhorn_distance(pts, &reference, &settings).unwrap_or(f64::NAN));
            }
        })?;
        let shown: Vec<String> = scores.iter().map(|s| format!("{s:.4e}")).collect();
        println!("{:<4} sinkhorn at 1/10/100/1000: {}  iterates on the boundary: {outside}", kind.tag(), shown.join(" "));
    }
    Ok(())
}
