//! Entropic transport against the exact assignment cost on small clouds.
//!
//! `cargo run --release --example sinkhorn_transport`

use mirror_langevin::diagnostics::transport::sinkhorn;
use mirror_langevin::diagnostics::{exact_w2_discrete, SinkhornSettings};
use mirror_langevin::rng::{NoiseStream, Purpose};
use mirror_langevin::{Point, Result};

fn main() -> Result<()> {
    let mut s = NoiseStream::new(5, Purpose::Auxiliary, 0, 0);
    let a: Vec<Point> = (0..64).map(|_| s.normal_vector(2)).collect();
    let b: Vec<Point> = (0..64).map(|_| s.normal_vector(2) * 1.5 + Point::from_column_slice(&[1.0, 0.0])).collect();
    let exact = exact_w2_discrete(&a, &b)?;
    println!("exact squared W2: {exact:.5}");
    for epsilon in [1.0, 0.1, 0.01, 0.001] {
        let out = sinkhorn(&a, &b, &SinkhornSettings { epsilon, ..SinkhornSettings::default() })?;
        println!("epsilon {epsilon:>6}: plan cost {:.5}, marginal violation {:.1e} after {} iterations", out.cost, out.violation, out.iterations);
    }
    Ok(())
}
