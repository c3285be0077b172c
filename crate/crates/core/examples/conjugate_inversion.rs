//! Newton inversion of mirror gradients `∇φ(x) = y`, with iteration counts.
//!
//! `cargo run --release --example conjugate_inversion`

use mirror_langevin::conjugate::{invert_gradient, InvertSettings};
use mirror_langevin::{Matrix, Mirror, Point, Potential, Result};

fn main() -> Result<()> {
    let mirrors = [
        Mirror::quadratic(2),
        Mirror::PotentialAsMirror(Potential::generalized_gaussian(Matrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]), 0.75)?),
        Mirror::power_norm(1.5, 2)?,
        Mirror::barrier(Potential::box_barrier(vec![0.01, 1.0])?)?,
    ];
    let x = Point::from_column_slice(&[0.005, -0.6]);
    let warm = Point::from_column_slice(&[-0.002, 0.3]);
    for m in &mirrors {
        let y = m.grad(&x)?;
        let inv = invert_gradient(m, &y, &warm, &InvertSettings::default())?;
        println!("{:<32} iterations {:>2}  |x - x_hat| = {:.2e}", m.name(), inv.iterations, (inv.point - &x).norm());
    }
    Ok(())
}
