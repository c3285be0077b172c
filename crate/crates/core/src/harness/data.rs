//! Synthetic logistic-regression data.

use crate::geometry::Matrix;
use crate::potentials::LogisticData;
use crate::rng::{NoiseStream, Purpose};

/// Covariate variances of the synthetic design.
pub const COVARIATE_VARIANCES: [f64; 2] = [10.0, 0.1];
/// Parameter generating the labels.
pub const TRUE_PARAMETER: [f64; 2] = [1.0, 1.0];

/// `n` rows with `Xᵢ ~ N(0, diag(10, 0.1))` and
/// `Yᵢ ~ Bernoulli(1 / (1 + exp(−θ*ᵀXᵢ)))`, `θ* = (1, 1)`.
pub fn generate_logistic_data(n: usize, seed: u64) -> LogisticData {
    let mut s = NoiseStream::new(seed, Purpose::Data, 0, 0);
    let mut x = Matrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = 0.0;
        for j in 0..2 {
            x[(i, j)] = COVARIATE_VARIANCES[j].sqrt() * s.normal();
            t += TRUE_PARAMETER[j] * x[(i, j)];
        }
        let p = 1.0 / (1.0 + (-t).exp());
        y.push(if s.bernoulli(p) { 1.0 } else { 0.0 });
    }
    LogisticData::new(x, y).expect("generated labels are binary")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plausible_label_frequency() {
        let d = generate_logistic_data(100, 3);
        assert_eq!(d.len(), 100);
        let freq = d.labels.iter().sum::<f64>() / 100.0;
        assert!(freq > 0.2 && freq < 0.8, "{freq}");
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate_logistic_data(50, 9), generate_logistic_data(50, 9));
        assert_ne!(generate_logistic_data(50, 9), generate_logistic_data(50, 10));
    }

    #[test]
    fn single_row() {
        let d = generate_logistic_data(1, 0);
        assert_eq!(d.len(), 1);
        assert!(d.labels[0] == 0.0 || d.labels[0] == 1.0);
    }
}
