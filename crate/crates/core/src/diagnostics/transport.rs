//! Discrete optimal transport between equally weighted clouds with
//! squared-Euclidean ground cost.

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, Point};

/// Largest cloud accepted by [`exact_w2_discrete`].
pub const EXACT_MAX_POINTS: usize = 64;

/// `min C/ε` above which [`SinkhornMode::Auto`] starts in the log domain.
pub const LOG_DOMAIN_THRESHOLD: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SinkhornMode {
    /// Scaling iterations unless the kernel would underflow, else log domain.
    Auto,
    /// Kernel scaling only; underflow is an error.
    Scaling,
    /// Log-sum-exp updates of the dual potentials.
    LogDomain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornSettings {
    pub epsilon: f64,
    /// Bound on the L1 violation of the row marginal.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mode: SinkhornMode,
}

impl Default for SinkhornSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            tolerance: 1e-9,
            max_iterations: 10_000,
            mode: SinkhornMode::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOutcome {
    /// `⟨P, C⟩` of the final plan, without the entropy term.
    pub cost: f64,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
    pub log_domain: bool,
}

fn check_clouds(a: &[Point], b: &[Point]) -> Result<usize> {
    let (Some(first), false) = (a.first(), b.is_empty()) else {
        return Err(Error::Precondition("transport needs two nonempty clouds".into()));
    };
    let d = first.len();
    for x in a.iter().chain(b) {
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
    }
    Ok(d)
}

fn cost_matrix(a: &[Point], b: &[Point]) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            c.push(sq_dist(x.as_slice(), y.as_slice()));
        }
    }
    c
}

/// Entropic transport cost between uniform clouds.
pub fn sinkhorn_distance(a: &[Point], b: &[Point], settings: &SinkhornSettings) -> Result<f64> {
    sinkhorn(a, b, settings).map(|o| o.cost)
}

/// Entropic transport with full diagnostics.
///
/// [`SinkhornMode::Auto`] and [`SinkhornMode::LogDomain`] anneal the
/// regularisation from the largest cost down to `ε`, halving it per stage and
/// warm starting the dual potentials, so only the last stage runs at `ε`.
/// [`SinkhornMode::Scaling`] runs the plain kernel iteration at `ε` only.
pub fn sinkhorn(a: &[Point], b: &[Point], settings: &SinkhornSettings) -> Result<SinkhornOutcome> {
    if !(settings.epsilon > 0.0) || !settings.epsilon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be positive and finite, got {}", settings.epsilon),
        });
    }
    if !(settings.tolerance > 0.0) || settings.max_iterations == 0 {
        return Err(Error::InvalidParameter {
            name: "tolerance",
            reason: "tolerance must be positive and max_iterations at least 1".into(),
        });
    }
    check_clouds(a, b)?;
    let problem = Problem::new(a, b);
    let min_ratio = problem.cost.iter().cloned().fold(f64::INFINITY, f64::min) / settings.epsilon;
    match settings.mode {
        SinkhornMode::LogDomain => Ok(problem.log_domain(settings)),
        SinkhornMode::Scaling => problem.plain_scaling(settings),
        SinkhornMode::Auto if min_ratio > LOG_DOMAIN_THRESHOLD => Ok(problem.log_domain(settings)),
        SinkhornMode::Auto => match problem.stabilized_scaling(settings) {
            Err(Error::KernelUnderflow { .. }) => Ok(problem.log_domain(settings)),
            other => other,
        },
    }
}

/// Marginal violation at which an annealing stage hands over to the next.
const STAGE_TOLERANCE: f64 = 1e-3;
const STAGE_MAX_ITERATIONS: usize = 200;
/// Scalings beyond `[1/ABSORB, ABSORB]` are folded into the potentials.
const ABSORB: f64 = 1e50;
/// Log-domain iterations between marginal checks.
const LOG_CHECK_EVERY: usize = 10;

struct Problem {
    cost: Vec<f64>,
    n: usize,
    m: usize,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Problem {
    fn new(a: &[Point], b: &[Point]) -> Self {
        Self {
            cost: cost_matrix(a, b),
            n: a.len(),
            m: b.len(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.cost[i * self.m..(i + 1) * self.m]
    }

    fn schedule(&self, epsilon: f64) -> Vec<f64> {
        let top = self.cost.iter().cloned().fold(0.0, f64::max);
        let mut stages = Vec::new();
        let mut e = top;
        while e > 2.0 * epsilon {
            stages.push(e);
            e *= 0.5;
        }
        stages.push(epsilon);
        stages
    }

    /// Row-marginal L1 violation of the plan `u_i K_ij v_j`.
    fn scaling_violation(&self, kernel: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let a = 1.0 / self.n as f64;
        (0..self.n)
            .map(|i| {
                let kv: f64 = kernel[i * self.m..(i + 1) * self.m].iter().zip(v).map(|(k, v)| k * v).sum();
                (u[i] * kv - a).abs()
            })
            .sum()
    }

    /// One pair of scaling updates; `false` if a marginal sum underflowed.
    fn scaling_sweep(&self, kernel: &[f64], u: &mut [f64], v: &mut [f64]) -> bool {
        let (a, b) = (1.0 / self.n as f64, 1.0 / self.m as f64);
        for (i, ui) in u.iter_mut().enumerate() {
            let k: f64 = kernel[i * self.m..(i + 1) * self.m].iter().zip(v.iter()).map(|(k, v)| k * v).sum();
            if !(k > 0.0) || !k.is_finite() {
                return false;
            }
            *ui = a / k;
        }
        let mut ktu = vec![0.0; self.m];
        for (i, ui) in u.iter().enumerate() {
            for (acc, k) in ktu.iter_mut().zip(&kernel[i * self.m..(i + 1) * self.m]) {
                *acc += k * ui;
            }
        }
        for (vj, k) in v.iter_mut().zip(&ktu) {
            if !(*k > 0.0) || !k.is_finite() {
                return false;
            }
            *vj = b / k;
        }
        true
    }

    fn plan_cost(&self, f: &[f64], g: &[f64], epsilon: f64) -> f64 {
        let mut total = 0.0;
        for (i, fi) in f.iter().enumerate() {
            for (j, c) in self.row(i).iter().enumerate() {
                total += ((fi + g[j] - c) / epsilon).exp() * c;
            }
        }
        total
    }

    fn plain_scaling(&self, s: &SinkhornSettings) -> Result<SinkhornOutcome> {
        let underflow = || Error::KernelUnderflow { epsilon: s.epsilon };
        let kernel: Vec<f64> = self.cost.iter().map(|c| (-c / s.epsilon).exp()).collect();
        let mut u = vec![1.0; self.n];
        let mut v = vec![1.0; self.m];
        let mut violation = f64::INFINITY;
        let mut iterations = 0;
        while iterations < s.max_iterations {
            iterations += 1;
            if !self.scaling_sweep(&kernel, &mut u, &mut v) {
                return Err(underflow());
            }
            violation = self.scaling_violation(&kernel, &u, &v);
            if !violation.is_finite() {
                return Err(underflow());
            }
            if violation < s.tolerance {
                break;
            }
        }
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.m {
                let k = i * self.m + j;
                total += u[i] * kernel[k] * v[j] * self.cost[k];
            }
        }
        if !total.is_finite() {
            return Err(underflow());
        }
        Ok(SinkhornOutcome {
            cost: total,
            iterations,
            violation,
            converged: violation < s.tolerance,
            log_domain: false,
        })
    }

    /// Kernel scaling on `exp((f + g − C)/ε)`, folding large scalings into
    /// the potentials `f`, `g`.
    fn stabilized_scaling(&self, s: &SinkhornSettings) -> Result<SinkhornOutcome> {
        let (n, m) = (self.n, self.m);
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        let build = |f: &[f64], g: &[f64], eps: f64| -> Vec<f64> {
            let mut k = Vec::with_capacity(n * m);
            for (i, fi) in f.iter().enumerate() {
                k.extend(self.row(i).iter().zip(g).map(|(c, gj)| ((fi + gj - c) / eps).exp()));
            }
            k
        };
        let absorb = |f: &mut [f64], g: &mut [f64], u: &mut [f64], v: &mut [f64], eps: f64| {
            f.iter_mut().zip(u.iter_mut()).for_each(|(fi, ui)| {
                *fi += eps * ui.ln();
                *ui = 1.0;
            });
            g.iter_mut().zip(v.iter_mut()).for_each(|(gj, vj)| {
                *gj += eps * vj.ln();
                *vj = 1.0;
            });
        };
        let stages = self.schedule(s.epsilon);
        let mut iterations = 0;
        let mut violation = f64::INFINITY;
        for (k, &eps) in stages.iter().enumerate() {
            let last = k + 1 == stages.len();
            let mut kernel = build(&f, &g, eps);
            let mut u = vec![1.0; n];
            let mut v = vec![1.0; m];
            let mut stage_iterations = 0;
            loop {
                iterations += 1;
                stage_iterations += 1;
                if !self.scaling_sweep(&kernel, &mut u, &mut v) {
                    return Err(Error::KernelUnderflow { epsilon: eps });
                }
                let extreme = u.iter().chain(&v).any(|x| !(*x < ABSORB && *x > 1.0 / ABSORB));
                if extreme {
                    absorb(&mut f, &mut g, &mut u, &mut v, eps);
                    kernel = build(&f, &g, eps);
                }
                violation = self.scaling_violation(&kernel, &u, &v);
                if !violation.is_finite() {
                    return Err(Error::KernelUnderflow { epsilon: eps });
                }
                let done = if last {
                    violation < s.tolerance || iterations >= s.max_iterations
                } else {
                    violation < STAGE_TOLERANCE || stage_iterations >= STAGE_MAX_ITERATIONS
                };
                if done {
                    break;
                }
            }
            absorb(&mut f, &mut g, &mut u, &mut v, eps);
        }
        let cost = self.plan_cost(&f, &g, s.epsilon);
        if !cost.is_finite() {
            return Err(Error::KernelUnderflow { epsilon: s.epsilon });
        }
        Ok(SinkhornOutcome {
            cost,
            iterations,
            violation,
            converged: violation < s.tolerance,
            log_domain: false,
        })
    }

    fn log_violation(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let a = 1.0 / self.n as f64;
        (0..self.n)
            .map(|i| {
                let lse = log_sum_exp(self.row(i).iter().zip(g).map(|(c, gj)| (f[i] + gj - c) / eps));
                (lse.exp() - a).abs()
            })
            .sum()
    }

    fn log_domain(&self, s: &SinkhornSettings) -> SinkhornOutcome {
        let (n, m) = (self.n, self.m);
        let (ln_a, ln_b) = (-(n as f64).ln(), -(m as f64).ln());
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        let stages = self.schedule(s.epsilon);
        let mut iterations = 0;
        let mut violation = f64::INFINITY;
        for (k, &eps) in stages.iter().enumerate() {
            let last = k + 1 == stages.len();
            let mut stage_iterations = 0;
            loop {
                iterations += 1;
                stage_iterations += 1;
                for (i, fi) in f.iter_mut().enumerate() {
                    let row = self.row(i);
                    *fi = eps * ln_a - eps * log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
                }
                for (j, gj) in g.iter_mut().enumerate() {
                    let col = (0..n).map(|i| (f[i] - self.cost[i * m + j]) / eps);
                    *gj = eps * ln_b - eps * log_sum_exp(col);
                }
                let capped = if last {
                    iterations >= s.max_iterations
                } else {
                    stage_iterations >= STAGE_MAX_ITERATIONS
                };
                if stage_iterations % LOG_CHECK_EVERY != 0 && !capped {
                    continue;
                }
                violation = self.log_violation(&f, &g, eps);
                let target = if last { s.tolerance } else { STAGE_TOLERANCE };
                if violation < target || capped {
                    break;
                }
            }
        }
        SinkhornOutcome {
            cost: self.plan_cost(&f, &g, s.epsilon),
            iterations,
            violation,
            converged: violation < s.tolerance,
            log_domain: true,
        }
    }
}

/// Exact squared W₂ between two uniform clouds of equal size: the minimum
/// over assignments of the mean squared distance.
pub fn exact_w2_discrete(a: &[Point], b: &[Point]) -> Result<f64> {
    check_clouds(a, b)?;
    if a.len() != b.len() {
        return Err(Error::Precondition(format!(
            "exact transport needs equal cloud sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() > EXACT_MAX_POINTS {
        return Err(Error::Precondition(format!(
            "exact transport is limited to {EXACT_MAX_POINTS} points, got {}",
            a.len()
        )));
    }
    let n = a.len();
    let cost = cost_matrix(a, b);
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

/// Minimum-cost perfect matching of a square cost matrix by the
/// shortest-augmenting-path Hungarian method. Returns the column of each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_v[j] {
                    min_v[j] = reduced;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseStream, Purpose};

    fn cloud(seed: u64, n: usize, d: usize) -> Vec<Point> {
        let mut s = NoiseStream::new(seed, Purpose::Auxiliary, 0, 0);
        (0..n).map(|_| s.normal_vector(d)).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn sinkhorn_singletons() {
        let x = vec![Point::from_column_slice(&[1.0, 2.0])];
        let y = vec![Point::from_column_slice(&[-0.5, 4.0])];
        assert_eq!(sinkhorn_distance(&x, &x, &SinkhornSettings::default()).unwrap(), 0.0);
        for mode in [SinkhornMode::Auto, SinkhornMode::LogDomain] {
            let s = SinkhornSettings {
                mode,
                ..SinkhornSettings::default()
            };
            let c = sinkhorn_distance(&x, &y, &s).unwrap();
            assert!((c - 6.25).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn scaling_mode_reports_underflow() {
        let x = vec![Point::from_column_slice(&[0.0]), Point::from_column_slice(&[0.1])];
        let y = vec![Point::from_column_slice(&[30.0]), Point::from_column_slice(&[30.1])];
        let s = SinkhornSettings {
            mode: SinkhornMode::Scaling,
            ..SinkhornSettings::default()
        };
        assert!(matches!(sinkhorn(&x, &y, &s), Err(Error::KernelUnderflow { .. })));
        let auto = sinkhorn(&x, &y, &SinkhornSettings::default()).unwrap();
        assert!(auto.log_domain);
        // Both matchings cost 1800 up to 0.02, so the plan mixes them.
        assert!((auto.cost - 900.0).abs() < 0.02, "{}", auto.cost);
    }

    #[test]
    fn sinkhorn_matches_exact_on_seeded_clouds() {
        for seed in 0..5 {
            let a = cloud(10 + seed, 32, 2);
            let b = cloud(20 + seed, 32, 2);
            let exact = exact_w2_discrete(&a, &b).unwrap();
            let out = sinkhorn(&a, &b, &SinkhornSettings::default()).unwrap();
            assert!((out.cost - exact).abs() < 5e-3, "seed {seed}: {} vs {exact}", out.cost);
            // An unconverged plan is off by at most its violation times the
            // largest cost.
            let back = sinkhorn(&b, &a, &SinkhornSettings::default()).unwrap();
            let top = cost_matrix(&a, &b).into_iter().fold(0.0, f64::max);
            assert!((back.cost - out.cost).abs() <= (out.violation + back.violation) * top);
        }
    }

    #[test]
    fn sinkhorn_is_symmetric_when_converged() {
        let a = cloud(60, 32, 2);
        let b = cloud(61, 40, 2);
        let s = SinkhornSettings {
            epsilon: 0.1,
            ..SinkhornSettings::default()
        };
        let x = sinkhorn(&a, &b, &s).unwrap();
        let y = sinkhorn(&b, &a, &s).unwrap();
        assert!(x.converged && y.converged);
        assert!((x.cost - y.cost).abs() < 1e-9);
    }

    #[test]
    fn log_domain_agrees_with_scaling() {
        let a = cloud(3, 20, 2);
        let b = cloud(4, 25, 2);
        let s = |mode| SinkhornSettings {
            epsilon: 0.05,
            mode,
            ..SinkhornSettings::default()
        };
        let x = sinkhorn(&a, &b, &s(SinkhornMode::Scaling)).unwrap();
        let y = sinkhorn(&a, &b, &s(SinkhornMode::LogDomain)).unwrap();
        assert!(x.converged && y.converged);
        assert!((x.cost - y.cost).abs() < 1e-9);
    }

    #[test]
    fn exact_matches_brute_force() {
        for seed in 0..5 {
            let a = cloud(30 + seed, 6, 2);
            let b = cloud(40 + seed, 6, 2);
            let best = permutations(6)
                .iter()
                .map(|p| (0..6).map(|i| sq_dist(a[i].as_slice(), b[p[i]].as_slice())).sum::<f64>() / 6.0)
                .fold(f64::INFINITY, f64::min);
            let exact = exact_w2_discrete(&a, &b).unwrap();
            assert!((exact - best).abs() < 1e-12);
        }
        assert_eq!(permutations(6).len(), 720);
    }

    #[test]
    fn exact_one_dimensional_is_sorted_matching() {
        let a = cloud(50, 64, 1);
        let b = cloud(51, 64, 1);
        let mut xs: Vec<f64> = a.iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = b.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let sorted = xs.iter().zip(&ys).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 64.0;
        assert!((exact_w2_discrete(&a, &b).unwrap() - sorted).abs() < 1e-12);
        assert_eq!(exact_w2_discrete(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn exact_rejects_bad_sizes() {
        assert!(exact_w2_discrete(&cloud(1, 3, 2), &cloud(2, 4, 2)).is_err());
        assert!(exact_w2_discrete(&cloud(1, 65, 2), &cloud(2, 65, 2)).is_err());
        assert!(exact_w2_discrete(&cloud(1, 3, 2), &cloud(2, 3, 3)).is_err());
    }
}
