//! Experiment pipelines behind the presets.
//!
//! Every pipeline returns an [`Outcome`]: metric rows, optional sample dumps
//! and inequality checks, and a JSON object of preset-specific metadata.
//! Nothing here touches the filesystem.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Gamma};

use crate::conjugate::{invert_gradient, InvertSettings};
use crate::diagnostics::moments::scatter_error_from_moment;
use crate::diagnostics::transport::{exact_w2_discrete, sinkhorn, SinkhornSettings, EXACT_MAX_POINTS};
use crate::diagnostics::ScatterFamily;
use crate::error::{Error, Result};
use crate::fokker_planck::{fit_decay_rate, tilted, Divergence, FpProblem, ScalarMirror, ScalarPotential};
use crate::geometry::{Cholesky, Matrix, Point};
use crate::mirror::Mirror;
use crate::potentials::Potential;
use crate::rng::{NoiseStream, Purpose};
use crate::samplers::{
    run_chain, run_cloud, run_ensemble, BoxBody, ChainFailure, ChainState, EnsembleSpec, SamplerConfig, SamplerKind,
    Statistic, Target,
};

use super::config::Overrides;
use super::data::generate_logistic_data;
use super::output::{CheckRecord, MetricTable, SampleTable, AGGREGATE_RUN};
use super::presets::{Family, Preset};
use super::suite;

/// Taming parameter reported for TULA.
pub const TULA_TAMING: f64 = 0.1;
/// Synthetic dataset size of the logistic preset.
pub const LOGISTIC_ROWS: usize = 100;
pub const LOGISTIC_PRIOR_VARIANCE: f64 = 10.0;
/// Half-widths of the rectangle presets.
pub const RECTANGLE: [f64; 2] = [0.01, 1.0];
/// MALA step size of the rectangle presets.
pub const RECTANGLE_MALA_H: f64 = 0.01;
/// Norm of the laplace starting points.
pub const LAPLACE_START_NORM: f64 = 1000.0;
/// Power of the laplace mirror `‖x‖^p`.
pub const LAPLACE_MIRROR_POWER: f64 = 1.5;
/// Cells of the Fokker–Planck presets.
pub const FP_CELLS: usize = 512;
/// Approximate number of recorded times per Fokker–Planck case.
pub const FP_RECORDS: usize = 400;
/// Coverage of the confidence ellipses written to the metadata.
pub const ELLIPSE_LEVEL: f64 = 0.95;

/// What a pipeline produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: MetricTable,
    pub samples: Option<SampleTable>,
    pub checks: Vec<CheckRecord>,
    pub details: Map<String, Value>,
    pub failures: Vec<FailureRecord>,
    /// Independent runs attempted, summed over samplers.
    pub runs_total: usize,
    pub runs_failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureRecord {
    pub sampler: String,
    pub run: u32,
    pub step: usize,
    pub message: String,
}

impl FailureRecord {
    fn new(sampler: &str, run: u32, f: &ChainFailure) -> Self {
        Self {
            sampler: sampler.to_string(),
            run,
            step: f.step,
            message: f.message.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"sampler": self.sampler, "run": self.run, "step": self.step, "message": self.message})
    }
}

/// `{1, 2, 3, 5, 7} × 10^k` up to `n`, plus `n`.
pub fn log_checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut scale = 1usize;
    while scale <= n {
        for m in [1, 2, 3, 5, 7] {
            if m * scale <= n {
                out.push(m * scale);
            }
        }
        scale = scale.saturating_mul(10);
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Runs the pipeline of `preset` with resolved parameters.
pub fn execute(preset: &Preset, params: &Overrides) -> Result<Outcome> {
    let mut outcome = Outcome {
        metrics: MetricTable::new(preset.name),
        ..Outcome::default()
    };
    match preset.family {
        Family::Scatter => scatter_experiment(preset, params, &mut outcome)?,
        Family::Logistic => logistic_experiment(preset, params, &mut outcome)?,
        Family::Rectangle { mala } => rectangle_experiment(params, mala, &mut outcome)?,
        Family::Laplace => laplace_experiment(params, &mut outcome)?,
        Family::FpSigmaSweep | Family::FpNonGaussian | Family::FpLangevinContrast => {
            fp_experiment(preset.family, &mut outcome)?
        }
        Family::InequalitySuite => suite_experiment(params, &mut outcome)?,
    }
    Ok(outcome)
}

fn need<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config {
        key: key.to_string(),
        reason: "missing from the resolved parameters".into(),
    })
}

fn tag(base: &str, h: f64, multi: bool) -> String {
    if multi {
        format!("{base}-h{h}")
    } else {
        base.to_string()
    }
}

/// Running mean and, optionally, running second moment of one chain. Reads
/// as `[‖mean − target‖², scatter error]`, with `NaN` for undefined entries.
struct MomentStat {
    target: Point,
    start_after: usize,
    restart_after: Option<usize>,
    count: usize,
    sum: Point,
    second: Option<Matrix>,
    scatter: Option<(Arc<Matrix>, ScatterFamily)>,
}

impl MomentStat {
    fn new(target: Point, start_after: usize) -> Self {
        let d = target.len();
        Self {
            target,
            start_after,
            restart_after: None,
            count: 0,
            sum: Point::zeros(d),
            second: None,
            scatter: None,
        }
    }

    fn with_scatter(mut self, sigma: Arc<Matrix>, family: ScatterFamily) -> Self {
        let d = self.target.len();
        self.second = Some(Matrix::zeros(d, d));
        self.scatter = Some((sigma, family));
        self
    }

    fn restarting_after(mut self, iteration: usize) -> Self {
        self.restart_after = Some(iteration);
        self
    }
}

impl Statistic for MomentStat {
    fn update(&mut self, iteration: usize, state: &ChainState) {
        if self.restart_after.is_some_and(|r| iteration == r + 1) {
            self.count = 0;
            self.sum.fill(0.0);
            if let Some(s) = &mut self.second {
                s.fill(0.0);
            }
        }
        if iteration <= self.start_after {
            return;
        }
        self.count += 1;
        self.sum += &state.x;
        if let Some(s) = &mut self.second {
            s.ger(1.0, &state.x, &state.x, 1.0);
        }
    }

    fn value(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![f64::NAN, f64::NAN];
        }
        let n = self.count as f64;
        let err = (&self.sum / n - &self.target).norm_squared();
        let scatter = match (&self.second, &self.scatter) {
            (Some(s), Some((sigma, family))) => scatter_error_from_moment(&(s / n), sigma, *family).unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        vec![err, scatter]
    }
}

/// Pushes the finite aggregate rows of an ensemble and books its failures.
fn push_ensemble(
    outcome: &mut Outcome,
    sampler: &str,
    checkpoints: &[usize],
    mean: &[Vec<f64>],
    metrics: &[&str],
) -> Result<()> {
    for (iter, values) in checkpoints.iter().zip(mean) {
        for (metric, v) in metrics.iter().zip(values) {
            if v.is_finite() {
                outcome.metrics.push(sampler, AGGREGATE_RUN, *iter, metric, *v)?;
            }
        }
    }
    Ok(())
}

fn book_failures(outcome: &mut Outcome, sampler: &str, runs: u32, failures: &[(u32, ChainFailure)]) {
    outcome.runs_total += runs as usize;
    outcome.runs_failed += failures.len();
    outcome
        .failures
        .extend(failures.iter().map(|(r, f)| FailureRecord::new(sampler, *r, f)));
}

/// 95% quantile of `‖(X_i, X_j)‖²` in whitened coordinates for the law
/// `∝ exp(−q^γ / 2)` in dimension `d`.
pub fn planar_marginal_quantile(d: usize, gamma: f64, level: f64) -> Result<f64> {
    if d < 2 || !(gamma > 0.0) || !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition("planar quantile needs d >= 2, gamma > 0, level in (0, 1)".into()));
    }
    let bad = |e: statrs::distribution::GammaError| Error::Precondition(e.to_string());
    if gamma == 1.0 {
        return Ok(ChiSquared::new(2.0).map_err(|e| Error::Precondition(e.to_string()))?.inverse_cdf(level));
    }
    // q = (2G)^{1/γ} with G ~ Gamma(d/(2γ), 1); the planar share of q is
    // Beta(1, (d − 2)/2) and independent of q.
    let g = Gamma::new(d as f64 / (2.0 * gamma), 1.0).map_err(bad)?;
    const NODES: usize = 4000;
    let radii: Vec<f64> = (0..NODES)
        .map(|k| (2.0 * g.inverse_cdf((k as f64 + 0.5) / NODES as f64)).powf(1.0 / gamma))
        .collect();
    let share = if d > 2 {
        Some(Beta::new(1.0, (d as f64 - 2.0) / 2.0).map_err(|e| Error::Precondition(e.to_string()))?)
    } else {
        None
    };
    let cdf = |c: f64| -> f64 {
        radii
            .iter()
            .map(|q| match &share {
                Some(b) => b.cdf((c / q).min(1.0)),
                None => f64::from(u8::from(*q <= c)),
            })
            .sum::<f64>()
            / NODES as f64
    };
    let (mut lo, mut hi) = (0.0, radii[NODES - 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ellipse_json(center: &[f64], cov: &Matrix, quantile: f64) -> Value {
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let (i_max, i_min) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(i_max);
    let angle = v[1].atan2(v[0]);
    let angle = if angle > std::f64::consts::FRAC_PI_2 {
        angle - std::f64::consts::PI
    } else if angle <= -std::f64::consts::FRAC_PI_2 {
        angle + std::f64::consts::PI
    } else {
        angle
    };
    json!({
        "center": center,
        "semiAxes": [(quantile * eig.eigenvalues[i_max]).sqrt(), (quantile * eig.eigenvalues[i_min]).sqrt()],
        "angle": angle,
        "level": ELLIPSE_LEVEL,
    })
}

fn scatter_experiment(preset: &Preset, p: &Overrides, outcome: &mut Outcome) -> Result<()> {
    let d = need(p.dimension, "dimension")?;
    let gamma = need(p.gamma, "gamma")?;
    let steps = need(p.steps, "steps")?;
    let runs = need(p.runs, "runs")?;
    let seed = need(p.seed, "seed")?;
    let variances: Vec<f64> = (1..=d).map(|i| i as f64).collect();
    let sigma = Arc::new(Matrix::from_diagonal(&Point::from_vec(variances.clone())));
    let (potential, family) = if gamma == 1.0 {
        (Potential::gaussian((*sigma).clone())?, ScatterFamily::Gaussian)
    } else {
        (
            Potential::generalized_gaussian((*sigma).clone(), gamma)?,
            ScatterFamily::GeneralizedGaussian { gamma },
        )
    };
    let target = Target::Density(potential);
    let x0 = Point::from_element(d, 1.0 / (d as f64).sqrt());
    let checkpoints: Vec<usize> = if preset.dense_checkpoints {
        (1..=steps).collect()
    } else {
        log_checkpoints(steps)
    };
    let step_sizes = preset.step_sizes(p);
    let multi = !preset.h_grid.is_empty();
    let mut samples = SampleTable::new(2);
    for &h in &step_sizes {
        for kind in [SamplerKind::Nla, SamplerKind::Ula, SamplerKind::Tula { taming: TULA_TAMING }] {
            let name = tag(kind.tag(), h, multi);
            let cfg = SamplerConfig::new(h, steps, seed);
            let spec = EnsembleSpec {
                num_runs: runs,
                checkpoints: &checkpoints,
                keep_runs: false,
            };
            let ens = run_ensemble(
                &kind,
                &target,
                &cfg,
                &spec,
                |_| x0.clone(),
                |_| MomentStat::new(Point::zeros(d), 0).with_scatter(sigma.clone(), family),
            )?;
            push_ensemble(outcome, &name, &ens.checkpoints, &ens.mean, &["mean_sq_error", "scatter_rel_sq_error"])?;
            book_failures(outcome, &name, runs, &ens.failures);
            let chain = run_chain(&kind, &target, &cfg, x0.clone(), &mut crate::samplers::NoRecorder)?;
            for (i, x) in chain.retained.iter().enumerate() {
                samples.push(&name, 0, i + 1, vec![x[0], x[d - 1]]);
            }
        }
    }
    outcome.samples = Some(samples);
    let planar = planar_marginal_quantile(d, gamma, ELLIPSE_LEVEL)?;
    let cov2 = Matrix::from_row_slice(2, 2, &[variances[0], 0.0, 0.0, variances[d - 1]]);
    let d_map = &mut outcome.details;
    d_map.insert("scatterMatrix".into(), json!(format!("diag(1, ..., {d})")));
    d_map.insert("stepSizes".into(), json!(step_sizes));
    d_map.insert("x0Policy".into(), json!("(1, ..., 1) / sqrt(d)"));
    d_map.insert("tulaTaming".into(), json!(TULA_TAMING));
    d_map.insert("checkpoints".into(), json!(if preset.dense_checkpoints { "every iteration" } else { "log grid {1, 2, 3, 5, 7} x 10^k and the last step" }));
    d_map.insert(
        "aggregation".into(),
        json!("mean over surviving runs of each run's diagnostic; each run averages its own iterates from iteration 1"),
    );
    d_map.insert(
        "scatterConvention".into(),
        json!({
            "estimator": "S * d / E<X, Sigma^-1 X>, S the running raw second moment of one run",
            "radialSecondMoment": family.radial_second_moment(d),
            "rowsSkipped": "iterations at which some run's second moment is rank deficient",
        }),
    );
    d_map.insert("sampleCoordinates".into(), json!([1, d]));
    d_map.insert("sampleIndex".into(), json!("iteration of run 0"));
    d_map.insert("ellipse".into(), ellipse_json(&[0.0, 0.0], &cov2, planar));
    Ok(())
}

struct Posterior {
    map: Point,
    mean: Point,
    covariance: Matrix,
}

/// Posterior mean and covariance by tensor quadrature on `±8` Laplace
/// standard deviations around the mode.
fn logistic_posterior(pot: &Potential) -> Result<Posterior> {
    let map = invert_gradient(pot, &Point::zeros(2), &Point::zeros(2), &InvertSettings::default())?.point;
    let laplace_cov = Cholesky::new(&pot.hessian(&map)?)?.inverse();
    const NODES: usize = 401;
    let half: Vec<f64> = (0..2).map(|i| 8.0 * laplace_cov[(i, i)].sqrt()).collect();
    let axis = |i: usize, k: usize| map[i] - half[i] + 2.0 * half[i] * k as f64 / (NODES - 1) as f64;
    let v_map = pot.value(&map)?;
    let mut mass = 0.0;
    let mut first = Point::zeros(2);
    let mut second = Matrix::zeros(2, 2);
    for a in 0..NODES {
        for b in 0..NODES {
            let x = Point::from_column_slice(&[axis(0, a), axis(1, b)]);
            let w = (v_map - pot.value(&x)?).exp();
            mass += w;
            first += &x * w;
            second.ger(w, &x, &x, 1.0);
        }
    }
    let mean = first / mass;
    let covariance = second / mass - &mean * mean.transpose();
    Ok(Posterior { map, mean, covariance })
}

fn logistic_experiment(preset: &Preset, p: &Overrides, outcome: &mut Outcome) -> Result<()> {
    let steps = need(p.steps, "steps")?;
    let burn_in = need(p.burn_in, "burnIn")?;
    let runs = need(p.runs, "runs")?;
    let seed = need(p.seed, "seed")?;
    let data = Arc::new(generate_logistic_data(LOGISTIC_ROWS, seed));
    let pot = Potential::logistic(data.clone(), LOGISTIC_PRIOR_VARIANCE)?;
    let post = logistic_posterior(&pot)?;
    let target = Target::Density(pot);
    let checkpoints: Vec<usize> = log_checkpoints(steps - burn_in).into_iter().map(|k| k + burn_in).collect();
    let step_sizes = preset.step_sizes(p);
    let multi = !preset.h_grid.is_empty();
    let mut samples = SampleTable::new(2);
    let mut newton = Map::new();
    for &h in &step_sizes {
        for kind in [SamplerKind::Nla, SamplerKind::Ula, SamplerKind::Tula { taming: TULA_TAMING }] {
            let name = tag(kind.tag(), h, multi);
            let cfg = SamplerConfig {
                burn_in,
                ..SamplerConfig::new(h, steps, seed)
            };
            let spec = EnsembleSpec {
                num_runs: runs,
                checkpoints: &checkpoints,
                keep_runs: false,
            };
            let ens = run_ensemble(
                &kind,
                &target,
                &cfg,
                &spec,
                |_| Point::zeros(2),
                |_| MomentStat::new(post.mean.clone(), burn_in),
            )?;
            push_ensemble(outcome, &name, &ens.checkpoints, &ens.mean, &["mean_sq_error"])?;
            book_failures(outcome, &name, runs, &ens.failures);
            let mut counts: Vec<usize> = Vec::with_capacity(steps);
            let chain = run_chain(&kind, &target, &cfg, Point::zeros(2), &mut |_: usize, s: &ChainState| {
                counts.push(s.newton_iterations)
            })?;
            for (i, x) in chain.retained.iter().enumerate() {
                samples.push(&name, 0, burn_in + i + 1, vec![x[0], x[1]]);
            }
            if matches!(kind, SamplerKind::Nla) && !counts.is_empty() {
                let within = counts.iter().filter(|&&c| c <= 10).count();
                newton.insert(
                    name.clone(),
                    json!({
                        "steps": counts.len(),
                        "max": counts.iter().max(),
                        "mean": counts.iter().sum::<usize>() as f64 / counts.len() as f64,
                        "fractionAtMost10": within as f64 / counts.len() as f64,
                    }),
                );
            }
        }
    }
    outcome.samples = Some(samples);
    let labels = data.labels.iter().sum::<f64>() / data.len() as f64;
    let d_map = &mut outcome.details;
    d_map.insert("stepSizes".into(), json!(step_sizes));
    d_map.insert("x0Policy".into(), json!("origin"));
    d_map.insert("tulaTaming".into(), json!(TULA_TAMING));
    d_map.insert("dataset".into(), json!({"rows": LOGISTIC_ROWS, "labelFrequency": labels, "priorVariance": LOGISTIC_PRIOR_VARIANCE}));
    d_map.insert(
        "posterior".into(),
        json!({
            "mode": post.map.as_slice(),
            "mean": post.mean.as_slice(),
            "covariance": [[post.covariance[(0, 0)], post.covariance[(0, 1)]], [post.covariance[(1, 0)], post.covariance[(1, 1)]]],
            "method": "401 x 401 tensor grid over +-8 Laplace standard deviations around the mode",
        }),
    );
    d_map.insert("newtonIterations".into(), Value::Object(newton));
    d_map.insert("sampleIndex".into(), json!("iteration of run 0 after burn-in"));
    d_map.insert(
        "ellipse".into(),
        ellipse_json(post.mean.as_slice(), &post.covariance, planar_marginal_quantile(2, 1.0, ELLIPSE_LEVEL)?),
    );
    Ok(())
}

struct CloudTrace {
    sampler: String,
    run: u32,
    clouds: Vec<Vec<Point>>,
    final_cloud: Vec<Point>,
    not_strictly_inside: usize,
    particle_failures: Vec<FailureRecord>,
}

fn rectangle_experiment(p: &Overrides, with_mala: bool, outcome: &mut Outcome) -> Result<()> {
    let h = need(p.h, "h")?;
    let steps = need(p.steps, "steps")?;
    let points = need(p.points, "points")?;
    let runs = need(p.runs, "runs")?;
    let seed = need(p.seed, "seed")?;
    let beta = need(p.beta, "beta")?;
    let epsilon = need(p.epsilon_sinkhorn, "epsilonSinkhorn")?;
    let body = BoxBody::new(RECTANGLE.to_vec())?;
    let barrier = Target::Density(Potential::scaled(Potential::box_barrier(RECTANGLE.to_vec())?, beta)?);
    let uniform = Target::Uniform(body.clone());
    let mut samplers = vec![
        (SamplerKind::Nla, &barrier, h),
        (SamplerKind::Pla(body.clone()), &uniform, h),
    ];
    if with_mala {
        samplers.push((SamplerKind::Mala, &uniform, RECTANGLE_MALA_H));
    }
    let checkpoints = log_checkpoints(steps);
    let tasks: Vec<(usize, u32)> = (0..samplers.len()).flat_map(|s| (0..runs).map(move |r| (s, r))).collect();
    let traces: Vec<CloudTrace> = tasks
        .par_iter()
        .map(|&(s, run)| {
            let (kind, target, step) = &samplers[s];
            let cfg = SamplerConfig {
                run_index: run,
                ..SamplerConfig::new(*step, steps, seed)
            };
            let mut clouds = Vec::with_capacity(checkpoints.len());
            let mut outside = 0;
            let mut next = 0;
            let cloud = run_cloud(kind, target, &cfg, vec![Point::zeros(2); points], &mut |iter, pts| {
                outside += pts.iter().filter(|x| !body.contains_strictly(x)).count();
                if next < checkpoints.len() && checkpoints[next] == iter {
                    clouds.push(pts.to_vec());
                    next += 1;
                }
            })?;
            Ok(CloudTrace {
                sampler: kind.tag().to_string(),
                run,
                clouds,
                not_strictly_inside: outside,
                particle_failures: cloud
                    .failures
                    .iter()
                    .map(|(i, f)| FailureRecord::new(kind.tag(), run, &ChainFailure {
                        step: f.step,
                        message: format!("particle {i}: {}", f.message),
                    }))
                    .collect(),
                final_cloud: cloud.points,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let settings = SinkhornSettings {
        epsilon,
        ..SinkhornSettings::default()
    };
    let jobs: Vec<(usize, usize)> = (0..traces.len()).flat_map(|t| (0..checkpoints.len()).map(move |c| (t, c))).collect();
    let distances: Vec<(f64, f64, bool)> = jobs
        .par_iter()
        .map(|&(t, c)| {
            let tr = &traces[t];
            let iter = checkpoints[c];
            let mut stream = NoiseStream::new(seed, Purpose::Reference, tr.run, iter as u32);
            let reference: Vec<Point> = (0..points).map(|_| body.sample_uniform(&mut stream)).collect();
            let cloud = &tr.clouds[c];
            let entropic = sinkhorn(cloud, &reference, &settings)?;
            let k = points.min(EXACT_MAX_POINTS);
            let exact = exact_w2_discrete(&cloud[..k], &reference[..k])?;
            Ok((entropic.cost, exact, entropic.converged))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut unconverged = 0;
    let mut sums: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); checkpoints.len()]; samplers.len()];
    for (&(t, c), &(s_cost, exact, converged)) in jobs.iter().zip(&distances) {
        let tr = &traces[t];
        unconverged += usize::from(!converged);
        outcome.metrics.push(&tr.sampler, tr.run as i64, checkpoints[c], "sinkhorn_w2", s_cost)?;
        outcome.metrics.push(&tr.sampler, tr.run as i64, checkpoints[c], "exact_w2", exact)?;
        let s = t / runs as usize;
        sums[s][c].0 += s_cost;
        sums[s][c].1 += exact;
    }
    let mut inside = Map::new();
    let mut samples = SampleTable::new(2);
    for (s, (kind, _, step)) in samplers.iter().enumerate() {
        let name = kind.tag();
        for (c, &iter) in checkpoints.iter().enumerate() {
            outcome.metrics.push(name, AGGREGATE_RUN, iter, "sinkhorn_w2", sums[s][c].0 / runs as f64)?;
            outcome.metrics.push(name, AGGREGATE_RUN, iter, "exact_w2", sums[s][c].1 / runs as f64)?;
        }
        let mine: Vec<&CloudTrace> = traces.iter().filter(|t| t.sampler == name).collect();
        inside.insert(
            name.to_string(),
            json!({
                "stepSize": step,
                "iteratesNotStrictlyInside": mine.iter().map(|t| t.not_strictly_inside).sum::<usize>(),
                "iteratesTotal": runs as usize * steps * points,
            }),
        );
        outcome.runs_total += runs as usize;
        for t in &mine {
            if t.particle_failures.len() == points {
                outcome.runs_failed += 1;
            }
            outcome.failures.extend(t.particle_failures.iter().cloned());
        }
        if let Some(t0) = mine.iter().find(|t| t.run == 0) {
            for (i, x) in t0.final_cloud.iter().enumerate() {
                samples.push(name, 0, i, vec![x[0], x[1]]);
            }
        }
    }
    outcome.samples = Some(samples);
    let d_map = &mut outcome.details;
    d_map.insert("halfWidths".into(), json!(RECTANGLE));
    d_map.insert("x0Policy".into(), json!("origin for every point"));
    d_map.insert("samplers".into(), Value::Object(inside));
    d_map.insert("checkpoints".into(), json!(checkpoints));
    d_map.insert(
        "distances".into(),
        json!({
            "sinkhorn_w2": "transport cost <P, C> of the entropic plan, squared Euclidean cost, full clouds",
            "exact_w2": format!("exact squared W2 between the first {} points of each cloud", points.min(EXACT_MAX_POINTS)),
            "reference": "fresh uniform cloud per (run, iteration) from the reference stream",
            "sinkhornUnconverged": unconverged,
            "sinkhornTolerance": settings.tolerance,
            "sinkhornMaxIterations": settings.max_iterations,
        }),
    );
    d_map.insert("sampleIndex".into(), json!("particle of the final cloud of run 0"));
    Ok(())
}

/// Seeded direction scaled to the laplace starting norm.
pub fn laplace_start(seed: u64, run: u32) -> Point {
    let mut s = NoiseStream::new(seed, Purpose::Init, run, 0);
    let v = s.normal_vector(2);
    &v * (LAPLACE_START_NORM / v.norm())
}

fn laplace_experiment(p: &Overrides, outcome: &mut Outcome) -> Result<()> {
    let h = need(p.h, "h")?;
    let steps = need(p.steps, "steps")?;
    let burn_in = need(p.burn_in, "burnIn")?;
    let runs = need(p.runs, "runs")?;
    let seed = need(p.seed, "seed")?;
    let beta = need(p.beta, "beta")?;
    let target = Target::Density(Potential::norm_plus_quadratic(beta, Point::from_element(2, 1.0))?);
    let checkpoints: Vec<usize> = (1..=steps).collect();
    let kinds = [
        SamplerKind::Nla,
        SamplerKind::Ula,
        SamplerKind::Tula { taming: TULA_TAMING },
        SamplerKind::Mla(Mirror::power_norm(LAPLACE_MIRROR_POWER, 2)?),
    ];
    let mut samples = SampleTable::new(2);
    for kind in &kinds {
        let name = kind.tag();
        let cfg = SamplerConfig::new(h, steps, seed);
        let spec = EnsembleSpec {
            num_runs: runs,
            checkpoints: &checkpoints,
            keep_runs: false,
        };
        let ens = run_ensemble(
            kind,
            &target,
            &cfg,
            &spec,
            |r| laplace_start(seed, r),
            |_| MomentStat::new(Point::zeros(2), 0).restarting_after(burn_in),
        )?;
        push_ensemble(outcome, name, &ens.checkpoints, &ens.mean, &["mean_sq_error"])?;
        book_failures(outcome, name, runs, &ens.failures);
        let chain = run_chain(kind, &target, &cfg, laplace_start(seed, 0), &mut crate::samplers::NoRecorder)?;
        for (i, x) in chain.retained.iter().enumerate() {
            samples.push(name, 0, i + 1, vec![x[0], x[1]]);
        }
    }
    outcome.samples = Some(samples);
    let d_map = &mut outcome.details;
    d_map.insert("center".into(), json!([1.0, 1.0]));
    d_map.insert("x0Policy".into(), json!(format!("seeded uniform direction scaled to norm {LAPLACE_START_NORM}, one per run, shared by all samplers")));
    d_map.insert("mirror".into(), json!(format!("|x|^{LAPLACE_MIRROR_POWER} for MLA")));
    d_map.insert("tulaTaming".into(), json!(TULA_TAMING));
    d_map.insert(
        "stages".into(),
        json!({"stage1": [1, burn_in], "stage2": [burn_in + 1, steps], "runningMean": "restarted at the first iteration of stage 2"}),
    );
    d_map.insert(
        "theoryConstants".into(),
        json!({"C": 3.0 / (4.0 * (2.0 * beta).sqrt()), "C_P": 1.0 / (2.0 * beta)}),
    );
    d_map.insert("sampleIndex".into(), json!("iteration of run 0"));
    Ok(())
}

struct FpCase {
    tag: String,
    target: ScalarPotential,
    mirror: ScalarMirror,
    t_end: f64,
    /// Tilt `a` of `μ₀ ∝ π e^{a x}`.
    tilt: f64,
    expected_rate: Option<f64>,
}

fn fp_cases(family: Family) -> Result<Vec<FpCase>> {
    let gauss = |sigma: f64| ScalarPotential::gaussian(0.0, sigma * sigma);
    let mut cases = Vec::new();
    match family {
        Family::FpSigmaSweep => {
            for sigma in [0.1, 1.0, 10.0, 100.0] {
                cases.push(FpCase {
                    tag: format!("NLD-sigma{sigma}"),
                    target: gauss(sigma)?,
                    mirror: ScalarMirror::Newton,
                    t_end: 12.0,
                    tilt: 0.5 / sigma,
                    expected_rate: Some(2.0),
                });
            }
        }
        Family::FpLangevinContrast => {
            for sigma in [1.0, 10.0] {
                let tilt = 0.5 / (sigma * sigma);
                cases.push(FpCase {
                    tag: format!("LD-sigma{sigma}"),
                    target: gauss(sigma)?,
                    mirror: ScalarMirror::Quadratic,
                    t_end: 12.0 * sigma * sigma,
                    tilt,
                    expected_rate: Some(2.0 / (sigma * sigma)),
                });
                cases.push(FpCase {
                    tag: format!("NLD-sigma{sigma}"),
                    target: gauss(sigma)?,
                    mirror: ScalarMirror::Newton,
                    t_end: 12.0,
                    tilt,
                    expected_rate: Some(2.0),
                });
            }
        }
        _ => {
            for (name, target) in [("cosh", ScalarPotential::Cosh), ("quartic", ScalarPotential::QuarticQuadratic)] {
                let (_, s) = target.moments();
                for (prefix, mirror) in [("NLD", ScalarMirror::Newton), ("LD", ScalarMirror::Quadratic)] {
                    cases.push(FpCase {
                        tag: format!("{prefix}-{name}"),
                        target: target.clone(),
                        mirror,
                        t_end: 12.0,
                        tilt: 0.5 / s,
                        expected_rate: None,
                    });
                }
            }
        }
    }
    Ok(cases)
}

/// Divergence rows and fitted χ² rate of one Fokker–Planck case.
fn fp_case(case: &FpCase) -> Result<(Vec<(usize, [f64; 5])>, Value)> {
    let grid = case.target.truncated_grid(FP_CELLS)?;
    let problem = FpProblem::new(case.target.clone(), case.mirror.clone(), grid)?;
    let dt = problem.max_dt();
    let steps = (case.t_end / dt).round() as usize;
    let record_every = (steps / FP_RECORDS).max(1);
    let mu0 = tilted(&problem, case.tilt);
    let traj = problem.evolve(&mu0, case.t_end, dt, record_every)?;
    let series: Vec<Vec<f64>> = Divergence::ALL
        .iter()
        .map(|k| traj.divergence_series(&problem.pi, *k))
        .collect::<Result<_>>()?;
    let rows: Vec<(usize, [f64; 5])> = traj
        .times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            (
                (t / dt).round() as usize,
                [t, series[0][j], series[1][j], series[2][j], series[3][j]],
            )
        })
        .collect();
    let fit = fit_decay_rate(&traj.times, &series[0]);
    let fit_json = match &fit {
        Ok(f) => json!({"rate": f.rate, "intercept": f.intercept, "rSquared": f.r_squared, "points": f.points}),
        Err(e) => json!({"error": e.to_string()}),
    };
    Ok((
        rows,
        json!({
            "target": case.target.name(),
            "mirror": case.mirror.name(),
            "grid": [problem.grid.lo, problem.grid.hi, problem.grid.n],
            "dt": dt,
            "steps": steps,
            "recordEvery": record_every,
            "tEnd": case.t_end,
            "tilt": case.tilt,
            "expectedRate": case.expected_rate,
            "chi2Fit": fit_json,
            "maxMassDrift": traj.max_mass_drift,
        }),
    ))
}

fn fp_experiment(family: Family, outcome: &mut Outcome) -> Result<()> {
    let cases = fp_cases(family)?;
    let results: Vec<(Vec<(usize, [f64; 5])>, Value)> = cases.par_iter().map(fp_case).collect::<Result<_>>()?;
    let mut fits = Map::new();
    for (case, (rows, meta)) in cases.iter().zip(results) {
        for (iter, values) in rows {
            for (metric, v) in ["time", "chi2", "kl", "tv", "hellinger2"].iter().zip(values) {
                outcome.metrics.push(&case.tag, 0, iter, metric, v)?;
            }
        }
        fits.insert(case.tag.clone(), meta);
    }
    outcome.details.insert("cases".into(), Value::Object(fits));
    outcome.details.insert(
        "initialLaw".into(),
        json!("mu0 proportional to pi * exp(tilt * x); iter is the Euler step index, time the matching t"),
    );
    Ok(())
}

fn suite_experiment(p: &Overrides, outcome: &mut Outcome) -> Result<()> {
    let seed = need(p.seed, "seed")?;
    let report = suite::inequality_suite(seed)?;
    for row in &report.sweep {
        for (metric, v) in [("chi2", row.chi2), ("kl", row.kl), ("tv", row.tv), ("hellinger2", row.hellinger2)] {
            outcome.metrics.push(&row.tag, 0, 0, metric, v)?;
        }
    }
    let failed = report.checks.iter().filter(|c| !c.holds).count();
    outcome.details.insert(
        "checks".into(),
        json!({"total": report.checks.len(), "failed": failed, "file": "checks.csv"}),
    );
    outcome.details.insert(
        "sweepRows".into(),
        json!("closed-form divergences of N(m, v) against N(0, 1); iter is 0"),
    );
    outcome.checks = report.checks;
    Ok(())
}
