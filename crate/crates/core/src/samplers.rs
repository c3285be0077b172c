//! One-step kernels and chain drivers.
//!
//! Kernels are pure functions of the current state and the supplied noise so
//! they can be driven by shared noise in tests. The drivers draw the noise
//! from a [`NoiseStream`] keyed by the seed, run index and particle index.

use rayon::prelude::*;

use crate::conjugate::{self, InvertSettings};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mirror::Mirror;
use crate::potentials::Potential;
use crate::rng::{NoiseStream, Purpose};

/// Offset applied along the first axis when an iterate lands exactly on a
/// nondifferentiable origin.
pub const ORIGIN_PERTURBATION: f64 = 1e-12;

/// Axis-aligned box `∏[−aᵢ, aᵢ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBody {
    half_widths: Vec<f64>,
}

impl BoxBody {
    pub fn new(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() || half_widths.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "half_widths",
                reason: "box body needs positive finite half-widths".into(),
            });
        }
        Ok(Self { half_widths })
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    /// Membership in the closed box.
    pub fn contains(&self, x: &Point) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.half_widths).all(|(v, a)| v.abs() <= *a)
    }

    /// Membership in the open box.
    pub fn contains_strictly(&self, x: &Point) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.half_widths).all(|(v, a)| v.abs() < *a)
    }

    /// Euclidean projection (coordinatewise clamp).
    pub fn project(&self, x: &Point) -> Point {
        Point::from_iterator(x.len(), x.iter().zip(&self.half_widths).map(|(v, a)| v.clamp(-a, *a)))
    }

    pub fn sample_uniform(&self, stream: &mut NoiseStream) -> Point {
        Point::from_iterator(self.dim(), self.half_widths.iter().map(|a| stream.uniform_in(-a, *a)))
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|a| 2.0 * a).product()
    }
}

/// What a chain samples from.
#[derive(Clone, Debug)]
pub enum Target {
    /// `π ∝ exp(−V)`.
    Density(Potential),
    /// The uniform law on a box.
    Uniform(BoxBody),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Self::Density(p) => p.dim(),
            Self::Uniform(b) => b.dim(),
        }
    }

    fn potential(&self, sampler: &str) -> Result<&Potential> {
        match self {
            Self::Density(p) => Ok(p),
            Self::Uniform(_) => Err(Error::Precondition(format!(
                "{sampler} needs a potential; the uniform target has no gradient"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum SamplerKind {
    Ula,
    /// Tamed ULA; the taming parameter is carried for reporting.
    Tula { taming: f64 },
    Nla,
    Mla(Mirror),
    Pla(BoxBody),
    Mala,
}

impl SamplerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Ula => "ULA",
            Self::Tula { .. } => "TULA",
            Self::Nla => "NLA",
            Self::Mla(_) => "MLA",
            Self::Pla(_) => "PLA",
            Self::Mala => "MALA",
        }
    }

    fn uses_inversion(&self) -> bool {
        matches!(self, Self::Nla | Self::Mla(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub h: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub run_index: u32,
    /// Particle index within a cloud; selects an independent noise stream.
    pub particle: u32,
    pub invert: InvertSettings,
}

impl SamplerConfig {
    pub fn new(h: f64, steps: usize, seed: u64) -> Self {
        Self {
            h,
            steps,
            burn_in: 0,
            seed,
            run_index: 0,
            particle: 0,
            invert: InvertSettings::default(),
        }
    }

    pub fn validate(&self, kind: &SamplerKind) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter {
                name: "h",
                reason: format!("step size must be positive, got {}", self.h),
            });
        }
        if self.steps <= self.burn_in {
            return Err(Error::InvalidParameter {
                name: "steps",
                reason: format!("steps ({}) must exceed burn_in ({})", self.steps, self.burn_in),
            });
        }
        match kind {
            SamplerKind::Nla if self.h > 1.0 => Err(Error::InvalidParameter {
                name: "h",
                reason: format!("NLA needs h <= 1, got {}", self.h),
            }),
            SamplerKind::Tula { taming } if !(*taming > 0.0) => Err(Error::InvalidParameter {
                name: "taming",
                reason: format!("must be positive, got {taming}"),
            }),
            _ => self.invert.validate(),
        }
    }

    fn stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed, Purpose::Chain, self.run_index, self.particle)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: Point,
    /// `∇φ(x)` for the samplers that move in dual coordinates.
    pub dual_cache: Option<Point>,
    pub step_count: usize,
    /// Newton iterations spent by the last step (zero for closed forms).
    pub newton_iterations: usize,
    /// Whether the last MALA proposal was accepted; `true` for other kernels.
    pub accepted: bool,
}

impl ChainState {
    pub fn new(x: Point) -> Self {
        Self {
            x,
            dual_cache: None,
            step_count: 0,
            newton_iterations: 0,
            accepted: true,
        }
    }

    fn next(&self, x: Point, dual_cache: Option<Point>, newton_iterations: usize, accepted: bool) -> Self {
        Self {
            x,
            dual_cache,
            step_count: self.step_count + 1,
            newton_iterations,
            accepted,
        }
    }
}

fn avoid_origin(mut x: Point, singular: bool) -> Point {
    if singular && !x.is_empty() && x.iter().all(|v| *v == 0.0) {
        x[0] = ORIGIN_PERTURBATION;
    }
    x
}

pub fn ula_step(pot: &Potential, state: &ChainState, h: f64, xi: &Point) -> Result<ChainState> {
    let g = pot.gradient(&state.x)?;
    let x = avoid_origin(&state.x - g * h + xi * (2.0 * h).sqrt(), pot.singular_at_origin());
    Ok(state.next(x, None, 0, true))
}

/// ULA with drift `∇V / (1 + h‖∇V‖)`. `taming` does not enter the update.
pub fn tula_step(pot: &Potential, state: &ChainState, h: f64, xi: &Point, taming: f64) -> Result<ChainState> {
    let _ = taming;
    let g = pot.gradient(&state.x)?;
    let scale = h / (1.0 + h * g.norm());
    let x = avoid_origin(&state.x - g * scale + xi * (2.0 * h).sqrt(), pot.singular_at_origin());
    Ok(state.next(x, None, 0, true))
}

/// `∇V(x') = (1 − h)∇V(x) + √(2h) M ξ` with `M Mᵀ = ∇²V(x)`.
pub fn nla_step(pot: &Potential, state: &ChainState, h: f64, xi: &Point, settings: &InvertSettings) -> Result<ChainState> {
    let y = match &state.dual_cache {
        Some(y) => y.clone(),
        None => pot.gradient(&state.x)?,
    };
    let m = pot.hessian_factor(&state.x)?;
    let target = y * (1.0 - h) + m * xi * (2.0 * h).sqrt();
    let inv = conjugate::invert(pot, &target, Some(&state.x), settings)?;
    let x = avoid_origin(inv.point, pot.singular_at_origin());
    if !pot.in_domain(&x) {
        return Err(Error::Domain { family: pot.family() });
    }
    let dual = pot.gradient(&x)?;
    Ok(state.next(x, Some(dual), inv.iterations, true))
}

/// `∇φ(x') = ∇φ(x) − h∇V(x) + √(2h) M ξ` with `M Mᵀ = ∇²φ(x)`.
pub fn mla_step(
    pot: &Potential,
    mirror: &Mirror,
    state: &ChainState,
    h: f64,
    xi: &Point,
    settings: &InvertSettings,
) -> Result<ChainState> {
    let y = match &state.dual_cache {
        Some(y) => y.clone(),
        None => mirror.grad(&state.x)?,
    };
    let g = pot.gradient(&state.x)?;
    let m = mirror.hess_factor(&state.x)?;
    let target = y - g * h + m * xi * (2.0 * h).sqrt();
    let inv = conjugate::invert(mirror, &target, Some(&state.x), settings)?;
    let x = avoid_origin(inv.point, pot.singular_at_origin() || mirror.singular_at_origin());
    if !mirror.in_domain(&x) || !pot.in_domain(&x) {
        return Err(Error::Domain { family: pot.family() });
    }
    let dual = mirror.grad(&x)?;
    Ok(state.next(x, Some(dual), inv.iterations, true))
}

/// `Proj(x − h∇V(x) + √(2h)ξ)`; the drift is absent for the uniform target.
pub fn pla_step(body: &BoxBody, pot: Option<&Potential>, state: &ChainState, h: f64, xi: &Point) -> Result<ChainState> {
    let mut x = &state.x + xi * (2.0 * h).sqrt();
    if let Some(p) = pot {
        x -= p.gradient(&state.x)? * h;
    }
    Ok(state.next(body.project(&x), None, 0, true))
}

fn log_density(target: &Target, x: &Point) -> f64 {
    match target {
        Target::Density(p) => match p.value(x) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::NEG_INFINITY,
        },
        Target::Uniform(b) => {
            if b.contains(x) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

fn drift(target: &Target, x: &Point) -> Option<Point> {
    match target {
        Target::Density(p) => p.gradient(x).ok(),
        Target::Uniform(b) => Some(Point::zeros(b.dim())),
    }
}

/// Metropolis-adjusted Langevin step with acceptance uniform `u`.
pub fn mala_step(target: &Target, state: &ChainState, h: f64, u: f64, xi: &Point) -> Result<ChainState> {
    let reject = |s: &ChainState| s.next(s.x.clone(), None, 0, false);
    let gx = drift(target, &state.x).ok_or_else(|| Error::Precondition("MALA started where the gradient is undefined".into()))?;
    let proposal = &state.x - &gx * h + xi * (2.0 * h).sqrt();
    let lp_new = log_density(target, &proposal);
    if lp_new == f64::NEG_INFINITY {
        return Ok(reject(state));
    }
    let Some(gp) = drift(target, &proposal) else {
        return Ok(reject(state));
    };
    let lp_old = log_density(target, &state.x);
    let forward = (&proposal - &state.x + &gx * h).norm_squared() / (4.0 * h);
    let backward = (&state.x - &proposal + &gp * h).norm_squared() / (4.0 * h);
    let log_ratio = lp_new - lp_old - backward + forward;
    if u.ln() < log_ratio {
        Ok(state.next(proposal, None, 0, true))
    } else {
        Ok(reject(state))
    }
}

fn step_once(kind: &SamplerKind, target: &Target, state: &ChainState, h: f64, xi: &Point, u: f64, settings: &InvertSettings) -> Result<ChainState> {
    let next = step_kernel(kind, target, state, h, xi, u, settings)?;
    if next.x.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Precondition("iterate is no longer finite".into()))
    }
}

fn step_kernel(kind: &SamplerKind, target: &Target, state: &ChainState, h: f64, xi: &Point, u: f64, settings: &InvertSettings) -> Result<ChainState> {
    match kind {
        SamplerKind::Ula => ula_step(target.potential("ULA")?, state, h, xi),
        SamplerKind::Tula { taming } => tula_step(target.potential("TULA")?, state, h, xi, *taming),
        SamplerKind::Nla => nla_step(target.potential("NLA")?, state, h, xi, settings),
        SamplerKind::Mla(m) => mla_step(target.potential("MLA")?, m, state, h, xi, settings),
        SamplerKind::Pla(body) => {
            let pot = match target {
                Target::Density(p) => Some(p),
                Target::Uniform(_) => None,
            };
            pla_step(body, pot, state, h, xi)
        }
        SamplerKind::Mala => mala_step(target, state, h, u, xi),
    }
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. } | Error::StepFailure { .. } | Error::Domain { .. } | Error::NotPositiveDefinite { .. }
    )
}

/// Why and where a chain stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainFailure {
    /// Step (1-based) that could not be completed.
    pub step: usize,
    pub message: String,
}

/// One step of `kind`, retrying once with `h / 2` when the inversion fails.
pub fn advance(
    kind: &SamplerKind,
    target: &Target,
    state: &ChainState,
    h: f64,
    xi: &Point,
    u: f64,
    settings: &InvertSettings,
) -> std::result::Result<ChainState, ChainFailure> {
    match step_once(kind, target, state, h, xi, u, settings) {
        Ok(s) => Ok(s),
        Err(first) if kind.uses_inversion() && retryable(&first) => {
            step_once(kind, target, state, 0.5 * h, xi, u, settings).map_err(|second| ChainFailure {
                step: state.step_count + 1,
                message: format!("{}: {first}; retry with h/2: {second}", kind.tag()),
            })
        }
        Err(e) => Err(ChainFailure {
            step: state.step_count + 1,
            message: format!("{}: {e}", kind.tag()),
        }),
    }
}

/// Observer called after every step of a chain.
pub trait Recorder {
    fn record(&mut self, iteration: usize, state: &ChainState);
}

impl<F: FnMut(usize, &ChainState)> Recorder for F {
    fn record(&mut self, iteration: usize, state: &ChainState) {
        self(iteration, state)
    }
}

/// Records nothing.
pub struct NoRecorder;

impl Recorder for NoRecorder {
    fn record(&mut self, _: usize, _: &ChainState) {}
}

#[derive(Clone, Debug)]
pub struct ChainRun {
    /// Iterates after the burn-in, in order.
    pub retained: Vec<Point>,
    pub final_state: ChainState,
    pub failure: Option<ChainFailure>,
}

fn initial_state(kind: &SamplerKind, target: &Target, x0: Point) -> Result<ChainState> {
    if x0.len() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    let inside = match (kind, target) {
        (SamplerKind::Mla(m), Target::Density(p)) => m.in_domain(&x0) && p.in_domain(&x0),
        (SamplerKind::Pla(b), _) => b.contains(&x0),
        (_, Target::Density(p)) => p.in_domain(&x0),
        (_, Target::Uniform(b)) => b.contains(&x0),
    };
    if !inside {
        return Err(Error::Precondition("initial point lies outside the domain".into()));
    }
    Ok(ChainState::new(x0))
}

/// Runs `config.steps` steps from `x0`. A failed step ends the chain; the
/// failure is reported in the result rather than as an error.
pub fn run_chain(
    kind: &SamplerKind,
    target: &Target,
    config: &SamplerConfig,
    x0: Point,
    recorder: &mut dyn Recorder,
) -> Result<ChainRun> {
    config.validate(kind)?;
    let mut state = initial_state(kind, target, x0)?;
    let mut stream = config.stream();
    let mut xi = Point::zeros(target.dim());
    let mut retained = Vec::with_capacity(config.steps - config.burn_in);
    for iter in 1..=config.steps {
        stream.fill_normal(&mut xi);
        let u = if matches!(kind, SamplerKind::Mala) { stream.uniform() } else { 1.0 };
        match advance(kind, target, &state, config.h, &xi, u, &config.invert) {
            Ok(next) => state = next,
            Err(failure) => {
                return Ok(ChainRun {
                    retained,
                    final_state: state,
                    failure: Some(failure),
                })
            }
        }
        recorder.record(iter, &state);
        if iter > config.burn_in {
            retained.push(state.x.clone());
        }
    }
    Ok(ChainRun {
        retained,
        final_state: state,
        failure: None,
    })
}

/// Per-run statistic accumulated along a chain and read at checkpoints.
pub trait Statistic: Send {
    fn update(&mut self, iteration: usize, state: &ChainState);
    /// Current value; the length must not change along the chain.
    fn value(&self) -> Vec<f64>;
}

/// Statistic values of one replica at each checkpoint.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub run: u32,
    pub values: Vec<Vec<f64>>,
    pub failure: Option<ChainFailure>,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub checkpoints: Vec<usize>,
    /// Mean over surviving runs of the statistic at each checkpoint.
    pub mean: Vec<Vec<f64>>,
    pub survivors: usize,
    pub failures: Vec<(u32, ChainFailure)>,
    /// Per-run traces, when requested.
    pub runs: Vec<RunTrace>,
}

/// Options for [`run_ensemble`].
pub struct EnsembleSpec<'a> {
    pub num_runs: u32,
    /// Iterations (1-based, increasing) at which the statistic is read.
    pub checkpoints: &'a [usize],
    pub keep_runs: bool,
}

fn trace_run<S: Statistic>(
    kind: &SamplerKind,
    target: &Target,
    config: &SamplerConfig,
    x0: Point,
    mut stat: S,
    checkpoints: &[usize],
) -> Result<RunTrace> {
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let run = {
        let mut rec = |iter: usize, state: &ChainState| {
            stat.update(iter, state);
            if next < checkpoints.len() && checkpoints[next] == iter {
                values.push(stat.value());
                next += 1;
            }
        };
        run_chain(kind, target, config, x0, &mut rec)?
    };
    Ok(RunTrace {
        run: config.run_index,
        values,
        failure: run.failure,
    })
}

/// Independent replicas `0..num_runs` of `template`, replica `r` using run
/// index `r`. Replicas execute in parallel; the reduction runs in replica
/// order so the result does not depend on scheduling.
pub fn run_ensemble<S, X, F>(
    kind: &SamplerKind,
    target: &Target,
    template: &SamplerConfig,
    spec: &EnsembleSpec<'_>,
    x0: X,
    make_stat: F,
) -> Result<EnsembleResult>
where
    S: Statistic,
    X: Fn(u32) -> Point + Sync,
    F: Fn(u32) -> S + Sync,
{
    template.validate(kind)?;
    if spec.checkpoints.windows(2).any(|w| w[0] >= w[1]) || spec.checkpoints.last().is_some_and(|&c| c > template.steps) {
        return Err(Error::Precondition("checkpoints must increase and not exceed the step count".into()));
    }
    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut sum: Option<Vec<Vec<f64>>> = None;
    let mut survivors = 0;
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    let all: Vec<u32> = (0..spec.num_runs).collect();
    for block in all.chunks(chunk) {
        let traces: Vec<Result<RunTrace>> = block
            .par_iter()
            .map(|&r| {
                let config = SamplerConfig {
                    run_index: r,
                    ..template.clone()
                };
                trace_run(kind, target, &config, x0(r), make_stat(r), spec.checkpoints)
            })
            .collect();
        for trace in traces {
            let trace = trace?;
            match &trace.failure {
                Some(f) => failures.push((trace.run, f.clone())),
                None => {
                    survivors += 1;
                    match &mut sum {
                        None => sum = Some(trace.values.clone()),
                        Some(acc) => {
                            for (a, v) in acc.iter_mut().zip(&trace.values) {
                                for (ai, vi) in a.iter_mut().zip(v) {
                                    *ai += vi;
                                }
                            }
                        }
                    }
                }
            }
            if spec.keep_runs {
                runs.push(trace);
            }
        }
    }
    let mean = sum
        .map(|acc| {
            acc.into_iter()
                .map(|v| v.into_iter().map(|s| s / survivors as f64).collect())
                .collect()
        })
        .unwrap_or_default();
    Ok(EnsembleResult {
        checkpoints: spec.checkpoints.to_vec(),
        mean,
        survivors,
        failures,
        runs,
    })
}

/// Running mean of the iterates after a given iteration.
#[derive(Clone, Debug)]
pub struct RunningMean {
    start_after: usize,
    count: usize,
    sum: Point,
}

impl RunningMean {
    /// Averages iterates with index greater than `start_after`.
    pub fn new(dim: usize, start_after: usize) -> Self {
        Self {
            start_after,
            count: 0,
            sum: Point::zeros(dim),
        }
    }

    pub fn mean(&self) -> Point {
        if self.count == 0 {
            self.sum.clone()
        } else {
            &self.sum / self.count as f64
        }
    }
}

impl Statistic for RunningMean {
    fn update(&mut self, iteration: usize, state: &ChainState) {
        if iteration > self.start_after {
            self.sum += &state.x;
            self.count += 1;
        }
    }

    fn value(&self) -> Vec<f64> {
        self.mean().as_slice().to_vec()
    }
}

/// Running mean and running second moment, packed as `[mean, vec(S)]`.
#[derive(Clone, Debug)]
pub struct RunningMoments {
    count: usize,
    sum: Point,
    second: crate::geometry::Matrix,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: Point::zeros(dim),
            second: crate::geometry::Matrix::zeros(dim, dim),
        }
    }
}

impl Statistic for RunningMoments {
    fn update(&mut self, _: usize, state: &ChainState) {
        self.sum += &state.x;
        self.second.ger(1.0, &state.x, &state.x, 1.0);
        self.count += 1;
    }

    fn value(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        let mut out: Vec<f64> = self.sum.iter().map(|v| v / n).collect();
        out.extend(self.second.iter().map(|v| v / n));
        out
    }
}

/// Outcome of [`run_cloud`].
#[derive(Clone, Debug)]
pub struct CloudRun {
    pub points: Vec<Point>,
    pub failures: Vec<(u32, ChainFailure)>,
}

/// Runs one chain per initial point in lockstep; particle `i` uses particle
/// index `i`. `observe` sees the whole cloud after every step. A particle
/// whose step fails stays frozen at its last state.
pub fn run_cloud(
    kind: &SamplerKind,
    target: &Target,
    config: &SamplerConfig,
    initial: Vec<Point>,
    observe: &mut dyn FnMut(usize, &[Point]),
) -> Result<CloudRun> {
    config.validate(kind)?;
    struct Particle {
        state: ChainState,
        stream: NoiseStream,
        failed: Option<ChainFailure>,
    }
    let mut particles = initial
        .into_iter()
        .enumerate()
        .map(|(i, x0)| {
            let cfg = SamplerConfig {
                particle: i as u32,
                ..config.clone()
            };
            Ok(Particle {
                state: initial_state(kind, target, x0)?,
                stream: cfg.stream(),
                failed: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = target.dim();
    let mala = matches!(kind, SamplerKind::Mala);
    let mut points: Vec<Point> = particles.iter().map(|p| p.state.x.clone()).collect();
    for iter in 1..=config.steps {
        particles.par_iter_mut().for_each(|p| {
            if p.failed.is_some() {
                return;
            }
            let xi = p.stream.normal_vector(dim);
            let u = if mala { p.stream.uniform() } else { 1.0 };
            match advance(kind, target, &p.state, config.h, &xi, u, &config.invert) {
                Ok(s) => p.state = s,
                Err(f) => p.failed = Some(f),
            }
        });
        for (dst, p) in points.iter_mut().zip(&particles) {
            dst.copy_from(&p.state.x);
        }
        observe(iter, &points);
    }
    let failures = particles
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.failed.clone().map(|f| (i as u32, f)))
        .collect();
    Ok(CloudRun { points, failures })
}
