//! Acceptance criteria, one line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` cannot be met with the stated
//! tolerances; they are still evaluated in full and reported as FAIL. The
//! process exits nonzero when any other criterion fails or when an expected
//! failure starts passing.

use std::process::ExitCode;
use std::time::Instant;

use mirror_langevin::conjugate::{invert_gradient, GradientMap, InvertSettings};
use mirror_langevin::fokker_planck::{
    fit_decay_rate, tilted, Divergence, FpProblem, ScalarMirror, ScalarPotential,
};
use mirror_langevin::harness::config::ExperimentConfig;
use mirror_langevin::harness::data::generate_logistic_data;
use mirror_langevin::harness::output::AGGREGATE_RUN;
use mirror_langevin::harness::presets::preset_names;
use mirror_langevin::harness::run::run_in_memory;
use mirror_langevin::harness::suite::inequality_suite;
use mirror_langevin::rng::{NoiseStream, Purpose};
use mirror_langevin::samplers::{run_chain, run_ensemble, ChainState, EnsembleSpec, SamplerConfig, SamplerKind, Statistic, Target};
use mirror_langevin::{Matrix, Mirror, Point, Potential, Result};

const EXPECTED_FAILURES: [u32; 3] = [2, 8, 9];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn fp_case(target: ScalarPotential, mirror: ScalarMirror, t_end: f64, tilt: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let grid = target.truncated_grid(512)?;
    let problem = FpProblem::new(target, mirror, grid)?;
    let dt = problem.max_dt();
    let steps = (t_end / dt).round() as usize;
    let traj = problem.evolve(&tilted(&problem, tilt), t_end, dt, (steps / 400).max(1))?;
    let series = Divergence::ALL
        .iter()
        .map(|k| traj.divergence_series(&problem.pi, *k))
        .collect::<Result<Vec<_>>>()?;
    Ok((traj.times, series))
}

/// Newton-Langevin rates ∈ [1.9, 2.1] and Langevin rates within 10% of
/// 2/σ², each case within two minutes.
fn criterion_1() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for sigma in [1.0, 10.0] {
        let v = sigma * sigma;
        for (name, mirror, t_end, expected, tol) in [
            ("NLD", ScalarMirror::Newton, 12.0, 2.0, 0.1),
            ("LD", ScalarMirror::Quadratic, 12.0 * v, 2.0 / v, 0.1 * 2.0 / v),
        ] {
            let start = Instant::now();
            let (times, series) = fp_case(ScalarPotential::gaussian(0.0, v)?, mirror, t_end, 0.5 / v)?;
            let rate = fit_decay_rate(&times, &series[0])?.rate;
            let secs = start.elapsed().as_secs_f64();
            let ok = (rate - expected).abs() <= tol && secs <= 120.0;
            pass &= ok;
            parts.push(format!("{name} s={sigma}: {rate:.4} (want {expected} +- {tol}, {secs:.1}s)"));
        }
    }
    verdict(pass, parts.join("; "))
}

/// `2TV² ≤ H² ≤ KL ≤ χ² ≤ e^{−2t} χ²₀ (1.05)` at every recorded time.
fn criterion_2() -> Result<Verdict> {
    let cases = [
        ("gaussian s=1", ScalarPotential::gaussian(0.0, 1.0)?, 0.5),
        ("gaussian s=10", ScalarPotential::gaussian(0.0, 100.0)?, 0.005),
        ("cosh", ScalarPotential::Cosh, 0.5),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target, tilt) in cases {
        let (times, s) = fp_case(target, ScalarMirror::Newton, 12.0, tilt)?;
        let (chi2, kl, tv, h2) = (&s[0], &s[1], &s[2], &s[3]);
        let mut bad = [0usize; 4];
        let mut worst = (0.0f64, 0.0f64);
        for j in 0..times.len() {
            if 2.0 * tv[j] * tv[j] > h2[j] {
                bad[0] += 1;
                if 2.0 * tv[j] * tv[j] / h2[j] > worst.0 / worst.1.max(f64::MIN_POSITIVE) {
                    worst = (2.0 * tv[j] * tv[j], h2[j]);
                }
            }
            bad[1] += usize::from(h2[j] > kl[j] + 1e-12);
            bad[2] += usize::from(kl[j] > chi2[j]);
            bad[3] += usize::from(chi2[j] > (-2.0 * times[j]).exp() * chi2[0] * 1.05);
        }
        pass &= bad.iter().all(|b| *b == 0);
        parts.push(format!(
            "{name}: violations 2TV^2<=H2 {}, H2<=KL {}, KL<=chi2 {}, decay {} of {} (worst 2TV^2={:.4e} vs H2={:.4e})",
            bad[0],
            bad[1],
            bad[2],
            bad[3],
            times.len(),
            worst.0,
            worst.1
        ));
    }
    verdict(pass, parts.join("; "))
}

/// Running moments of the current iterate, `[x, x², x³, x⁴]`.
struct Powers(f64);

impl Statistic for Powers {
    fn update(&mut self, _: usize, state: &ChainState) {
        self.0 = state.x[0];
    }

    fn value(&self) -> Vec<f64> {
        let x = self.0;
        vec![x, x * x, x * x * x, x * x * x * x]
    }
}

/// NLA marginals against the OU closed form within 3 standard errors.
fn criterion_3() -> Result<Verdict> {
    let h = 1e-3;
    let n = 10_000u32;
    let mut pass = true;
    let mut parts = Vec::new();
    for sigma in [1.0, 10.0] {
        let (m0, s0) = (2.0 * sigma, 0.5 * sigma);
        let target = Target::Density(Potential::gaussian(Matrix::from_element(1, 1, sigma * sigma))?);
        let checkpoints = [500usize, 1000, 2000];
        let spec = EnsembleSpec {
            num_runs: n,
            checkpoints: &checkpoints,
            keep_runs: false,
        };
        let ens = run_ensemble(
            &SamplerKind::Nla,
            &target,
            &SamplerConfig::new(h, 2000, 3),
            &spec,
            |r| {
                let mut s = NoiseStream::new(3, Purpose::Init, r, 0);
                Point::from_element(1, m0 + s0 * s.normal())
            },
            |_| Powers(0.0),
        )?;
        for (k, t) in checkpoints.iter().map(|&k| (k, k as f64 * h)) {
            let i = checkpoints.iter().position(|&c| c == k).unwrap();
            let [e1, e2, e3, e4] = [ens.mean[i][0], ens.mean[i][1], ens.mean[i][2], ens.mean[i][3]];
            let var = e2 - e1 * e1;
            let m4 = e4 - 4.0 * e3 * e1 + 6.0 * e2 * e1 * e1 - 3.0 * e1.powi(4);
            let mean_exact = m0 * (-t).exp();
            let var_exact = sigma * sigma + (s0 * s0 - sigma * sigma) * (-2.0 * t).exp();
            let se_mean = (var / n as f64).sqrt();
            let se_var = ((m4 - var * var) / n as f64).sqrt();
            let zm = (e1 - mean_exact) / se_mean;
            let zv = (var - var_exact) / se_var;
            let ok = zm.abs() <= 3.0 && zv.abs() <= 3.0;
            pass &= ok;
            parts.push(format!("s={sigma} t={t}: z_mean {zm:+.2}, z_var {zv:+.2}"));
        }
    }
    verdict(pass, parts.join("; "))
}

fn suite_checks(name: &str) -> Result<Vec<(String, f64, f64)>> {
    Ok(inequality_suite(0)?
        .checks
        .into_iter()
        .filter(|c| c.check == name)
        .map(|c| (c.instance, c.lhs, c.rhs))
        .collect())
}

/// Brascamp–Lieb with 1e-8 slack on 20 functions × 3 targets; linear
/// equality within 1e-6.
fn criterion_4() -> Result<Verdict> {
    let random = suite_checks("brascamp-lieb")?;
    let linear = suite_checks("brascamp-lieb-linear")?;
    let targets: std::collections::BTreeSet<&str> = random.iter().map(|(i, _, _)| i.split(' ').next().unwrap()).collect();
    let bad = random.iter().filter(|(_, var, energy)| *var > energy + 1e-8).count();
    let worst_linear = linear
        .iter()
        .map(|(_, var, energy)| (var - energy).abs() / energy.max(1.0))
        .fold(0.0, f64::max);
    let pass = random.len() == 60 && targets.len() == 3 && bad == 0 && worst_linear <= 1e-6;
    verdict(
        pass,
        format!("{} functions on {} targets, {bad} violations; linear relative gap {worst_linear:.2e}", random.len(), targets.len()),
    )
}

fn criterion_5() -> Result<Verdict> {
    let checks = suite_checks("exp-concave-kl")?;
    let bad = checks.iter().filter(|(_, kl, nu)| *kl > nu + 1e-8).count();
    let families: std::collections::BTreeSet<&str> = checks.iter().map(|(i, _, _)| i.split(' ').next().unwrap()).collect();
    verdict(
        bad == 0 && families.len() == 3,
        format!("{} instances over {} families, {bad} with KL > nu + 1e-8", checks.len(), families.len()),
    )
}

fn criterion_6() -> Result<Verdict> {
    let checks = suite_checks("perturbation-kl")?;
    let bad = checks.iter().filter(|(_, kl, b)| *kl > b + 1e-10).count();
    let laplace = checks.iter().filter(|(i, _, _)| i.starts_with("laplace")).count();
    let gauss = checks.iter().filter(|(i, _, _)| i.starts_with("gaussian")).count();
    verdict(
        bad == 0 && laplace == 3 && gauss == 3,
        format!("laplace x{laplace}, gaussian x{gauss}, {bad} violations"),
    )
}

fn criterion_7() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, slack) in [("lojasiewicz", 1e-8), ("transport-9", 0.0), ("transport-8", 0.0)] {
        let checks = suite_checks(name)?;
        let bad = checks.iter().filter(|(_, l, r)| *l > r + slack).count();
        pass &= bad == 0 && checks.len() == 63;
        parts.push(format!("{name}: {bad}/{} violations", checks.len()));
    }
    verdict(pass, parts.join("; "))
}

fn series_min(rows: &[(usize, f64)], up_to: usize) -> f64 {
    rows.iter().filter(|(i, _)| *i <= up_to).map(|(_, v)| *v).fold(f64::INFINITY, f64::min)
}

/// gengauss-desk: NLA reaches 1e-2 within 500 iterations for both step
/// sizes; ULA at h = 0.7 never reaches 1e-1 there.
fn criterion_8() -> Result<Verdict> {
    let start = Instant::now();
    let (out, _) = run_in_memory(&ExperimentConfig::new("gengauss-desk", "unused"))?;
    let secs = start.elapsed().as_secs_f64();
    let best = |tag: &str| series_min(&out.metrics.series(tag, AGGREGATE_RUN, "mean_sq_error"), 500);
    let (n07, n005, u07) = (best("NLA-h0.7"), best("NLA-h0.05"), best("ULA-h0.7"));
    let pass = n07 < 1e-2 && n005 < 1e-2 && u07 >= 1e-1 && secs <= 300.0;
    verdict(
        pass,
        format!("min mean_sq_error to 500: NLA-h0.7 {n07:.4e}, NLA-h0.05 {n005:.4e} (want < 1e-2); ULA-h0.7 {u07:.4e} (want >= 1e-1); {secs:.1}s"),
    )
}

/// rectangle-e3-desk: NLA Sinkhorn drop ≥ 10× over 1000 iterations, final
/// exact_w2 < 5e-3, every NLA iterate strictly inside.
fn criterion_9() -> Result<Verdict> {
    let (out, meta) = run_in_memory(&ExperimentConfig::new("rectangle-e3-desk", "unused"))?;
    let s = out.metrics.series("NLA", AGGREGATE_RUN, "sinkhorn_w2");
    let e = out.metrics.series("NLA", AGGREGATE_RUN, "exact_w2");
    let at = |rows: &[(usize, f64)], k: usize| rows.iter().find(|(i, _)| *i == k).map(|(_, v)| *v).unwrap_or(f64::NAN);
    let drop = at(&s, 1) / at(&s, 1000);
    let exact = at(&e, 1000);
    let outside = meta["details"]["samplers"]["NLA"]["iteratesNotStrictlyInside"].as_u64().unwrap_or(u64::MAX);
    let pass = drop >= 10.0 && exact < 5e-3 && outside == 0;
    verdict(
        pass,
        format!("sinkhorn iter1/iter1000 = {drop:.2} (want >= 10); exact_w2 at 1000 = {exact:.4e} (want < 5e-3); NLA iterates not strictly inside: {outside}"),
    )
}

/// Round trips within 1e-7 for every mirror kind; logistic NLA uses at most
/// 10 Newton iterations in at least 99% of 10⁴ steps.
fn criterion_10() -> Result<Verdict> {
    let data = std::sync::Arc::new(generate_logistic_data(100, 0));
    let barrier = Potential::box_barrier(vec![0.01, 1.0])?;
    let maps: Vec<(&str, Box<dyn GradientMap>)> = vec![
        ("quadratic", Box::new(Mirror::quadratic(2))),
        ("potential", Box::new(Mirror::PotentialAsMirror(Potential::logistic(data.clone(), 10.0)?))),
        ("power-norm", Box::new(Mirror::power_norm(1.5, 2)?)),
        ("barrier", Box::new(Mirror::barrier(barrier)?)),
    ];
    let mut worst_all: f64 = 0.0;
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (name, map)) in maps.iter().enumerate() {
        let mut s = NoiseStream::new(10, Purpose::Auxiliary, k as u32, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (x, warm) = if *name == "barrier" {
                (Point::from_column_slice(&[s.uniform_in(-0.0099, 0.0099), s.uniform_in(-0.99, 0.99)]), Point::zeros(2))
            } else {
                let x = s.normal_vector(2) * 2.0;
                let w = &x + s.normal_vector(2) * 0.1;
                (x, w)
            };
            let err = match invert_gradient(map.as_ref(), &map.grad(&x)?, &warm, &InvertSettings::default()) {
                Ok(inv) => (inv.point - &x).norm(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
        }
        pass &= worst <= 1e-7;
        worst_all = worst_all.max(worst);
        parts.push(format!("{name} {worst:.1e}"));
    }
    let target = Target::Density(Potential::logistic(data, 10.0)?);
    let mut counts = Vec::with_capacity(10_000);
    let run = run_chain(
        &SamplerKind::Nla,
        &target,
        &SamplerConfig::new(0.1, 10_000, 0),
        Point::zeros(2),
        &mut |_: usize, s: &ChainState| counts.push(s.newton_iterations),
    )?;
    let share = counts.iter().filter(|&&c| c <= 10).count() as f64 / 10_000.0;
    pass &= run.failure.is_none() && counts.len() == 10_000 && share >= 0.99;
    verdict(
        pass,
        format!("round-trip max error {}; logistic NLA steps with <= 10 Newton iterations: {:.2}%", parts.join(", "), 100.0 * share),
    )
}

/// Every preset twice with the same seed; the two 1000-point rectangle
/// presets run with fewer points, runs and steps.
fn criterion_11() -> Result<Verdict> {
    let reduced = |name: &str| -> Vec<&'static str> {
        match name {
            "rectangle-e3" => vec!["points=100", "runs=2", "steps=100"],
            "rectangle-fig3" => vec!["points=200"],
            _ => Vec::new(),
        }
    };
    let mut differing = Vec::new();
    for name in preset_names() {
        let mut cfg = ExperimentConfig::new(name, "unused");
        for a in reduced(name) {
            cfg = cfg.with(a)?;
        }
        let first = run_in_memory(&cfg)?.0.metrics.to_csv_string()?;
        let second = run_in_memory(&cfg)?.0.metrics.to_csv_string()?;
        if first != second || first.is_empty() {
            differing.push(name);
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} presets compared, differing: {:?}", preset_names().len(), differing),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Result<Verdict>); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let expected_failure = EXPECTED_FAILURES.contains(&id);
        let note = match (pass, expected_failure) {
            (false, true) => " [expected: unattainable as stated]",
            (true, true) => " [unexpected pass]",
            _ => "",
        };
        if pass == expected_failure {
            unexpected += 1;
        }
        println!(
            "criterion {id:>2}: {}{note} ({:.1}s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria deviated from the expected outcome");
        ExitCode::FAILURE
    }
}
