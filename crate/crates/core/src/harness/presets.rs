//! The preset registry.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::config::Overrides;

/// Which experiment pipeline a preset drives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Elliptical target `V = ⟨x, Σ⁻¹x⟩^γ / 2` with `Σ = diag(1, …, d)`.
    Scatter,
    Logistic,
    /// Clouds on the rectangle `[−0.01, 0.01] × [−1, 1]`; `mala` adds MALA.
    Rectangle { mala: bool },
    Laplace,
    FpSigmaSweep,
    FpNonGaussian,
    FpLangevinContrast,
    InequalitySuite,
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub family: Family,
    pub defaults: Overrides,
    /// Step sizes swept when `h` is not overridden; empty for single-`h`
    /// presets.
    pub h_grid: Vec<f64>,
    /// Override keys read by the preset besides `seed`.
    pub accepts: &'static [&'static str],
    /// Settings that are not overridable, for display.
    pub fixed: &'static [(&'static str, &'static str)],
    /// Record every iteration instead of a logarithmic checkpoint grid.
    pub dense_checkpoints: bool,
}

const SCATTER_FIXED: &[(&str, &str)] = &[
    ("scatter", "diag(1, 2, ..., d)"),
    ("samplers", "NLA, ULA, TULA (taming 0.1)"),
    ("x0", "(1, ..., 1) / sqrt(d)"),
    ("metrics", "mean_sq_error, scatter_rel_sq_error of each run's running moments, averaged over runs"),
];

const RECTANGLE_FIXED: &[(&str, &str)] = &[
    ("box", "[-0.01, 0.01] x [-1, 1]"),
    ("NLA target", "exp(-beta * barrier), barrier = -ln(0.01^2 - x1^2) - ln(1 - x2^2)"),
    ("x0", "origin for every point"),
    ("reference", "fresh uniform cloud per recorded iteration"),
    ("metrics", "sinkhorn_w2, exact_w2 (64-point subsamples)"),
];

const RECTANGLE_E3_FIXED: &[(&str, &str)] = &[
    ("box", "[-0.01, 0.01] x [-1, 1]"),
    ("NLA target", "exp(-beta * barrier), barrier = -ln(0.01^2 - x1^2) - ln(1 - x2^2)"),
    ("MALA h", "0.01"),
    ("x0", "origin for every point"),
    ("reference", "fresh uniform cloud per recorded iteration"),
    ("metrics", "sinkhorn_w2, exact_w2 (64-point subsamples)"),
];

fn overrides(f: impl FnOnce(&mut Overrides)) -> Overrides {
    let mut o = Overrides {
        seed: Some(0),
        ..Overrides::default()
    };
    f(&mut o);
    o
}

fn scatter(
    name: &'static str,
    summary: &'static str,
    (d, gamma): (usize, f64),
    (runs, steps): (u32, usize),
    dense_checkpoints: bool,
) -> Preset {
    Preset {
        name,
        summary,
        family: Family::Scatter,
        defaults: overrides(|o| {
            o.dimension = Some(d);
            o.gamma = Some(gamma);
            o.runs = Some(runs);
            o.steps = Some(steps);
        }),
        h_grid: vec![0.7, 0.05],
        accepts: &["h", "steps", "runs", "gamma", "dimension"],
        fixed: SCATTER_FIXED,
        dense_checkpoints,
    }
}

fn rectangle_e3(name: &'static str, summary: &'static str, points: usize, runs: u32) -> Preset {
    Preset {
        name,
        summary,
        family: Family::Rectangle { mala: true },
        defaults: overrides(|o| {
            o.h = Some(1e-5);
            o.steps = Some(1000);
            o.points = Some(points);
            o.runs = Some(runs);
            o.beta = Some(1e-4);
            o.epsilon_sinkhorn = Some(0.01);
        }),
        h_grid: Vec::new(),
        accepts: &["h", "steps", "points", "runs", "beta", "epsilonSinkhorn"],
        fixed: RECTANGLE_E3_FIXED,
        dense_checkpoints: false,
    }
}

fn fp(name: &'static str, summary: &'static str, family: Family) -> Preset {
    Preset {
        name,
        summary,
        family,
        defaults: overrides(|_| {}),
        h_grid: Vec::new(),
        accepts: &[],
        fixed: match family {
            Family::FpSigmaSweep => &[("cases", "N(0, s^2), s in {0.1, 1, 10, 100}; mirror phi = V"), FP_COMMON],
            Family::FpNonGaussian => &[("cases", "cosh(x) - 1 and x^4/4 + x^2/2; mirrors phi = V and x^2/2"), FP_COMMON],
            _ => &[("cases", "N(0, s^2), s in {1, 10}; mirrors x^2/2 and phi = V"), FP_COMMON],
        },
        dense_checkpoints: false,
    }
}

const FP_COMMON: (&str, &str) = (
    "solver",
    "512 cells, explicit Euler at the stability bound, mu0 = pi * exp(x / (2 s^2))",
);

impl Preset {
    /// Defaults merged with `overrides`, after checking that every key is
    /// one the preset reads.
    pub fn resolve(&self, overrides: &Overrides) -> Result<Overrides> {
        for key in overrides.keys() {
            if key != "seed" && !self.accepts.contains(&key) {
                let accepted = if self.accepts.is_empty() {
                    "only seed".to_string()
                } else {
                    format!("seed, {}", self.accepts.join(", "))
                };
                return Err(Error::Config {
                    key: key.to_string(),
                    reason: format!("preset `{}` does not use this key (accepts {accepted})", self.name),
                });
            }
        }
        let p = self.defaults.merged(overrides);
        let runs_nla = matches!(
            self.family,
            Family::Scatter | Family::Logistic | Family::Rectangle { .. } | Family::Laplace
        );
        if let Some(h) = p.h.filter(|h| runs_nla && *h > 1.0) {
            return Err(Error::Config {
                key: "h".into(),
                reason: format!("NLA needs h <= 1, got {h}"),
            });
        }
        if let (Some(steps), Some(burn)) = (p.steps, p.burn_in) {
            if burn >= steps {
                return Err(Error::Config {
                    key: "burnIn".into(),
                    reason: format!("burnIn ({burn}) must be below steps ({steps})"),
                });
            }
        }
        Ok(p)
    }

    /// Step sizes to run: the override if given, else the grid or default.
    pub fn step_sizes(&self, resolved: &Overrides) -> Vec<f64> {
        match (resolved.h, self.h_grid.is_empty()) {
            (Some(h), _) => vec![h],
            (None, false) => self.h_grid.clone(),
            (None, true) => Vec::new(),
        }
    }

    /// Parameter table as printed by `list-presets`.
    pub fn describe(&self) -> String {
        let mut out = format!("{}\n  {}\n", self.name, self.summary);
        let json = serde_json::to_value(&self.defaults).unwrap_or_default();
        if let Some(map) = json.as_object() {
            for (k, v) in map {
                let _ = writeln!(out, "  {k:<16} {v}");
            }
        }
        if !self.h_grid.is_empty() {
            let grid: Vec<String> = self.h_grid.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "  {:<16} {{{}}}", "h grid", grid.join(", "));
        }
        for (k, v) in self.fixed {
            let _ = writeln!(out, "  {k:<16} {v}");
        }
        let overridable: Vec<&str> = std::iter::once("seed").chain(self.accepts.iter().copied()).collect();
        let _ = writeln!(out, "  {:<16} {}", "overrides", overridable.join(", "));
        out
    }
}

/// All presets in display order.
pub fn registry() -> Vec<Preset> {
    vec![
        scatter(
            "gengauss",
            "generalized Gaussian, gamma = 3/4, d = 100, 50 runs",
            (100, 0.75),
            (50, 1000),
            false,
        ),
        scatter("gauss", "Gaussian, d = 100, 50 runs", (100, 1.0), (50, 1000), false),
        scatter(
            "gengauss-desk",
            "generalized Gaussian, gamma = 3/4, d = 10, 20 runs (desk scale)",
            (10, 0.75),
            (20, 500),
            true,
        ),
        Preset {
            name: "logistic",
            summary: "Bayesian logistic regression posterior, n = 100 synthetic rows",
            family: Family::Logistic,
            defaults: overrides(|o| {
                o.steps = Some(20_000);
                o.burn_in = Some(10_000);
                o.runs = Some(1);
            }),
            h_grid: vec![0.1, 0.05, 0.01],
            accepts: &["h", "steps", "burnIn", "runs"],
            fixed: &[
                ("data", "X ~ N(0, diag(10, 0.1)), Y ~ Bernoulli(logit(X theta*)), theta* = (1, 1)"),
                ("prior", "N(0, 10 I)"),
                ("samplers", "NLA (Newton inversion, warm start), ULA, TULA (taming 0.1)"),
                ("x0", "origin"),
                ("metrics", "mean_sq_error of the running mean against the quadrature posterior mean"),
            ],
            dense_checkpoints: false,
        },
        Preset {
            name: "rectangle-fig3",
            summary: "NLA vs PLA on the thin rectangle, 200 iterations, h = 1e-4",
            family: Family::Rectangle { mala: false },
            defaults: overrides(|o| {
                o.h = Some(1e-4);
                o.steps = Some(200);
                o.points = Some(1000);
                o.runs = Some(1);
                o.beta = Some(1e-4);
                o.epsilon_sinkhorn = Some(0.01);
            }),
            h_grid: Vec::new(),
            accepts: &["h", "steps", "points", "runs", "beta", "epsilonSinkhorn"],
            fixed: RECTANGLE_FIXED,
            dense_checkpoints: false,
        },
        rectangle_e3(
            "rectangle-e3",
            "NLA, PLA (h = 1e-5) and MALA (h = 0.01) clouds of 1000 points, 30 runs",
            1000,
            30,
        ),
        rectangle_e3(
            "rectangle-e3-desk",
            "as rectangle-e3 with 200 points and 10 runs (desk scale)",
            200,
            10,
        ),
        Preset {
            name: "laplace",
            summary: "exp(-|x| - beta |x - 1|^2) in 2-D from |X0| = 1000, two stages of 1000 iterations",
            family: Family::Laplace,
            defaults: overrides(|o| {
                o.beta = Some(0.0005);
                o.h = Some(0.1);
                o.steps = Some(2000);
                o.burn_in = Some(1000);
                o.runs = Some(10);
            }),
            h_grid: Vec::new(),
            accepts: &["h", "steps", "burnIn", "runs", "beta"],
            fixed: &[
                ("samplers", "NLA, ULA, TULA (taming 0.1), MLA (mirror |x|^(3/2))"),
                ("x0", "seeded uniform direction, norm 1000"),
                ("metrics", "mean_sq_error of the running mean to 0, restarted after burnIn"),
            ],
            dense_checkpoints: true,
        },
        fp(
            "fp-gaussian-sigma-sweep",
            "Fokker-Planck chi-squared decay of the Newton-Langevin diffusion across scales",
            Family::FpSigmaSweep,
        ),
        fp(
            "fp-nongaussian",
            "Fokker-Planck decay on non-Gaussian strictly log-concave targets",
            Family::FpNonGaussian,
        ),
        fp(
            "fp-langevin-contrast",
            "Fokker-Planck decay of the Langevin diffusion (rate 2/s^2) vs Newton-Langevin (rate 2)",
            Family::FpLangevinContrast,
        ),
        Preset {
            name: "inequality-suite",
            summary: "quadrature and closed-form checks of the functional inequalities",
            family: Family::InequalitySuite,
            defaults: overrides(|_| {}),
            h_grid: Vec::new(),
            accepts: &[],
            fixed: &[(
                "checks",
                "brascamp-lieb, exp-concave-kl, perturbation-kl, lojasiewicz, transport (constants 9 and 8)",
            )],
            dense_checkpoints: false,
        },
    ]
}

pub fn preset_names() -> Vec<&'static str> {
    registry().iter().map(|p| p.name).collect()
}

pub fn find_preset(name: &str) -> Result<Preset> {
    registry()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            valid: preset_names().join(", "),
        })
}

/// The catalog printed by `list-presets`; an empty filter lists everything.
pub fn list_presets(filter: &[String]) -> Result<String> {
    let chosen = if filter.is_empty() {
        registry()
    } else {
        filter.iter().map(|n| find_preset(n)).collect::<Result<Vec<_>>>()?
    };
    Ok(chosen.iter().map(Preset::describe).collect::<Vec<_>>().join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique() {
        let names = preset_names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn spot_printed_presets_reflect_registry() {
        let text = list_presets(&["gengauss".into(), "rectangle-fig3".into(), "laplace".into()]).unwrap();
        assert!(text.contains("gengauss\n"));
        assert!(text.contains("gamma            0.75"));
        assert!(text.contains("dimension        100"));
        assert!(text.contains("h grid           {0.7, 0.05}"));
        assert!(text.contains("h                0.0001"));
        assert!(text.contains("steps            200"));
        assert!(text.contains("beta             0.0005"));
        assert!(text.contains("burnIn           1000"));
    }

    #[test]
    fn empty_filter_lists_all_and_unknown_errors() {
        let all = list_presets(&[]).unwrap();
        for name in preset_names() {
            assert!(all.contains(&format!("{name}\n")));
        }
        match list_presets(&["nope".into()]) {
            Err(Error::UnknownPreset { valid, .. }) => assert!(valid.contains("gengauss-desk")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolve_checks_the_schema() {
        let p = find_preset("gengauss").unwrap();
        let mut o = Overrides::default();
        o.set_assignment("gamma=0.75").unwrap();
        assert_eq!(p.resolve(&o).unwrap().gamma, Some(0.75));
        o.set_assignment("beta=0.1").unwrap();
        assert!(matches!(p.resolve(&o), Err(Error::Config { key, .. }) if key == "beta"));
        let l = find_preset("laplace").unwrap();
        let mut o = Overrides::default();
        o.set_assignment("burnIn=3000").unwrap();
        assert!(l.resolve(&o).is_err());
        let fig3 = find_preset("rectangle-fig3").unwrap();
        assert!(fig3.step_sizes(&fig3.resolve(&Overrides::default()).unwrap()) == vec![1e-4]);
        assert_eq!(p.step_sizes(&p.resolve(&Overrides::default()).unwrap()), vec![0.7, 0.05]);
    }
}
