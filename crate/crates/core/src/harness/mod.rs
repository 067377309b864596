//! Experiment orchestration.
//!
//! An [`ExperimentConfig`] names a catalog system, an experiment kind and
//! the numerics; [`run_experiment`] computes the series, judges them
//! against [`tolerances`] and optionally writes `<series>.csv` files plus
//! `report.txt` into the configured output directory.

pub mod config;
pub mod csv;
pub mod tolerances;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{
    ExperimentConfig, ExperimentKind, ExperimentSection, InitialDensityKind, MeasureKind, MeasureSection, Numerics,
    OutputSection, RatioFunction, SystemConfig,
};
pub use csv::{emit_csv, format_float, render_csv, write_csv};

use crate::catalog::{
    circle_fixed_points, circle_k_closed_form, circle_stationary, make_baker, make_circle_flow, Baker, BakerSpec,
    CircleFlow, TimeDirection,
};
use crate::dynsys::{check_reversal, DiscreteSystem, Domain, IntegratorConfig, PhasePoint};
use crate::error::{Error, Result};
use crate::functionals::{
    bp_invariant, entropy_rate_profile, k_from_divergence, k_from_log_jacobian, l2_gap_squared, log_density_series,
    ratio_invariant, reversibility_k_pair, TimeSeries,
};
use crate::measures::{birkhoff_empirical, AbsContinuousMeasure, AtomicMeasure, StationaryMeasure};
use crate::transport::{
    CircleStationaryDensity, CosineBump, Density, DensityEvolution, QuadratureRule, StationaryPerturbed, UniformDensity,
};

/// Outcome of one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Values computed but no tolerance applies (e.g. `|omega| = 1`).
    Reported,
    /// A numerical or parameter error stopped the experiment.
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Reported => "reported",
            Status::Error => "error",
        }
    }

    /// Whether this outcome counts as success for the CLI exit code.
    pub fn is_success(self) -> bool {
        matches!(self, Status::Pass | Status::Reported)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub system: String,
    pub k_fit: Option<f64>,
    pub k_formula: Option<f64>,
    pub k_closed: Option<f64>,
    pub max_residual: Option<f64>,
    pub status: Status,
    /// Experiment-specific scalars, in emission order.
    pub extras: Vec<(String, f64)>,
    pub error: Option<String>,
    pub csv_files: Vec<PathBuf>,
}

impl ExperimentReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.kind,
            system: cfg.system.label(),
            k_fit: None,
            k_formula: None,
            k_closed: None,
            max_residual: None,
            status: Status::Error,
            extras: Vec::new(),
            error: None,
            csv_files: Vec::new(),
        }
    }

    pub fn gap_fit_formula(&self) -> Option<f64> {
        Some((self.k_fit? - self.k_formula?).abs())
    }

    pub fn gap_fit_closed(&self) -> Option<f64> {
        Some((self.k_fit? - self.k_closed?).abs())
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.status.is_success()
    }

    /// `key = value` lines; absent numbers print as `nan`.
    pub fn render(&self) -> String {
        let num = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), format_float);
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("k_fit", num(self.k_fit));
        line("k_formula", num(self.k_formula));
        line("k_closed", num(self.k_closed));
        line("gap_fit_formula", num(self.gap_fit_formula()));
        line("gap_fit_closed", num(self.gap_fit_closed()));
        line("max_residual", num(self.max_residual));
        line("status", self.status.as_str().to_string());
        line("experiment", self.experiment.name().to_string());
        line("system", self.system.clone());
        for (k, v) in &self.extras {
            line(k, format_float(*v));
        }
        if let Some(e) = &self.error {
            line("error", e.replace('\n', " "));
        }
        for path in &self.csv_files {
            line("csv", path.display().to_string());
        }
        out
    }
}

#[derive(Default)]
struct Outcome {
    k_fit: Option<f64>,
    k_formula: Option<f64>,
    k_closed: Option<f64>,
    max_residual: Option<f64>,
    /// `None` when nothing is asserted.
    passed: Option<bool>,
    extras: Vec<(String, f64)>,
    series: Vec<(String, TimeSeries)>,
}

impl Outcome {
    fn extra(&mut self, key: &str, v: f64) {
        self.extras.push((key.to_string(), v));
    }
}

/// Runs one experiment. Numerical failures end up in the report; only
/// configuration and output I/O errors are returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(cfg);
    let mut series = Vec::new();
    match run_kind(cfg) {
        Ok(o) => {
            report.k_fit = o.k_fit;
            report.k_formula = o.k_formula;
            report.k_closed = o.k_closed;
            report.max_residual = o.max_residual;
            report.status = match o.passed {
                Some(true) => Status::Pass,
                Some(false) => Status::Fail,
                None => Status::Reported,
            };
            report.extras = o.extras;
            series = o.series;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for (name, s) in &series {
            let path = dir.join(format!("{name}.csv"));
            emit_csv(s, &path)?;
            report.csv_files.push(path);
        }
        let path = dir.join("report.txt");
        std::fs::write(&path, report.render()).map_err(|source| Error::Io { path, source })?;
    }
    Ok(report)
}

/// The configuration behind `edlab k`: a k-slope run with the default
/// measure for the system and `t_max + 1` times on `[0, t_max]`.
pub fn k_slope_config(system: SystemConfig, t_max: f64, seed: u64) -> Result<ExperimentConfig> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Config(format!("t-max must be positive, got {t_max}")));
    }
    let times = match system {
        SystemConfig::Circle { .. } => (0..=10).map(|k| t_max * k as f64 / 10.0).collect(),
        SystemConfig::Baker { .. } => {
            if t_max.fract() != 0.0 {
                return Err(Error::Config(format!("baker t-max must be an integer, got {t_max}")));
            }
            (0..=t_max as usize).map(|n| n as f64).collect()
        }
    };
    let measure = match system {
        SystemConfig::Baker { a } if a != 0.5 => MeasureKind::Empirical,
        _ => MeasureKind::ClosedForm,
    };
    let cfg = ExperimentConfig {
        system,
        experiment: ExperimentSection {
            kind: ExperimentKind::KSlope,
            density: InitialDensityKind::Uniform,
            epsilon: None,
            p: None,
            f: None,
        },
        measure: MeasureSection {
            kind: measure,
            ..MeasureSection::default()
        },
        numerics: Numerics {
            times: Some(times),
            seed,
            ..Numerics::default()
        },
        output: OutputSection::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_kind(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment.kind {
        ExperimentKind::KSlope => k_slope(cfg),
        ExperimentKind::BpInvariance => bp_invariance(cfg),
        ExperimentKind::EntropyRate => entropy_rate(cfg),
        ExperimentKind::RatioInvariance => ratio_invariance(cfg),
        ExperimentKind::Reversibility => reversibility(cfg),
        ExperimentKind::WeakConvergenceProbe => weak_probe(cfg),
    }
}

enum Sys {
    Circle(Arc<CircleFlow>),
    Baker(Arc<Baker>),
}

fn system(cfg: &ExperimentConfig) -> Result<Sys> {
    Ok(match cfg.system {
        SystemConfig::Circle { omega } => Sys::Circle(Arc::new(make_circle_flow(omega))),
        SystemConfig::Baker { a } => Sys::Baker(Arc::new(make_baker(BakerSpec { a })?)),
    })
}

fn circle_only(cfg: &ExperimentConfig) -> Result<(f64, Arc<CircleFlow>)> {
    match (cfg.system, system(cfg)?) {
        (SystemConfig::Circle { omega }, Sys::Circle(flow)) => Ok((omega, flow)),
        _ => Err(Error::Unsupported(format!(
            "{} runs on the circle flow only",
            cfg.experiment.kind.name()
        ))),
    }
}

fn baker_only(cfg: &ExperimentConfig) -> Result<Arc<Baker>> {
    match system(cfg)? {
        Sys::Baker(b) => Ok(b),
        Sys::Circle(_) => Err(Error::Unsupported(format!(
            "{} runs on the baker map only",
            cfg.experiment.kind.name()
        ))),
    }
}

fn initial_density(cfg: &ExperimentConfig, domain: Domain) -> Result<Arc<dyn Density>> {
    let eps = cfg.epsilon();
    Ok(match cfg.experiment.density {
        InitialDensityKind::Uniform => Arc::new(UniformDensity::new(domain)),
        InitialDensityKind::CosineBump => Arc::new(CosineBump::new(domain, eps)?),
        InitialDensityKind::StationaryPerturbed => match cfg.system {
            SystemConfig::Circle { omega } => Arc::new(StationaryPerturbed::new(omega, eps)?),
            SystemConfig::Baker { .. } => {
                return Err(Error::Unsupported("stationary-perturbed density is circle-only".into()))
            }
        },
    })
}

fn evolution(cfg: &ExperimentConfig, sys: &Sys, rho0: Arc<dyn Density>) -> Result<DensityEvolution> {
    let ev = match sys {
        Sys::Circle(flow) => DensityEvolution::flow(rho0, flow.clone())?,
        Sys::Baker(baker) => DensityEvolution::map(rho0, baker.clone())?,
    };
    ev.with_config(IntegratorConfig::with_step(cfg.numerics.h)?)
}

fn horizon(times: &[f64]) -> u32 {
    times.last().copied().unwrap_or(0.0).ceil() as u32
}

fn dyadic_grid(cfg: &ExperimentConfig, times: &[f64]) -> Result<QuadratureRule> {
    let depth_y = cfg.numerics.dyadic_depth.unwrap_or(horizon(times) + 2);
    QuadratureRule::dyadic_rect(tolerances::SQUARE_X_DEPTH, depth_y)
}

fn circle_quad(cfg: &ExperimentConfig) -> Result<QuadratureRule> {
    QuadratureRule::circle_midpoint(cfg.numerics.quad_nodes)
}

/// The configured stationary measure, or `None` for the non-hyperbolic
/// circle at `|omega| = 1`, where the single fixed point is used and no
/// tolerance is asserted.
fn stationary(cfg: &ExperimentConfig, sys: &Sys, times: &[f64]) -> Result<(StationaryMeasure, bool)> {
    match (sys, cfg.measure.kind) {
        (Sys::Circle(_), MeasureKind::Empirical) => Err(Error::Unsupported(
            "empirical measures need a discrete system; use closed-form for the circle".into(),
        )),
        (Sys::Circle(flow), MeasureKind::ClosedForm) => {
            let omega = flow.omega();
            if omega.abs() == 1.0 {
                let x = PhasePoint::circle(omega.signum() * std::f64::consts::FRAC_PI_2);
                let atom = AtomicMeasure::flow_fixed_points(flow.as_ref(), vec![x], vec![1.0])?;
                return Ok((StationaryMeasure::Atomic(atom), false));
            }
            Ok((
                circle_stationary(omega, &circle_quad(cfg)?, TimeDirection::Forward)?,
                true,
            ))
        }
        (Sys::Baker(baker), MeasureKind::ClosedForm) => {
            if !baker.is_volume_preserving() {
                return Err(Error::Unsupported(
                    "the dissipative baker has no closed-form stationary measure; use empirical".into(),
                ));
            }
            let uniform = Arc::new(UniformDensity::new(Domain::UnitSquare));
            let ac = AbsContinuousMeasure::new(uniform, dyadic_grid(cfg, times)?)?;
            Ok((StationaryMeasure::AbsContinuous(ac), true))
        }
        (Sys::Baker(baker), MeasureKind::Empirical) => Ok((
            StationaryMeasure::Empirical(birkhoff_empirical(
                baker.as_ref(),
                None,
                cfg.measure.burn_in,
                cfg.measure.samples,
                cfg.numerics.seed,
            )?),
            true,
        )),
    }
}

fn k_slope(cfg: &ExperimentConfig) -> Result<Outcome> {
    let times = cfg.times();
    let sys = system(cfg)?;
    let (nu, asserted) = stationary(cfg, &sys, &times)?;
    let domain = nu.domain();
    let ev = evolution(cfg, &sys, initial_density(cfg, domain)?)?;
    let series = log_density_series(&ev, &nu, &times)?;
    let mut o = Outcome::default();
    let (formula, closed, tol, slope_tol) = match &sys {
        Sys::Circle(flow) => {
            let tol = match nu {
                StationaryMeasure::Atomic(_) => tolerances::K_ATOMIC,
                _ => tolerances::K_ABS_CONTINUOUS,
            };
            (
                k_from_divergence(&nu, flow.as_ref()),
                circle_k_closed_form(flow.omega()),
                tol,
                tol,
            )
        }
        Sys::Baker(baker) => {
            let formula = k_from_log_jacobian(&nu, baker.as_ref())?;
            let (tol, slope_tol) = match nu {
                StationaryMeasure::Empirical(_) => (tolerances::K_EMPIRICAL, tolerances::K_EMPIRICAL_CONSTANT_JACOBIAN),
                _ => (tolerances::K_VOLUME_PRESERVING, tolerances::K_VOLUME_PRESERVING),
            };
            (formula, baker.log_jacobian(), tol, slope_tol)
        }
    };
    o.k_formula = Some(formula);
    o.k_closed = Some(closed);
    if let Some(fit) = series.fit() {
        o.k_fit = Some(fit.slope);
        o.max_residual = Some(fit.max_abs_residual);
        if asserted {
            o.passed = Some(
                (fit.slope - formula).abs() < slope_tol
                    && (fit.slope - closed).abs() < slope_tol
                    && fit.max_abs_residual < tol,
            );
        }
    } else if asserted {
        o.passed = Some((formula - closed).abs() < slope_tol);
    }
    o.series.push(("log_density".into(), series));
    Ok(o)
}

fn bp_invariance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (omega, flow) = circle_only(cfg)?;
    if circle_fixed_points(omega).is_some() || omega.abs() == 1.0 {
        return Err(Error::Unsupported("bp-invariance needs |omega| > 1".into()));
    }
    let times = cfg.times();
    let nu_ac = AbsContinuousMeasure::normalize(CircleStationaryDensity::new(omega)?, circle_quad(cfg)?)?;
    let sys = Sys::Circle(flow);
    let ev = evolution(cfg, &sys, initial_density(cfg, Domain::Circle)?)?;
    let p = cfg.p();
    let bp = bp_invariant(&ev, &nu_ac, p, &times)?;
    let b1 = if p == 1.0 {
        bp.clone()
    } else {
        bp_invariant(&ev, &nu_ac, 1.0, &times)?
    };
    let l2 = l2_gap_squared(&ev, &nu_ac, &times)?;
    let volume = Domain::Circle.volume();
    let b1_0 = b1.values()[0];
    let floor_ratio = b1.values().iter().map(|v| v / b1_0).fold(f64::INFINITY, f64::min);
    let l2_margin = l2
        .values()
        .iter()
        .zip(b1.values())
        .map(|(l, b)| l - b * b / volume)
        .fold(f64::INFINITY, f64::min);
    let rel = bp.max_relative_deviation();
    let mut o = Outcome {
        max_residual: Some(rel),
        passed: Some(
            rel < tolerances::BP_RELATIVE
                && b1_0 > 0.0
                && floor_ratio >= tolerances::BP_FLOOR_FRACTION
                && l2_margin >= -tolerances::L2_BOUND_SLACK,
        ),
        ..Outcome::default()
    };
    o.extra("p", p);
    o.extra("bp_initial", bp.values()[0]);
    o.extra("max_relative_deviation", rel);
    o.extra("b1_min_ratio", floor_ratio);
    o.extra("l2_bound_margin", l2_margin);
    o.series.push(("bp".into(), bp));
    if p != 1.0 {
        o.series.push(("b1".into(), b1));
    }
    o.series.push(("l2_gap_squared".into(), l2));
    Ok(o)
}

fn entropy_rate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let times = cfg.times();
    let sys = system(cfg)?;
    let mut o = Outcome::default();
    match &sys {
        Sys::Circle(flow) => {
            let quad = circle_quad(cfg)?;
            let ev = evolution(cfg, &sys, initial_density(cfg, Domain::Circle)?)?;
            let profile = entropy_rate_profile(&ev, &times, tolerances::ENTROPY_DIFF_STEP, &quad)?;
            let gap = profile.max_rate_gap();
            o.max_residual = Some(gap);
            o.passed = Some(gap < tolerances::ENTROPY_RATE);
            if flow.omega().abs() != 1.0 {
                o.k_closed = Some(circle_k_closed_form(flow.omega()));
            }
            o.extra("max_rate_gap", gap);
            o.extra("rate_final", *profile.rate.values().last().expect("non-empty"));
            o.series.push(("entropy".into(), profile.entropy));
            o.series.push(("entropy_derivative".into(), profile.derivative));
            o.series.push(("entropy_rate".into(), profile.rate));
        }
        Sys::Baker(baker) => {
            let ev = evolution(cfg, &sys, initial_density(cfg, Domain::UnitSquare)?)?;
            let values = if baker.is_volume_preserving() {
                let quad = dyadic_grid(cfg, &times)?;
                times
                    .iter()
                    .map(|&t| ev.grid_gibbs_entropy(t, &quad))
                    .collect::<Result<Vec<_>>>()?
            } else {
                let quad = QuadratureRule::dyadic_rect(tolerances::SQUARE_X_DEPTH, tolerances::SQUARE_X_DEPTH)?;
                times
                    .iter()
                    .map(|&t| ev.lagrangian_gibbs_entropy(t, &quad))
                    .collect::<Result<Vec<_>>>()?
            };
            let series = TimeSeries::new(times.clone(), values)?.with_fit()?;
            // S(n) = S(0) + n log |det DT|
            let expected = -baker.log_jacobian();
            o.k_closed = Some(expected);
            if let Some(fit) = series.fit() {
                o.k_fit = Some(fit.slope);
                o.max_residual = Some(fit.max_abs_residual);
                o.passed = Some(
                    (fit.slope - expected).abs() < tolerances::ENTROPY_MAP
                        && fit.max_abs_residual < tolerances::ENTROPY_MAP,
                );
            } else {
                o.passed = Some(true);
            }
            o.extra("max_deviation", series.max_deviation());
            o.series.push(("entropy".into(), series));
        }
    }
    Ok(o)
}

fn ratio_invariance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let times = cfg.times();
    let sys = system(cfg)?;
    let (nu, asserted) = stationary(cfg, &sys, &times)?;
    let domain = nu.domain();
    let ev1 = evolution(cfg, &sys, initial_density(cfg, domain)?)?;
    let ev2 = evolution(cfg, &sys, Arc::new(UniformDensity::new(domain)))?;
    let f = cfg.experiment.f.unwrap_or_default();
    let series = ratio_invariant(&ev1, &ev2, &nu, |g| f.apply(g), &times)?;
    let dev = series.max_deviation();
    let tol = match nu {
        StationaryMeasure::Empirical(_) => tolerances::RATIO_EMPIRICAL,
        _ => tolerances::RATIO,
    };
    let mut o = Outcome {
        max_residual: Some(dev),
        passed: asserted.then_some(dev < tol),
        ..Outcome::default()
    };
    o.extra("ratio_initial", series.values()[0]);
    o.extra("max_deviation", dev);
    o.series.push(("ratio".into(), series));
    Ok(o)
}

fn reversibility(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (omega, flow) = circle_only(cfg)?;
    let icfg = IntegratorConfig::with_step(cfg.numerics.h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.numerics.seed);
    let mut residual: f64 = 0.0;
    for _ in 0..tolerances::REVERSAL_SAMPLES {
        let x = PhasePoint::circle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        let t = rng.random_range(0.0..=tolerances::REVERSAL_T_MAX);
        residual = residual.max(check_reversal(flow.as_ref(), &x, t, &icfg)?);
    }
    let mut o = Outcome {
        max_residual: Some(residual),
        ..Outcome::default()
    };
    o.extra("max_reversal_residual", residual);
    if omega.abs() == 1.0 {
        return Ok(o);
    }
    let (k_plus, k_minus) = reversibility_k_pair(omega, false)?;
    let closed = circle_k_closed_form(omega);
    o.k_formula = Some(k_plus);
    o.k_fit = Some(k_plus);
    o.k_closed = Some(closed);
    o.extra("k_minus", k_minus);
    o.passed = Some(
        residual < tolerances::REVERSAL_RESIDUAL
            && (k_plus - closed).abs() < tolerances::REVERSAL_K
            && (k_minus + closed).abs() < tolerances::REVERSAL_K,
    );
    Ok(o)
}

type Observable = (&'static str, fn(&PhasePoint) -> f64);

fn weak_probe(cfg: &ExperimentConfig) -> Result<Outcome> {
    let baker = baker_only(cfg)?;
    let times = cfg.times();
    let nx = cfg.numerics.quad_nodes | 1;
    let quad = QuadratureRule::doubling_lattice(nx, 1)?;
    let ev = DensityEvolution::map(Arc::new(UniformDensity::new(Domain::UnitSquare)), baker.clone())?;
    let nu = birkhoff_empirical(
        baker.as_ref(),
        None,
        cfg.measure.burn_in,
        cfg.measure.samples,
        cfg.numerics.seed,
    )?;
    let nu = StationaryMeasure::Empirical(nu);
    let observables: [Observable; 3] = [("x", |p| p.x()), ("y", |p| p.y()), ("xy", |p| p.x() * p.y())];
    let y_limit = 0.25 / (1.0 - baker.contraction());
    let mut o = Outcome::default();
    let mut passed = true;
    for (name, f) in observables {
        let values = times
            .iter()
            .map(|&t| ev.pushforward_expectation(f, t, &quad))
            .collect::<Result<Vec<_>>>()?;
        let last = *values.last().expect("non-empty");
        let empirical = nu.expect(f);
        let gap = (last - empirical).abs();
        passed &= gap < tolerances::WEAK_VS_EMPIRICAL;
        o.extra(&format!("mu_final_{name}"), last);
        o.extra(&format!("nu_empirical_{name}"), empirical);
        o.extra(&format!("gap_empirical_{name}"), gap);
        if name == "y" {
            let limit_gap = (last - y_limit).abs();
            passed &= limit_gap < tolerances::WEAK_LIMIT;
            o.extra("y_limit", y_limit);
            o.extra("gap_limit_y", limit_gap);
            o.max_residual = Some(limit_gap);
        }
        o.series
            .push((format!("mu_{name}"), TimeSeries::new(times.clone(), values)?));
    }
    o.passed = Some(passed);
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn k_slope_circle_half() {
        let cfg = config(
            "[system]\nkind = \"circle\"\nomega = 0.5\n[experiment]\nkind = \"k-slope\"\n[numerics]\nh = 0.01\n",
        );
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.render());
        assert!((r.k_closed.unwrap() - 0.8660254037844386).abs() < 1e-15);
        assert!(r.gap_fit_closed().unwrap() < 1e-6);
    }

    #[test]
    fn k_slope_volume_preserving_baker() {
        let cfg = config(
            "[system]\nkind = \"baker\"\na = 0.5\n[experiment]\nkind = \"k-slope\"\ndensity = \"cosine-bump\"\n[numerics]\ntimes = [0.0, 1.0, 2.0, 3.0, 4.0]\n",
        );
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.render());
        assert!(r.k_fit.unwrap().abs() < 1e-9);
        assert_eq!(r.k_closed, Some(0.0));
    }

    #[test]
    fn numerical_errors_land_in_the_report() {
        let cfg = config("[system]\nkind = \"circle\"\nomega = 0.5\n[experiment]\nkind = \"weak-convergence-probe\"\n");
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Error);
        assert!(r.error.as_deref().unwrap().contains("baker"));
        assert!(r.render().contains("status = error\n"));
        assert!(r.render().starts_with("k_fit = nan\n"));
    }

    #[test]
    fn degenerate_omega_is_reported_not_judged() {
        let cfg = config(
            "[system]\nkind = \"circle\"\nomega = 1.0\n[experiment]\nkind = \"k-slope\"\n[numerics]\nh = 0.01\ntimes = [0.0, 1.0, 2.0]\n",
        );
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Reported);
        assert_eq!(r.k_closed, Some(0.0));
        assert!(r.k_fit.unwrap().is_finite());
    }

    #[test]
    fn report_key_order() {
        let cfg = config(
            "[system]\nkind = \"circle\"\nomega = 0.6\n[experiment]\nkind = \"reversibility\"\n[numerics]\nh = 0.01\n",
        );
        let r = run_experiment(&cfg).unwrap();
        let text = r.render();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).take(7).collect();
        assert_eq!(
            keys,
            [
                "k_fit",
                "k_formula",
                "k_closed",
                "gap_fit_formula",
                "gap_fit_closed",
                "max_residual",
                "status"
            ]
        );
        assert_eq!(r.k_closed, Some(0.8));
        assert_eq!(r.extra("k_minus"), Some(-0.8));
    }

    #[test]
    fn cli_config_shapes() {
        let c = k_slope_config(SystemConfig::Circle { omega: 0.5 }, 5.0, 0).unwrap();
        assert_eq!(c.times().len(), 11);
        assert_eq!(c.times()[10], 5.0);
        let b = k_slope_config(SystemConfig::Baker { a: 0.25 }, 4.0, 3).unwrap();
        assert_eq!(b.measure.kind, MeasureKind::Empirical);
        assert_eq!(b.times(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(k_slope_config(SystemConfig::Baker { a: 0.25 }, 2.5, 0).is_err());
    }
}
