//! Scalar functionals of evolving densities.
//!
//! The central object is the series `t -> nu(log rho(., t))` for a
//! stationary `nu`, which is exactly linear in `t`. Its fitted slope is
//! compared with `-nu(div v)` (flows) and `nu(log J)` (maps). The module also
//! provides the Gibbs-entropy rate, the `B_p` functionals of an absolutely
//! continuous `nu`, and the ratio invariants `nu(f(rho_1 / rho_2))`.

use std::sync::Arc;

use crate::catalog::{circle_stationary, TimeDirection};
use crate::dynsys::{backward_orbit_path, forward_orbit_path, steps_from_time, ContinuousSystem, DiscreteSystem};
use crate::error::{Error, Result};
use crate::measures::{AbsContinuousMeasure, EmpiricalMeasure, StationaryMeasure};
use crate::reduce::ordered_sum;
use crate::transport::{DensityEvolution, Dynamics, QuadratureRule};

/// Ordinary least-squares line through a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
}

/// Values at strictly increasing times, optionally with a linear fit.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    fit: Option<LinearFit>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "times must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            fit: None,
        })
    }

    /// Attaches the least-squares fit. A single-point series gets the
    /// degenerate fit: slope 0 through the point.
    pub fn with_fit(mut self) -> Result<Self> {
        self.fit = Some(if self.times.len() == 1 {
            LinearFit {
                slope: 0.0,
                intercept: self.values[0],
                max_abs_residual: 0.0,
            }
        } else {
            fit_linear(&self.times, &self.values)?
        });
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fit(&self) -> Option<&LinearFit> {
        self.fit.as_ref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_k |values[k] - values[0]|`.
    pub fn max_deviation(&self) -> f64 {
        let v0 = self.values[0];
        self.values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max)
    }

    /// [`Self::max_deviation`] relative to `|values[0]|`.
    pub fn max_relative_deviation(&self) -> f64 {
        self.max_deviation() / self.values[0].abs()
    }
}

/// Least-squares line `value ~ intercept + slope * t`.
pub fn fit_linear(times: &[f64], values: &[f64]) -> Result<LinearFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    let n = times.len() as f64;
    if times.is_empty() {
        return Err(Error::DegenerateTimes);
    }
    let t_mean = ordered_sum(times.iter().copied()) / n;
    let v_mean = ordered_sum(values.iter().copied()) / n;
    let stt = ordered_sum(times.iter().map(|t| (t - t_mean) * (t - t_mean)));
    if !(stt > 0.0) {
        return Err(Error::DegenerateTimes);
    }
    let stv = ordered_sum(times.iter().zip(values).map(|(t, v)| (t - t_mean) * (v - v_mean)));
    let slope = stv / stt;
    let intercept = v_mean - slope * t_mean;
    let max_abs_residual = times
        .iter()
        .zip(values)
        .map(|(t, v)| (v - (intercept + slope * t)).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit {
        slope,
        intercept,
        max_abs_residual,
    })
}

/// `log rho(x, t)` for every support point of `nu` (rows) and every time
/// (columns).
///
/// For an empirical measure of a map, preimages come from the stored orbit:
/// sample `k` at horizon `n` pairs with orbit entry `k - n`, and the
/// Jacobian is accumulated over entries `k, k-1, ..., k-n+1`.
fn log_density_matrix(ev: &DensityEvolution, nu: &StationaryMeasure, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if nu.domain() != ev.dynamics().domain() {
        return Err(Error::InvalidParameter(
            "measure and system live on different domains".into(),
        ));
    }
    match (ev.dynamics(), nu) {
        (Dynamics::Map(sys), StationaryMeasure::Empirical(emp)) => history_log_densities(ev, sys.as_ref(), emp, times),
        _ => nu
            .support()
            .iter()
            .map(|x| {
                ev.log_density_path(x, times).map_err(|e| {
                    // locate the first failing time
                    let t = times
                        .iter()
                        .copied()
                        .find(|t| ev.log_density_at(x, *t).is_err())
                        .unwrap_or(f64::NAN);
                    e.at(t, *x)
                })
            })
            .collect(),
    }
}

fn history_log_densities(
    ev: &DensityEvolution,
    sys: &dyn DiscreteSystem,
    emp: &EmpiricalMeasure,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let steps = times.iter().map(|t| steps_from_time(*t)).collect::<Result<Vec<_>>>()?;
    let horizon = steps.iter().copied().max().unwrap_or(0);
    if horizon > emp.burn_in() {
        return Err(Error::HorizonExceedsHistory {
            horizon,
            burn_in: emp.burn_in(),
        });
    }
    let orbit = emp.orbit();
    let rho0 = ev.rho0();
    emp.sample_indices()
        .map(|k| {
            // cumulative[n] = sum_{j<n} log_jac_inv(x_{k-j})
            let mut cumulative = Vec::with_capacity(horizon + 1);
            cumulative.push(0.0);
            for j in 0..horizon {
                let lj = sys.log_jac_inv(&orbit[k - j]).ok_or_else(|| {
                    Error::PreimageUndefined {
                        step: j,
                        point: orbit[k - j],
                    }
                    .at((j + 1) as f64, orbit[k])
                })?;
                cumulative.push(cumulative[j] + lj);
            }
            Ok(steps
                .iter()
                .map(|&n| rho0.log_density(&orbit[k - n]) + cumulative[n])
                .collect())
        })
        .collect()
}

fn reduce_columns(
    nu: &StationaryMeasure,
    rows: &[Vec<f64>],
    columns: usize,
    g: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let weights = nu.support_weights();
    (0..columns)
        .map(|c| {
            let column: Vec<f64> = (0..rows.len()).map(|r| g(r, c)).collect();
            nu.reduce_weighted(&weights, &column)
        })
        .collect()
}

/// `t -> nu(log rho(., t))` with its least-squares fit.
pub fn log_density_series(ev: &DensityEvolution, nu: &StationaryMeasure, times: &[f64]) -> Result<TimeSeries> {
    let rows = log_density_matrix(ev, nu, times)?;
    let values = reduce_columns(nu, &rows, times.len(), |r, c| rows[r][c]);
    TimeSeries::new(times.to_vec(), values)?.with_fit()
}

/// `K = -nu(div v)`.
pub fn k_from_divergence(nu: &StationaryMeasure, system: &dyn ContinuousSystem) -> f64 {
    -nu.expect(|x| system.divergence(x.coords()))
}

/// `K = nu(log J)` with `J` the Jacobian of `T^{-1}`.
pub fn k_from_log_jacobian(nu: &StationaryMeasure, system: &dyn DiscreteSystem) -> Result<f64> {
    nu.try_expect(|x| {
        system
            .log_jac_inv(x)
            .ok_or(Error::PreimageUndefined { step: 0, point: *x })
    })
}

fn flow_of(ev: &DensityEvolution) -> Result<&Arc<dyn ContinuousSystem>> {
    match ev.dynamics() {
        Dynamics::Flow(f) => Ok(f),
        Dynamics::Map(_) => Err(Error::Unsupported("operation needs a continuous-time system".into())),
    }
}

/// `mu_t(div v)`, which equals `dS/dt` for the Gibbs entropy.
pub fn entropy_rate(ev: &DensityEvolution, t: f64, quad: &QuadratureRule) -> Result<f64> {
    let flow = flow_of(ev)?.clone();
    ev.pushforward_expectation(move |x| flow.divergence(x.coords()), t, quad)
}

/// Central difference `(S(t + delta) - S(t - delta)) / (2 delta)` of the
/// Lagrangian Gibbs entropy.
pub fn gibbs_entropy_derivative(ev: &DensityEvolution, t: f64, delta: f64, quad: &QuadratureRule) -> Result<f64> {
    flow_of(ev)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "difference step must be positive, got {delta}"
        )));
    }
    let plus = ev.lagrangian_gibbs_entropy(t + delta, quad)?;
    let minus = ev.lagrangian_gibbs_entropy(t - delta, quad)?;
    Ok((plus - minus) / (2.0 * delta))
}

/// Gibbs entropy, its central-difference derivative and the rate
/// `mu_t(div v)` on a grid of times.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyProfile {
    pub entropy: TimeSeries,
    pub derivative: TimeSeries,
    pub rate: TimeSeries,
}

impl EntropyProfile {
    /// `max_t |dS/dt - mu_t(div v)|`.
    pub fn max_rate_gap(&self) -> f64 {
        self.derivative
            .values()
            .iter()
            .zip(self.rate.values())
            .map(|(d, r)| (d - r).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates `S(t)`, `S(t +- delta)` and `mu_t(div v)` for every `t` in
/// `times` from one forward (and, for `t - delta < 0`, one backward) orbit
/// per quadrature node.
pub fn entropy_rate_profile(
    ev: &DensityEvolution,
    times: &[f64],
    delta: f64,
    quad: &QuadratureRule,
) -> Result<EntropyProfile> {
    let flow = flow_of(ev)?.clone();
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "difference step must be positive, got {delta}"
        )));
    }
    TimeSeries::new(times.to_vec(), vec![0.0; times.len()])?;
    if times[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "entropy profile needs non-negative times".into(),
        ));
    }
    if quad.domain() != flow.domain() {
        return Err(Error::InvalidParameter("quadrature and system domains differ".into()));
    }

    let evals: Vec<f64> = times.iter().flat_map(|t| [t - delta, *t, t + delta]).collect();
    let sorted_unique = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let forward = sorted_unique(evals.iter().copied().filter(|t| *t >= 0.0).collect());
    let backward = sorted_unique(evals.iter().filter(|t| **t < 0.0).map(|t| -t).collect());
    let cfg = ev.config();
    let rho0 = ev.rho0();

    // terms[e][node]: entropy contributions; rate_terms[k][node]
    let mut terms = vec![Vec::with_capacity(quad.len()); evals.len()];
    let mut rate_terms = vec![Vec::with_capacity(quad.len()); times.len()];
    for (x, w) in quad.nodes().iter().zip(quad.weights()) {
        let fpath = forward_orbit_path(flow.as_ref(), x, &forward, cfg)?;
        let bpath = backward_orbit_path(flow.as_ref(), x, &backward, cfg)?;
        let lookup = |tau: f64| {
            if tau >= 0.0 {
                fpath[forward.binary_search_by(|s| s.total_cmp(&tau)).expect("grid time")]
            } else {
                bpath[backward.binary_search_by(|s| s.total_cmp(&-tau)).expect("grid time")]
            }
        };
        let log_rho0 = rho0.log_density(x);
        let mass = w * log_rho0.exp();
        for (e, &tau) in evals.iter().enumerate() {
            terms[e].push(-mass * (log_rho0 - lookup(tau).1));
        }
        for (k, &t) in times.iter().enumerate() {
            rate_terms[k].push(mass * flow.divergence(lookup(t).0.coords()));
        }
    }
    let s: Vec<f64> = terms.into_iter().map(ordered_sum).collect();
    let entropy = times.iter().enumerate().map(|(k, _)| s[3 * k + 1]).collect();
    let derivative = times
        .iter()
        .enumerate()
        .map(|(k, _)| (s[3 * k + 2] - s[3 * k]) / (2.0 * delta))
        .collect();
    let rate = rate_terms.into_iter().map(ordered_sum).collect();
    Ok(EntropyProfile {
        entropy: TimeSeries::new(times.to_vec(), entropy)?,
        derivative: TimeSeries::new(times.to_vec(), derivative)?,
        rate: TimeSeries::new(times.to_vec(), rate)?,
    })
}

/// `B_p(t) = \int |rho(x, t) / rho_bar(x) - 1|^p rho_bar(x) dx` at each
/// time (no fit; the series should be constant).
pub fn bp_invariant(ev: &DensityEvolution, nu_ac: &AbsContinuousMeasure, p: f64, times: &[f64]) -> Result<TimeSeries> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("B_p needs p >= 1, got {p}")));
    }
    let nu = StationaryMeasure::AbsContinuous(nu_ac.clone());
    let rows = log_density_matrix(ev, &nu, times)?;
    let log_bar: Vec<f64> = nu_ac
        .quad()
        .nodes()
        .iter()
        .map(|x| nu_ac.rho_bar().log_density(x))
        .collect();
    let values = reduce_columns(&nu, &rows, times.len(), |r, c| {
        ((rows[r][c] - log_bar[r]).exp() - 1.0).abs().powf(p)
    });
    TimeSeries::new(times.to_vec(), values)
}

/// `\int |rho(x, t) - rho_bar(x)|^2 dx` at each time.
pub fn l2_gap_squared(ev: &DensityEvolution, nu_ac: &AbsContinuousMeasure, times: &[f64]) -> Result<TimeSeries> {
    let nu = StationaryMeasure::AbsContinuous(nu_ac.clone());
    let rows = log_density_matrix(ev, &nu, times)?;
    let quad = nu_ac.quad();
    let bar: Vec<f64> = nu_ac.node_values();
    let values = (0..times.len())
        .map(|c| {
            ordered_sum(quad.weights().iter().enumerate().map(|(r, w)| {
                let d = rows[r][c].exp() - bar[r];
                w * d * d
            }))
        })
        .collect();
    TimeSeries::new(times.to_vec(), values)
}

/// `nu(f(rho_1(., t) / rho_2(., t)))` at each time, with the ratio formed
/// from the log-density difference before exponentiation.
pub fn ratio_invariant(
    ev1: &DensityEvolution,
    ev2: &DensityEvolution,
    nu: &StationaryMeasure,
    f: impl Fn(f64) -> f64,
    times: &[f64],
) -> Result<TimeSeries> {
    let rows1 = log_density_matrix(ev1, nu, times)?;
    let rows2 = log_density_matrix(ev2, nu, times)?;
    let values = reduce_columns(nu, &rows1, times.len(), |r, c| f((rows1[r][c] - rows2[r][c]).exp()));
    TimeSeries::new(times.to_vec(), values)
}

/// `(K_+, K_-)` for the circle flow: `-nu_+(div v)` and `-nu_-(div v)`.
///
/// At `|omega| = 1` this is an error unless `allow_degenerate`, in which
/// case `(0, 0)` is returned.
pub fn reversibility_k_pair(omega: f64, allow_degenerate: bool) -> Result<(f64, f64)> {
    if omega.abs() == 1.0 {
        return if allow_degenerate {
            Ok((0.0, 0.0))
        } else {
            Err(Error::DegenerateOmega(omega))
        };
    }
    if omega.abs() > 1.0 {
        return Ok((0.0, 0.0));
    }
    let flow = crate::catalog::make_circle_flow(omega);
    // atomic measures ignore the rule
    let quad = QuadratureRule::circle_midpoint(1)?;
    let plus = circle_stationary(omega, &quad, TimeDirection::Forward)?;
    let minus = circle_stationary(omega, &quad, TimeDirection::Backward)?;
    Ok((k_from_divergence(&plus, &flow), k_from_divergence(&minus, &flow)))
}
