//! Phase spaces, flows and invertible maps.
//!
//! Flows are advanced with fixed-step classical RK4. The divergence of the
//! vector field is integrated as an extra scalar alongside the orbit, on the
//! same step grid, so that log-Jacobians of `T_{-t}` come out of the same
//! integration that produces the orbit itself.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// The compact, boundaryless state spaces supported by the laboratory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// The circle `[-pi, pi)` with periodic wraparound.
    Circle,
    /// The unit square `[0, 1)^2`, wrapped per axis (a torus).
    UnitSquare,
}

impl Domain {
    pub fn dimension(self) -> usize {
        match self {
            Domain::Circle => 1,
            Domain::UnitSquare => 2,
        }
    }

    /// Lebesgue volume of the domain.
    pub fn volume(self) -> f64 {
        match self {
            Domain::Circle => TWO_PI,
            Domain::UnitSquare => 1.0,
        }
    }

    /// Maps raw coordinates back into the fundamental domain. Coordinates
    /// already inside are returned bit-for-bit unchanged.
    pub fn wrap(self, coords: [f64; 2]) -> [f64; 2] {
        match self {
            Domain::Circle => [wrap_interval(coords[0], -PI, TWO_PI), 0.0],
            Domain::UnitSquare => [wrap_interval(coords[0], 0.0, 1.0), wrap_interval(coords[1], 0.0, 1.0)],
        }
    }

    /// Geodesic distance on the circle, flat torus distance on the square.
    pub fn distance(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            Domain::Circle => periodic_gap(a[0] - b[0], TWO_PI),
            Domain::UnitSquare => periodic_gap(a[0] - b[0], 1.0).hypot(periodic_gap(a[1] - b[1], 1.0)),
        }
    }
}

fn wrap_interval(x: f64, lo: f64, len: f64) -> f64 {
    if x >= lo && x < lo + len {
        return x;
    }
    let r = (x - lo).rem_euclid(len);
    // rem_euclid can round up to `len` for tiny negative inputs
    if r >= len {
        lo
    } else {
        lo + r
    }
}

fn periodic_gap(d: f64, period: f64) -> f64 {
    let d = d.abs().rem_euclid(period);
    d.min(period - d)
}

/// A state `x` in one of the supported domains. Always stored wrapped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    domain: Domain,
    coords: [f64; 2],
}

impl PhasePoint {
    pub fn new(domain: Domain, coords: [f64; 2]) -> Self {
        let mut coords = domain.wrap(coords);
        if domain == Domain::Circle {
            coords[1] = 0.0;
        }
        Self { domain, coords }
    }

    pub fn circle(x: f64) -> Self {
        Self::new(Domain::Circle, [x, 0.0])
    }

    pub fn square(x: f64, y: f64) -> Self {
        Self::new(Domain::UnitSquare, [x, y])
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn coords(&self) -> [f64; 2] {
        self.coords
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    /// Second coordinate; always 0 on the circle.
    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.domain.distance(self.coords, other.coords)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.domain {
            Domain::Circle => write!(f, "({})", self.coords[0]),
            Domain::UnitSquare => write!(f, "({}, {})", self.coords[0], self.coords[1]),
        }
    }
}

/// A continuous-time system `dx/dt = v(x)`.
///
/// `vector_field` and `divergence` receive unwrapped coordinates (RK stages
/// are never wrapped), so implementations must be periodic in them.
pub trait ContinuousSystem: Send + Sync {
    fn domain(&self) -> Domain;

    fn vector_field(&self, x: [f64; 2]) -> [f64; 2];

    fn divergence(&self, x: [f64; 2]) -> f64;

    /// Both at once; override when the two share work.
    fn field_and_divergence(&self, x: [f64; 2]) -> ([f64; 2], f64) {
        (self.vector_field(x), self.divergence(x))
    }

    /// Time-reversal involution `R` with `R T_t = T_{-t} R`, if the system has one.
    fn reversal(&self, _x: &PhasePoint) -> Option<PhasePoint> {
        None
    }

    fn has_reversal(&self) -> bool {
        false
    }
}

/// An invertible discrete-time system `x -> T(x)`.
pub trait DiscreteSystem: Send + Sync {
    fn domain(&self) -> Domain;

    fn forward(&self, x: &PhasePoint) -> PhasePoint;

    /// `T^{-1}(x)`; `None` off the image of `T`.
    fn inverse(&self, x: &PhasePoint) -> Option<PhasePoint>;

    /// `log |det D T^{-1}(x)|`; `None` wherever the inverse is undefined.
    fn log_jac_inv(&self, x: &PhasePoint) -> Option<f64>;

    fn is_volume_preserving(&self) -> bool {
        false
    }

    /// Hook for long orbit generation. Expanding coordinates of piecewise
    /// affine maps shed one mantissa bit per step in floating point; this
    /// lets a system refill the bits it lost from a random word. The default
    /// leaves the point untouched.
    fn replenish_expanding_bits(&self, x: PhasePoint, _random_word: u64) -> PhasePoint {
        x
    }
}

/// Fixed-step integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Nominal RK4 step. A call over time `t` uses `ceil(|t| / step)` equal
    /// substeps so the grid ends exactly at `t`.
    pub step: f64,
    pub max_substeps: u64,
    /// Below this `|v(x)|` the start point is treated as a fixed point.
    pub fixed_point_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_substeps: 1 << 32,
            fixed_point_tol: 1e-14,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Result<Self> {
        let cfg = Self {
            step,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "integrator step must be positive, got {}",
                self.step
            )));
        }
        if self.max_substeps == 0 {
            return Err(Error::InvalidParameter("max_substeps must be positive".into()));
        }
        Ok(())
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn axpy(y: [f64; 2], a: f64, k: [f64; 2]) -> [f64; 2] {
    [y[0] + a * k[0], y[1] + a * k[1]]
}

/// Integrates the orbit of `x` over signed time `t` together with
/// `I(x, t) = \int_0^t div v(T_s x) ds`.
///
/// This is the single integration routine behind every flow operation:
/// `T_t x` is the first component, the forward phase-space volume growth is
/// `I(x, t)`, and the log-Jacobian of `T_{-t}` at `x` is `I(x, -t)`.
pub fn flow_with_divergence_integral(
    system: &dyn ContinuousSystem,
    x: &PhasePoint,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(PhasePoint, f64)> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok((*x, 0.0));
    }
    let domain = system.domain();
    let (v0, div0) = system.field_and_divergence(x.coords());
    if norm(v0) < cfg.fixed_point_tol {
        return Ok((*x, t * div0));
    }

    let substeps = (t.abs() / cfg.step).ceil().max(1.0);
    if substeps > cfg.max_substeps as f64 {
        return Err(Error::TooManySubsteps {
            requested: substeps as u64,
            max: cfg.max_substeps,
        });
    }
    let n = substeps as u64;
    let h = t / substeps;

    let mut y = x.coords();
    let mut acc = 0.0;
    for i in 0..n {
        let (k1, d1) = system.field_and_divergence(y);
        let (k2, d2) = system.field_and_divergence(axpy(y, 0.5 * h, k1));
        let (k3, d3) = system.field_and_divergence(axpy(y, 0.5 * h, k2));
        let (k4, d4) = system.field_and_divergence(axpy(y, h, k3));
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        acc += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
        if !(next[0].is_finite() && next[1].is_finite() && acc.is_finite()) {
            return Err(Error::NumericalOverflow { t: (i + 1) as f64 * h });
        }
        y = domain.wrap(next);
    }
    Ok((PhasePoint::new(domain, y), acc))
}

/// `T_t x` by fixed-step RK4; negative `t` integrates the reversed field.
pub fn advance(system: &dyn ContinuousSystem, x: &PhasePoint, t: f64, cfg: &IntegratorConfig) -> Result<PhasePoint> {
    flow_with_divergence_integral(system, x, t, cfg).map(|(p, _)| p)
}

/// Returns `(T_{-t} x, log J(x, t))` where `J(x, t)` is the Jacobian of
/// `T_{-t}` at `x`, i.e. `log J = -\int_{-t}^0 div v(T_u x) du`.
pub fn backward_orbit_with_log_jacobian(
    system: &dyn ContinuousSystem,
    x: &PhasePoint,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(PhasePoint, f64)> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "backward horizon must be non-negative, got {t}"
        )));
    }
    flow_with_divergence_integral(system, x, -t, cfg)
}

/// Backward orbit sampled at each of the ascending, non-negative `times`.
///
/// The orbit is continued segment by segment, using the cocycle
/// `log J(x, t2) = log J(x, t1) + log J(T_{-t1} x, t2 - t1)`.
pub fn backward_orbit_path(
    system: &dyn ContinuousSystem,
    x: &PhasePoint,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(PhasePoint, f64)>> {
    orbit_path(system, x, times, cfg, -1.0)
}

/// Forward orbit sampled at ascending, non-negative `times`, paired with
/// the accumulated `\int_0^t div v(T_s x) ds`.
pub fn forward_orbit_path(
    system: &dyn ContinuousSystem,
    x: &PhasePoint,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(PhasePoint, f64)>> {
    orbit_path(system, x, times, cfg, 1.0)
}

fn orbit_path(
    system: &dyn ContinuousSystem,
    x: &PhasePoint,
    times: &[f64],
    cfg: &IntegratorConfig,
    direction: f64,
) -> Result<Vec<(PhasePoint, f64)>> {
    check_ascending(times)?;
    let mut out = Vec::with_capacity(times.len());
    let mut point = *x;
    let mut acc = 0.0;
    let mut now = 0.0;
    for &t in times {
        let (p, inc) = flow_with_divergence_integral(system, &point, direction * (t - now), cfg)?;
        point = p;
        acc += inc;
        now = t;
        out.push((point, acc));
    }
    Ok(out)
}

pub(crate) fn check_ascending(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= prev) {
            return Err(Error::InvalidParameter(format!(
                "times must be finite, non-negative and ascending (got {t} after {prev})"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Returns `(T^{-n} x, sum_{k<n} log_jac_inv(T^{-k} x))`.
pub fn map_backward_orbit(system: &dyn DiscreteSystem, x: &PhasePoint, n: usize) -> Result<(PhasePoint, f64)> {
    let mut point = *x;
    let mut log_jac = 0.0;
    for step in 0..n {
        let (pre, lj) = match (system.inverse(&point), system.log_jac_inv(&point)) {
            (Some(pre), Some(lj)) => (pre, lj),
            _ => return Err(Error::PreimageUndefined { step, point }),
        };
        log_jac += lj;
        point = pre;
    }
    Ok((point, log_jac))
}

/// `T^n x`.
pub fn map_forward(system: &dyn DiscreteSystem, x: &PhasePoint, n: usize) -> PhasePoint {
    (0..n).fold(*x, |p, _| system.forward(&p))
}

/// `(T^n x, log |det D T^n(x)|)`, the discrete analogue of the forward
/// divergence integral. Uses `log |det DT(x)| = -log_jac_inv(T x)`.
pub fn map_forward_with_log_volume(system: &dyn DiscreteSystem, x: &PhasePoint, n: usize) -> Result<(PhasePoint, f64)> {
    let mut point = *x;
    let mut acc = 0.0;
    for step in 0..n {
        let next = system.forward(&point);
        let lj = system
            .log_jac_inv(&next)
            .ok_or(Error::PreimageUndefined { step, point: next })?;
        acc -= lj;
        point = next;
    }
    Ok((point, acc))
}

/// Converts a time to a step count for a discrete system.
pub fn steps_from_time(t: f64) -> Result<usize> {
    if t >= 0.0 && t.fract() == 0.0 && t <= u32::MAX as f64 {
        Ok(t as usize)
    } else {
        Err(Error::NonIntegerTime(t))
    }
}

/// Domain distance between `R(T_t x)` and `T_{-t}(R x)`.
pub fn check_reversal(system: &dyn ContinuousSystem, x: &PhasePoint, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if !system.has_reversal() {
        return Err(Error::MissingReversal);
    }
    let reverse = |p: &PhasePoint| system.reversal(p).ok_or(Error::MissingReversal);
    let lhs = reverse(&advance(system, x, t, cfg)?)?;
    let rhs = advance(system, &reverse(x)?, -t, cfg)?;
    Ok(lhs.distance(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rigid rotation `v = c`; divergence free.
    struct Rotation(f64);

    impl ContinuousSystem for Rotation {
        fn domain(&self) -> Domain {
            Domain::Circle
        }
        fn vector_field(&self, _x: [f64; 2]) -> [f64; 2] {
            [self.0, 0.0]
        }
        fn divergence(&self, _x: [f64; 2]) -> f64 {
            0.0
        }
    }

    /// Speeds near f64::MAX; the first RK step overflows.
    struct Blowup;

    impl ContinuousSystem for Blowup {
        fn domain(&self) -> Domain {
            Domain::UnitSquare
        }
        fn vector_field(&self, x: [f64; 2]) -> [f64; 2] {
            [0.0, 1e300 * (1.0 + x[1])]
        }
        fn divergence(&self, _x: [f64; 2]) -> f64 {
            1e300
        }
    }

    #[test]
    fn wrap_leaves_interior_points_alone() {
        let x = PI / 6.0;
        assert_eq!(PhasePoint::circle(x).x(), x);
        assert_eq!(PhasePoint::circle(-PI).x(), -PI);
        assert_eq!(PhasePoint::circle(PI).x(), -PI);
        assert!((PhasePoint::circle(3.0 * PI + 0.25).x() - (-PI + 0.25)).abs() < 1e-14);
        assert_eq!(PhasePoint::square(1.25, -0.25).coords(), [0.25, 0.75]);
        let p = PhasePoint::circle(-1e-300 - PI);
        assert!(p.x() >= -PI && p.x() < PI);
    }

    #[test]
    fn distances_respect_periodicity() {
        let a = PhasePoint::circle(PI - 0.1);
        let b = PhasePoint::circle(-PI + 0.1);
        assert!((a.distance(&b) - 0.2).abs() < 1e-12);
        let c = PhasePoint::square(0.05, 0.5);
        let d = PhasePoint::square(0.95, 0.5);
        assert!((c.distance(&d) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let sys = Rotation(0.3);
        let x = PhasePoint::circle(1.234);
        let cfg = IntegratorConfig::default();
        assert_eq!(advance(&sys, &x, 0.0, &cfg).unwrap(), x);
        assert_eq!(backward_orbit_with_log_jacobian(&sys, &x, 0.0, &cfg).unwrap(), (x, 0.0));
    }

    #[test]
    fn divergence_free_flow_has_zero_log_jacobian() {
        let sys = Rotation(0.7);
        let x = PhasePoint::circle(0.1);
        let cfg = IntegratorConfig::default();
        let (p, lj) = backward_orbit_with_log_jacobian(&sys, &x, 2.0, &cfg).unwrap();
        assert_eq!(lj, 0.0);
        assert!(p.distance(&PhasePoint::circle(0.1 - 1.4)) < 1e-12);
    }

    #[test]
    fn negative_backward_horizon_is_rejected() {
        let cfg = IntegratorConfig::default();
        let r = backward_orbit_with_log_jacobian(&Rotation(1.0), &PhasePoint::circle(0.0), -1.0, &cfg);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn non_finite_orbit_aborts() {
        let cfg = IntegratorConfig::default();
        let r = advance(&Blowup, &PhasePoint::square(0.5, 0.5), 1.0, &cfg);
        assert!(matches!(r, Err(Error::NumericalOverflow { .. })));
    }

    #[test]
    fn substep_limit_is_enforced() {
        let cfg = IntegratorConfig {
            max_substeps: 10,
            ..IntegratorConfig::default()
        };
        let r = advance(&Rotation(1.0), &PhasePoint::circle(0.0), 1.0, &cfg);
        assert!(matches!(
            r,
            Err(Error::TooManySubsteps {
                requested: 1000,
                max: 10
            })
        ));
    }

    #[test]
    fn integrator_step_must_be_positive() {
        assert!(IntegratorConfig::with_step(0.0).is_err());
        assert!(IntegratorConfig::with_step(-1e-3).is_err());
        assert!(IntegratorConfig::with_step(f64::NAN).is_err());
        assert!(IntegratorConfig::with_step(1e-2).is_ok());
    }

    #[test]
    fn reversal_requires_involution() {
        let cfg = IntegratorConfig::default();
        let r = check_reversal(&Rotation(1.0), &PhasePoint::circle(0.0), 1.0, &cfg);
        assert!(matches!(r, Err(Error::MissingReversal)));
    }

    #[test]
    fn step_counts_from_times() {
        assert_eq!(steps_from_time(3.0).unwrap(), 3);
        assert!(steps_from_time(2.5).is_err());
        assert!(steps_from_time(-1.0).is_err());
    }

    #[test]
    fn path_rejects_unsorted_times() {
        let cfg = IntegratorConfig::default();
        let r = backward_orbit_path(&Rotation(1.0), &PhasePoint::circle(0.0), &[1.0, 0.5], &cfg);
        assert!(r.is_err());
    }
}
