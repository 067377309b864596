//! Exact transport of densities.
//!
//! `rho(x, t) = rho0(T_{-t} x) J(x, t)` is evaluated pointwise from the
//! backward orbit, entirely in log space. Expectations under the evolved
//! measure use the Lagrangian form `mu_t(f) = \int f(T_t x) rho0(x) dx`, and
//! the Gibbs entropy is computed in initial coordinates, which stays exact
//! while the evolved density concentrates on an attractor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::dynsys::{
    backward_orbit_path, check_ascending, flow_with_divergence_integral, map_backward_orbit, map_forward,
    map_forward_with_log_volume, steps_from_time, ContinuousSystem, DiscreteSystem, Domain, IntegratorConfig,
    PhasePoint,
};
use crate::error::{Error, Result};
use crate::reduce::ordered_sum;

/// A strictly positive density with respect to the volume measure.
///
/// `log_density` is the primary method; implementations evaluate it
/// directly rather than as `ln(density)`.
pub trait Density: Send + Sync {
    fn domain(&self) -> Domain;

    fn log_density(&self, x: &PhasePoint) -> f64;

    fn density(&self, x: &PhasePoint) -> f64 {
        self.log_density(x).exp()
    }
}

/// `1 / |M|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformDensity {
    domain: Domain,
}

impl UniformDensity {
    pub fn new(domain: Domain) -> Self {
        Self { domain }
    }
}

impl Density for UniformDensity {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn log_density(&self, _x: &PhasePoint) -> f64 {
        -self.domain.volume().ln()
    }

    fn density(&self, _x: &PhasePoint) -> f64 {
        1.0 / self.domain.volume()
    }
}

/// `(1 + eps cos x) / 2pi` on the circle, `1 + eps cos(2 pi x)` on the square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineBump {
    domain: Domain,
    eps: f64,
}

impl CosineBump {
    pub fn new(domain: Domain, eps: f64) -> Result<Self> {
        check_epsilon(eps)?;
        Ok(Self { domain, eps })
    }

    fn bump(&self, x: &PhasePoint) -> f64 {
        match self.domain {
            Domain::Circle => 1.0 + self.eps * x.x().cos(),
            Domain::UnitSquare => 1.0 + self.eps * (2.0 * PI * x.x()).cos(),
        }
    }
}

impl Density for CosineBump {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn log_density(&self, x: &PhasePoint) -> f64 {
        self.bump(x).ln() - self.domain.volume().ln()
    }

    fn density(&self, x: &PhasePoint) -> f64 {
        self.bump(x) / self.domain.volume()
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > -1.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "perturbation amplitude must lie in (-1, 1), got {eps}"
        )))
    }
}

/// Invariant density of the circulating circle flow (`|omega| > 1`):
/// `sqrt(omega^2 - 1) / (2 pi |omega - sin x|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleStationaryDensity {
    omega: f64,
    log_c: f64,
}

impl CircleStationaryDensity {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega.abs() > 1.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "circle flow has an absolutely continuous invariant density only for |omega| > 1, got {omega}"
            )));
        }
        let log_c = (omega * omega - 1.0).sqrt().ln() - (2.0 * PI).ln();
        Ok(Self { omega, log_c })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `\int sin(x) rho_bar(x) dx = omega - sign(omega) sqrt(omega^2 - 1)`.
    pub fn mean_sin(&self) -> f64 {
        let w = self.omega;
        w - w.signum() * (w * w - 1.0).sqrt()
    }
}

impl Density for CircleStationaryDensity {
    fn domain(&self) -> Domain {
        Domain::Circle
    }

    fn log_density(&self, x: &PhasePoint) -> f64 {
        self.log_c - (self.omega - x.x().sin()).abs().ln()
    }
}

/// `rho_bar(x) (1 + eps sin x) / Z` for the circulating circle flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryPerturbed {
    base: CircleStationaryDensity,
    eps: f64,
    log_z: f64,
}

impl StationaryPerturbed {
    pub fn new(omega: f64, eps: f64) -> Result<Self> {
        check_epsilon(eps)?;
        let base = CircleStationaryDensity::new(omega)?;
        let log_z = (1.0 + eps * base.mean_sin()).ln();
        Ok(Self { base, eps, log_z })
    }
}

impl Density for StationaryPerturbed {
    fn domain(&self) -> Domain {
        Domain::Circle
    }

    fn log_density(&self, x: &PhasePoint) -> f64 {
        self.base.log_density(x) + (1.0 + self.eps * x.x().sin()).ln() - self.log_z
    }
}

/// Wraps a raw positive function; `log_density` is `ln f(x)`.
#[derive(Clone)]
pub struct FnDensity {
    domain: Domain,
    f: Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>,
}

impl FnDensity {
    pub fn new(domain: Domain, f: impl Fn(&PhasePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self { domain, f: Arc::new(f) }
    }
}

impl fmt::Debug for FnDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDensity").field("domain", &self.domain).finish()
    }
}

impl Density for FnDensity {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn log_density(&self, x: &PhasePoint) -> f64 {
        (self.f)(x).ln()
    }

    fn density(&self, x: &PhasePoint) -> f64 {
        (self.f)(x)
    }
}

/// `raw / Z` with `ln Z` precomputed.
#[derive(Clone)]
pub struct ScaledDensity {
    raw: Arc<dyn Density>,
    log_z: f64,
}

impl ScaledDensity {
    pub fn new(raw: Arc<dyn Density>, log_z: f64) -> Self {
        Self { raw, log_z }
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }
}

impl Density for ScaledDensity {
    fn domain(&self) -> Domain {
        self.raw.domain()
    }

    fn log_density(&self, x: &PhasePoint) -> f64 {
        self.raw.log_density(x) - self.log_z
    }

    fn density(&self, x: &PhasePoint) -> f64 {
        self.raw.density(x) / self.log_z.exp()
    }
}

/// How the nodes of a [`QuadratureRule`] were laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Composite midpoint on the circle with `nodes` points.
    CircleMidpoint { nodes: usize },
    /// Tensor midpoint on the square, `2^depth_x` by `2^depth_y` cells.
    DyadicMidpoint { depth_x: u32, depth_y: u32 },
    /// `x = j / nx` for `j = 1..nx` (odd `nx`) times midpoints in `y`.
    ///
    /// Doubling mod 1 permutes the `x` nodes, so every binary digit of `x`
    /// is exactly balanced over the rule at every iterate. Dyadic grids
    /// lose this after `depth` doublings, which matters for Lagrangian
    /// baker expectations at long horizons.
    DoublingLattice { nx: usize, ny: usize },
}

/// Nodes and positive weights approximating `\int_M . dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    domain: Domain,
    nodes: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn circle_midpoint(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
        }
        let w = 2.0 * PI / n as f64;
        let nodes = (0..n).map(|i| PhasePoint::circle(-PI + (i as f64 + 0.5) * w)).collect();
        Ok(Self {
            kind: QuadratureKind::CircleMidpoint { nodes: n },
            domain: Domain::Circle,
            nodes,
            weights: vec![w; n],
        })
    }

    pub fn dyadic_square(depth: u32) -> Result<Self> {
        Self::dyadic_rect(depth, depth)
    }

    /// Midpoints of the `2^depth_x` by `2^depth_y` dyadic partition. Cell
    /// edges coincide with the discontinuities of `T^{-n}` for the baker
    /// map whenever `depth_y >= n`.
    pub fn dyadic_rect(depth_x: u32, depth_y: u32) -> Result<Self> {
        if depth_x + depth_y > 26 {
            return Err(Error::InvalidParameter(format!(
                "dyadic depth {depth_x}+{depth_y} is too fine"
            )));
        }
        let (nx, ny) = (1usize << depth_x, 1usize << depth_y);
        let w = 1.0 / (nx * ny) as f64;
        let mut nodes = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = (i as f64 + 0.5) / nx as f64;
            for j in 0..ny {
                nodes.push(PhasePoint::square(x, (j as f64 + 0.5) / ny as f64));
            }
        }
        Ok(Self {
            kind: QuadratureKind::DyadicMidpoint { depth_x, depth_y },
            domain: Domain::UnitSquare,
            weights: vec![w; nodes.len()],
            nodes,
        })
    }

    pub fn doubling_lattice(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || nx.is_multiple_of(2) || ny == 0 {
            return Err(Error::InvalidParameter(format!(
                "doubling lattice needs odd nx >= 3 and ny >= 1, got ({nx}, {ny})"
            )));
        }
        let count = (nx - 1) * ny;
        let w = 1.0 / count as f64;
        let mut nodes = Vec::with_capacity(count);
        for j in 1..nx {
            let x = j as f64 / nx as f64;
            for i in 0..ny {
                nodes.push(PhasePoint::square(x, (i as f64 + 0.5) / ny as f64));
            }
        }
        Ok(Self {
            kind: QuadratureKind::DoublingLattice { nx, ny },
            domain: Domain::UnitSquare,
            weights: vec![w; count],
            nodes,
        })
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn nodes(&self) -> &[PhasePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i g(x_i)`, reduced in node order.
    pub fn integrate(&self, g: impl Fn(&PhasePoint) -> f64) -> f64 {
        ordered_sum(self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(x)))
    }

    pub fn try_integrate(&self, g: impl Fn(&PhasePoint) -> Result<f64>) -> Result<f64> {
        let terms = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| g(x).map(|v| w * v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ordered_sum(terms))
    }
}

/// The dynamics a density is transported by.
#[derive(Clone)]
pub enum Dynamics {
    Flow(Arc<dyn ContinuousSystem>),
    Map(Arc<dyn DiscreteSystem>),
}

impl Dynamics {
    pub fn domain(&self) -> Domain {
        match self {
            Dynamics::Flow(f) => f.domain(),
            Dynamics::Map(m) => m.domain(),
        }
    }
}

/// Result of [`DensityEvolution::density_at`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    /// Set when `exp(log rho)` underflowed to zero.
    pub underflowed: bool,
}

/// An initial density `rho0` together with the dynamics transporting it.
#[derive(Clone)]
pub struct DensityEvolution {
    rho0: Arc<dyn Density>,
    dynamics: Dynamics,
    cfg: IntegratorConfig,
}

impl DensityEvolution {
    pub fn new(rho0: Arc<dyn Density>, dynamics: Dynamics, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if rho0.domain() != dynamics.domain() {
            return Err(Error::InvalidParameter(format!(
                "density lives on {:?} but the system on {:?}",
                rho0.domain(),
                dynamics.domain()
            )));
        }
        Ok(Self { rho0, dynamics, cfg })
    }

    pub fn flow(rho0: Arc<dyn Density>, system: Arc<dyn ContinuousSystem>) -> Result<Self> {
        Self::new(rho0, Dynamics::Flow(system), IntegratorConfig::default())
    }

    pub fn map(rho0: Arc<dyn Density>, system: Arc<dyn DiscreteSystem>) -> Result<Self> {
        Self::new(rho0, Dynamics::Map(system), IntegratorConfig::default())
    }

    pub fn with_config(mut self, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        self.cfg = cfg;
        Ok(self)
    }

    pub fn rho0(&self) -> &Arc<dyn Density> {
        &self.rho0
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// `\int rho0 dx` under `quad`; should be 1.
    pub fn initial_mass(&self, quad: &QuadratureRule) -> f64 {
        quad.integrate(|x| self.rho0.density(x))
    }

    /// `log rho(x, t) = log rho0(T_{-t} x) + log J(x, t)`.
    pub fn log_density_at(&self, x: &PhasePoint, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.rho0.log_density(x));
        }
        let (pre, log_jac) = match &self.dynamics {
            Dynamics::Flow(f) => {
                if t < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "density evaluation needs t >= 0, got {t}"
                    )));
                }
                flow_with_divergence_integral(f.as_ref(), x, -t, &self.cfg)?
            }
            Dynamics::Map(m) => map_backward_orbit(m.as_ref(), x, steps_from_time(t)?)?,
        };
        Ok(self.rho0.log_density(&pre) + log_jac)
    }

    /// `log rho(x, t)` at each of the ascending `times`, continuing one
    /// backward orbit instead of restarting it for every time.
    pub fn log_density_path(&self, x: &PhasePoint, times: &[f64]) -> Result<Vec<f64>> {
        check_ascending(times)?;
        match &self.dynamics {
            Dynamics::Flow(f) => Ok(backward_orbit_path(f.as_ref(), x, times, &self.cfg)?
                .into_iter()
                .map(|(pre, lj)| self.rho0.log_density(&pre) + lj)
                .collect()),
            Dynamics::Map(m) => {
                let mut out = Vec::with_capacity(times.len());
                let mut point = *x;
                let mut log_jac = 0.0;
                let mut done = 0;
                for &t in times {
                    let n = steps_from_time(t)?;
                    let (pre, lj) = map_backward_orbit(m.as_ref(), &point, n - done).map_err(|e| match e {
                        Error::PreimageUndefined { step, point } => Error::PreimageUndefined {
                            step: step + done,
                            point,
                        },
                        e => e,
                    })?;
                    point = pre;
                    log_jac += lj;
                    done = n;
                    out.push(self.rho0.log_density(&point) + log_jac);
                }
                Ok(out)
            }
        }
    }

    /// `rho(x, t)`; underflow yields 0 with the flag set.
    pub fn density_at(&self, x: &PhasePoint, t: f64) -> Result<DensityValue> {
        let log_rho = self.log_density_at(x, t)?;
        let value = log_rho.exp();
        Ok(DensityValue {
            value,
            underflowed: value == 0.0,
        })
    }

    /// `mu_t(f) = sum_i w_i f(T_t x_i) rho0(x_i)`.
    pub fn pushforward_expectation(
        &self,
        f: impl Fn(&PhasePoint) -> f64,
        t: f64,
        quad: &QuadratureRule,
    ) -> Result<f64> {
        self.check_quadrature(quad)?;
        match &self.dynamics {
            Dynamics::Flow(sys) => quad.try_integrate(|x| {
                let (xt, _) = flow_with_divergence_integral(sys.as_ref(), x, t, &self.cfg)?;
                Ok(f(&xt) * self.rho0.density(x))
            }),
            Dynamics::Map(sys) => {
                let n = steps_from_time(t)?;
                Ok(quad.integrate(|x| f(&map_forward(sys.as_ref(), x, n)) * self.rho0.density(x)))
            }
        }
    }

    /// Gibbs entropy `S(t) = -\int rho log rho dx` in initial coordinates:
    /// `-sum_i w_i rho0(x_i) [log rho0(x_i) - Lambda(x_i, t)]` with
    /// `Lambda(x, t) = \int_0^t div v(T_s x) ds` (or its discrete analogue
    /// `log |det DT^n(x)|`).
    pub fn lagrangian_gibbs_entropy(&self, t: f64, quad: &QuadratureRule) -> Result<f64> {
        self.check_quadrature(quad)?;
        let s = quad.try_integrate(|x| {
            let lambda = match &self.dynamics {
                Dynamics::Flow(sys) => flow_with_divergence_integral(sys.as_ref(), x, t, &self.cfg)?.1,
                Dynamics::Map(sys) => map_forward_with_log_volume(sys.as_ref(), x, steps_from_time(t)?)?.1,
            };
            let log_rho0 = self.rho0.log_density(x);
            Ok(log_rho0.exp() * (log_rho0 - lambda))
        })?;
        Ok(-s)
    }

    /// Gibbs entropy from the evolved density on a fixed grid,
    /// `-sum_i w_i rho(x_i, t) log rho(x_i, t)`. Only meaningful while the
    /// grid resolves `rho(., t)`, e.g. the baker map on a dyadic grid.
    pub fn grid_gibbs_entropy(&self, t: f64, quad: &QuadratureRule) -> Result<f64> {
        self.check_quadrature(quad)?;
        let s = quad.try_integrate(|x| {
            let log_rho = self.log_density_at(x, t).map_err(|e| e.at(t, *x))?;
            let rho = log_rho.exp();
            Ok(if rho == 0.0 { 0.0 } else { rho * log_rho })
        })?;
        Ok(-s)
    }

    fn check_quadrature(&self, quad: &QuadratureRule) -> Result<()> {
        if quad.domain() != self.dynamics.domain() {
            return Err(Error::InvalidParameter(format!(
                "quadrature on {:?} does not match system domain {:?}",
                quad.domain(),
                self.dynamics.domain()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_baker, make_circle_flow, BakerSpec};

    fn circle_uniform(omega: f64) -> DensityEvolution {
        DensityEvolution::flow(
            Arc::new(UniformDensity::new(Domain::Circle)),
            Arc::new(make_circle_flow(omega)),
        )
        .unwrap()
    }

    #[test]
    fn quadrature_weights_sum_to_volume() {
        let c = QuadratureRule::circle_midpoint(4096).unwrap();
        assert!((ordered_sum(c.weights().iter().copied()) - 2.0 * PI).abs() < 1e-12);
        let d = QuadratureRule::dyadic_rect(3, 5).unwrap();
        assert_eq!(d.len(), 256);
        assert!((ordered_sum(d.weights().iter().copied()) - 1.0).abs() < 1e-12);
        let l = QuadratureRule::doubling_lattice(101, 3).unwrap();
        assert_eq!(l.len(), 300);
        assert!((ordered_sum(l.weights().iter().copied()) - 1.0).abs() < 1e-12);
        assert!(QuadratureRule::doubling_lattice(100, 3).is_err());
        assert!(QuadratureRule::circle_midpoint(0).is_err());
    }

    #[test]
    fn initial_densities_are_normalized() {
        let quad = QuadratureRule::circle_midpoint(4096).unwrap();
        let sq = QuadratureRule::dyadic_square(6).unwrap();
        let circle: Vec<Arc<dyn Density>> = vec![
            Arc::new(UniformDensity::new(Domain::Circle)),
            Arc::new(CosineBump::new(Domain::Circle, 0.9).unwrap()),
            Arc::new(CircleStationaryDensity::new(2.0).unwrap()),
            Arc::new(CircleStationaryDensity::new(-1.5).unwrap()),
            Arc::new(StationaryPerturbed::new(2.0, 0.5).unwrap()),
            Arc::new(StationaryPerturbed::new(-3.0, -0.7).unwrap()),
        ];
        for d in circle {
            assert!((quad.integrate(|x| d.density(x)) - 1.0).abs() < 1e-10);
            for x in quad.nodes().iter().step_by(97) {
                assert!((d.log_density(x) - d.density(x).ln()).abs() < 1e-12);
            }
        }
        let bump = CosineBump::new(Domain::UnitSquare, 0.5).unwrap();
        assert!((sq.integrate(|x| bump.density(x)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_range_is_checked() {
        assert!(CosineBump::new(Domain::Circle, 1.0).is_err());
        assert!(StationaryPerturbed::new(2.0, -1.0).is_err());
        assert!(CircleStationaryDensity::new(1.0).is_err());
        assert!(CircleStationaryDensity::new(0.5).is_err());
    }

    #[test]
    fn log_density_at_fixed_point_is_closed_form() {
        let ev = circle_uniform(0.5);
        let x = PhasePoint::circle(PI / 6.0);
        let v = ev.log_density_at(&x, 5.0).unwrap();
        let expected = -(2.0 * PI).ln() + 5.0 * (PI / 6.0).cos();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 2.492250).abs() < 1e-6);
        assert_eq!(ev.log_density_at(&x, 0.0).unwrap(), -(2.0 * PI).ln());
    }

    #[test]
    fn density_at_repeller_decays() {
        let ev = circle_uniform(0.5);
        let x = PhasePoint::circle(5.0 * PI / 6.0);
        let d = ev.density_at(&x, 10.0).unwrap();
        let expected = (-10.0 * 3f64.sqrt() / 2.0).exp() / (2.0 * PI);
        assert!((d.value - expected).abs() / expected < 1e-9);
        assert!((d.value - 2.7588e-5).abs() < 1e-8);
        assert!(!d.underflowed);
    }

    #[test]
    fn density_underflow_is_flagged() {
        let ev = circle_uniform(0.5);
        let x = PhasePoint::circle(5.0 * PI / 6.0);
        let d = ev.density_at(&x, 1000.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.underflowed);
        assert!(ev.log_density_at(&x, 1000.0).unwrap().is_finite());
    }

    #[test]
    fn stationary_density_is_fixed_by_the_flow() {
        let rho_bar = Arc::new(CircleStationaryDensity::new(2.0).unwrap());
        let ev = DensityEvolution::flow(rho_bar.clone(), Arc::new(make_circle_flow(2.0))).unwrap();
        for i in 0..20 {
            let x = PhasePoint::circle(-3.0 + 0.3 * i as f64);
            let d = ev.density_at(&x, 1.7).unwrap().value;
            assert!((d - rho_bar.density(&x)).abs() < 1e-8);
        }
    }

    #[test]
    fn baker_keeps_uniform_density() {
        let ev = DensityEvolution::map(
            Arc::new(UniformDensity::new(Domain::UnitSquare)),
            Arc::new(make_baker(BakerSpec { a: 0.5 }).unwrap()),
        )
        .unwrap();
        let x = PhasePoint::square(0.123, 0.877);
        assert_eq!(ev.log_density_at(&x, 12.0).unwrap(), 0.0);
        assert!(matches!(ev.log_density_at(&x, 1.5), Err(Error::NonIntegerTime(_))));
    }

    #[test]
    fn dissipative_baker_off_image_propagates() {
        let ev = DensityEvolution::map(
            Arc::new(UniformDensity::new(Domain::UnitSquare)),
            Arc::new(make_baker(BakerSpec { a: 0.25 }).unwrap()),
        )
        .unwrap();
        let r = ev.log_density_at(&PhasePoint::square(0.4, 0.3), 1.0);
        assert!(matches!(r, Err(Error::PreimageUndefined { step: 0, .. })));
        // (0.2, 0.1) -> preimage (0.1, 0.4), which is off the image
        let r = ev.log_density_path(&PhasePoint::square(0.2, 0.1), &[0.0, 1.0, 2.0]);
        assert!(matches!(r, Err(Error::PreimageUndefined { step: 1, .. })));
    }

    #[test]
    fn path_matches_pointwise_evaluation() {
        let ev = DensityEvolution::flow(
            Arc::new(CosineBump::new(Domain::Circle, 0.4).unwrap()),
            Arc::new(make_circle_flow(0.5)),
        )
        .unwrap();
        let x = PhasePoint::circle(-1.0);
        let times = [0.0, 0.5, 1.25, 2.0];
        let path = ev.log_density_path(&x, &times).unwrap();
        for (t, v) in times.iter().zip(path) {
            assert!((ev.log_density_at(&x, *t).unwrap() - v).abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_is_preserved() {
        let quad = QuadratureRule::circle_midpoint(1024).unwrap();
        let ev = circle_uniform(0.5);
        for t in [0.0, 0.7, 3.0] {
            assert!((ev.pushforward_expectation(|_| 1.0, t, &quad).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn dissipative_baker_y_mean_converges() {
        let quad = QuadratureRule::doubling_lattice(1001, 1).unwrap();
        let ev = DensityEvolution::map(
            Arc::new(UniformDensity::new(Domain::UnitSquare)),
            Arc::new(make_baker(BakerSpec { a: 0.25 }).unwrap()),
        )
        .unwrap();
        // m_{n+1} = a m_n + 1/4 from m_0 = 1/2
        let mut m = 0.5;
        for n in 0..=30 {
            let got = ev.pushforward_expectation(|p| p.y(), n as f64, &quad).unwrap();
            assert!((got - m).abs() < 1e-12, "n = {n}: {got} vs {m}");
            m = 0.25 * m + 0.25;
        }
    }

    #[test]
    fn gibbs_entropy_of_uniform_circle() {
        let quad = QuadratureRule::circle_midpoint(256).unwrap();
        let ev = circle_uniform(0.5);
        assert!((ev.lagrangian_gibbs_entropy(0.0, &quad).unwrap() - (2.0 * PI).ln()).abs() < 1e-12);
        assert!((ev.grid_gibbs_entropy(0.0, &quad).unwrap() - 1.83788).abs() < 1e-5);
    }

    #[test]
    fn mismatched_domains_are_rejected() {
        let r = DensityEvolution::flow(
            Arc::new(UniformDensity::new(Domain::UnitSquare)),
            Arc::new(make_circle_flow(0.5)),
        );
        assert!(r.is_err());
        let quad = QuadratureRule::dyadic_square(2).unwrap();
        assert!(circle_uniform(0.5)
            .pushforward_expectation(|_| 1.0, 1.0, &quad)
            .is_err());
    }
}
