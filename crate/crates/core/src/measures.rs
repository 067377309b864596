//! Stationary measures and their expectations.

use std::ops::Range;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynsys::{ContinuousSystem, DiscreteSystem, Domain, PhasePoint};
use crate::error::{Error, Result};
use crate::reduce::{ordered_mean, ordered_sum};
use crate::transport::{Density, QuadratureRule, ScaledDensity};

/// Tolerance for claimed fixed points of atomic measures.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-12;

/// Tolerance on the total mass of an absolutely continuous measure.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Finitely many weighted point masses.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    points: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "atomic measure needs matching, non-empty points and weights ({} vs {})",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("atomic weights must be non-negative".into()));
        }
        let total = ordered_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("atomic weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    /// Atoms claimed to sit on fixed points of a flow: `|v(p)| < 1e-12`.
    pub fn flow_fixed_points(
        system: &dyn ContinuousSystem,
        points: Vec<PhasePoint>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        for p in &points {
            let v = system.vector_field(p.coords());
            let residual = v[0].hypot(v[1]);
            if !(residual < FIXED_POINT_RESIDUAL) {
                return Err(Error::InvalidParameter(format!(
                    "{p} is not a fixed point of the flow (|v| = {residual:e})"
                )));
            }
        }
        Self::new(points, weights)
    }

    /// Atoms claimed to sit on fixed points of a map: `d(T p, p) < 1e-12`.
    pub fn map_fixed_points(system: &dyn DiscreteSystem, points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        for p in &points {
            let residual = system.forward(p).distance(p);
            if !(residual < FIXED_POINT_RESIDUAL) {
                return Err(Error::InvalidParameter(format!(
                    "{p} is not a fixed point of the map (distance {residual:e})"
                )));
            }
        }
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `rho_bar(x) dx` together with the rule used to integrate against it.
#[derive(Clone)]
pub struct AbsContinuousMeasure {
    rho_bar: Arc<dyn Density>,
    quad: QuadratureRule,
}

impl std::fmt::Debug for AbsContinuousMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AbsContinuousMeasure")
            .field("quad", &self.quad.kind())
            .finish_non_exhaustive()
    }
}

impl AbsContinuousMeasure {
    /// Wraps an already-normalized density; its mass under `quad` must be
    /// 1 within [`MASS_TOLERANCE`].
    pub fn new(rho_bar: Arc<dyn Density>, quad: QuadratureRule) -> Result<Self> {
        if rho_bar.domain() != quad.domain() {
            return Err(Error::InvalidParameter("density and quadrature domains differ".into()));
        }
        let mass = quad.integrate(|x| rho_bar.density(x));
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!("density has mass {mass}, not 1")));
        }
        Ok(Self { rho_bar, quad })
    }

    /// Divides `raw` by its integral under `quad`.
    pub fn normalize(raw: impl Density + 'static, quad: QuadratureRule) -> Result<Self> {
        normalize_density(Arc::new(raw), &quad)
    }

    pub fn rho_bar(&self) -> &Arc<dyn Density> {
        &self.rho_bar
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    /// `rho_bar` at every quadrature node, in node order.
    pub fn node_values(&self) -> Vec<f64> {
        self.quad.nodes().iter().map(|x| self.rho_bar.density(x)).collect()
    }
}

/// `raw / Z` with `Z = sum_i w_i raw(x_i)`.
pub fn normalize_density(raw: Arc<dyn Density>, quad: &QuadratureRule) -> Result<AbsContinuousMeasure> {
    if raw.domain() != quad.domain() {
        return Err(Error::InvalidParameter("density and quadrature domains differ".into()));
    }
    let mut values = Vec::with_capacity(quad.len());
    for (node, x) in quad.nodes().iter().enumerate() {
        let value = raw.density(x);
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveDensity { node, value });
        }
        values.push(value);
    }
    let z = ordered_sum(values.iter().zip(quad.weights()).map(|(v, w)| v * w));
    AbsContinuousMeasure::new(Arc::new(ScaledDensity::new(raw, z.ln())), quad.clone())
}

/// A stored orbit `x_0, ..., x_{B+S-1}`; samples are the entries from the
/// burn-in index `B` on.
///
/// The history before each sample is retained so that the `n`-step
/// preimage of sample `k` is simply entry `k - n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    orbit: Vec<PhasePoint>,
    burn_in: usize,
}

impl EmpiricalMeasure {
    pub fn from_orbit(orbit: Vec<PhasePoint>, burn_in: usize) -> Result<Self> {
        if orbit.len() <= burn_in {
            return Err(Error::InvalidParameter(format!(
                "orbit of length {} has no samples after burn-in {burn_in}",
                orbit.len()
            )));
        }
        Ok(Self { orbit, burn_in })
    }

    pub fn orbit(&self) -> &[PhasePoint] {
        &self.orbit
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn sample_indices(&self) -> Range<usize> {
        self.burn_in..self.orbit.len()
    }

    pub fn samples(&self) -> &[PhasePoint] {
        &self.orbit[self.burn_in..]
    }

    /// The stored `n`-step preimage of orbit entry `k`.
    pub fn preimage(&self, k: usize, n: usize) -> Result<PhasePoint> {
        if n > self.burn_in || k < self.burn_in || k >= self.orbit.len() {
            return Err(Error::HorizonExceedsHistory {
                horizon: n,
                burn_in: self.burn_in,
            });
        }
        Ok(self.orbit[k - n])
    }
}

/// A stationary probability measure `nu`.
#[derive(Clone, Debug)]
pub enum StationaryMeasure {
    Atomic(AtomicMeasure),
    AbsContinuous(AbsContinuousMeasure),
    Empirical(EmpiricalMeasure),
}

impl StationaryMeasure {
    pub fn domain(&self) -> Domain {
        match self {
            StationaryMeasure::Atomic(a) => a.points[0].domain(),
            StationaryMeasure::AbsContinuous(m) => m.quad.domain(),
            StationaryMeasure::Empirical(e) => e.orbit[0].domain(),
        }
    }

    /// Support points, in the order expectations are reduced.
    pub fn support(&self) -> &[PhasePoint] {
        match self {
            StationaryMeasure::Atomic(a) => &a.points,
            StationaryMeasure::AbsContinuous(m) => m.quad.nodes(),
            StationaryMeasure::Empirical(e) => e.samples(),
        }
    }

    /// Weight attached to each support point; `sum w_i h(x_i)` is `nu(h)`.
    pub fn support_weights(&self) -> Vec<f64> {
        match self {
            StationaryMeasure::Atomic(a) => a.weights.clone(),
            StationaryMeasure::AbsContinuous(m) => m
                .quad
                .nodes()
                .iter()
                .zip(m.quad.weights())
                .map(|(x, w)| w * m.rho_bar.density(x))
                .collect(),
            StationaryMeasure::Empirical(e) => {
                let s = e.samples().len();
                vec![1.0 / s as f64; s]
            }
        }
    }

    /// Combines per-support-point values (in [`Self::support`] order) into
    /// `nu(h)`.
    pub fn reduce(&self, values: &[f64]) -> f64 {
        self.reduce_weighted(&self.support_weights(), values)
    }

    /// [`Self::reduce`] with weights from an earlier [`Self::support_weights`].
    pub fn reduce_weighted(&self, weights: &[f64], values: &[f64]) -> f64 {
        match self {
            // plain mean: keeps the average of a constant exact
            StationaryMeasure::Empirical(_) => ordered_mean(values).unwrap_or(f64::NAN),
            _ => ordered_sum(weights.iter().zip(values).map(|(w, v)| w * v)),
        }
    }

    /// `nu(h)`.
    pub fn expect(&self, h: impl Fn(&PhasePoint) -> f64) -> f64 {
        let values: Vec<f64> = self.support().iter().map(h).collect();
        self.reduce(&values)
    }

    /// `nu(h)` for a fallible `h`; the failing support point is attached to
    /// the error.
    pub fn try_expect(&self, h: impl Fn(&PhasePoint) -> Result<f64>) -> Result<f64> {
        let values = self
            .support()
            .iter()
            .map(|x| {
                h(x).map_err(|e| match e {
                    e @ (Error::AtPoint { .. } | Error::AtSupportPoint { .. }) => e,
                    e => Error::AtSupportPoint {
                        point: *x,
                        source: Box::new(e),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.reduce(&values))
    }
}

/// Iterates `T` for `burn_in + samples - 1` steps from `x0` (drawn from the
/// seeded generator when absent) and keeps the whole orbit.
///
/// Each new point passes through
/// [`DiscreteSystem::replenish_expanding_bits`] with a fresh random word,
/// so piecewise-affine expanding maps do not collapse onto a float
/// artefact.
pub fn birkhoff_empirical(
    system: &dyn DiscreteSystem,
    x0: Option<PhasePoint>,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = system.domain();
    let start = match x0 {
        Some(p) if p.domain() != domain => {
            return Err(Error::InvalidParameter("start point is in the wrong domain".into()))
        }
        Some(p) => p,
        None => {
            // uniform on the 2^-53 lattice
            let mut draw = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            match domain {
                Domain::Circle => PhasePoint::circle(-std::f64::consts::PI + 2.0 * std::f64::consts::PI * draw()),
                Domain::UnitSquare => {
                    let x = draw();
                    PhasePoint::square(x, draw())
                }
            }
        }
    };
    let len = burn_in + samples;
    let mut orbit = Vec::with_capacity(len);
    orbit.push(start);
    let mut current = start;
    for _ in 1..len {
        current = system.replenish_expanding_bits(system.forward(&current), rng.next_u64());
        if !current.is_finite() {
            return Err(Error::NumericalOverflow { t: orbit.len() as f64 });
        }
        orbit.push(current);
    }
    EmpiricalMeasure::from_orbit(orbit, burn_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_baker, make_circle_flow, BakerSpec};
    use crate::transport::{FnDensity, UniformDensity};
    use std::f64::consts::PI;

    #[test]
    fn atomic_expectation() {
        let nu = StationaryMeasure::Atomic(AtomicMeasure::new(vec![PhasePoint::circle(PI / 6.0)], vec![1.0]).unwrap());
        assert!((nu.expect(|x| x.x().cos()) - 0.866025).abs() < 1e-6);
    }

    #[test]
    fn atomic_weights_are_validated() {
        let p = PhasePoint::circle(0.0);
        assert!(AtomicMeasure::new(vec![p, p], vec![0.5, 0.6]).is_err());
        assert!(AtomicMeasure::new(vec![p, p], vec![1.5, -0.5]).is_err());
        assert!(AtomicMeasure::new(vec![p], vec![0.5, 0.5]).is_err());
        assert!(AtomicMeasure::new(vec![], vec![]).is_err());
    }

    #[test]
    fn atomic_fixed_point_residuals() {
        let flow = make_circle_flow(0.5);
        assert!(AtomicMeasure::flow_fixed_points(&flow, vec![PhasePoint::circle(0.5f64.asin())], vec![1.0]).is_ok());
        assert!(AtomicMeasure::flow_fixed_points(&flow, vec![PhasePoint::circle(0.6)], vec![1.0]).is_err());
        let baker = make_baker(BakerSpec { a: 0.25 }).unwrap();
        assert!(AtomicMeasure::map_fixed_points(&baker, vec![PhasePoint::square(0.0, 0.0)], vec![1.0]).is_ok());
        assert!(AtomicMeasure::map_fixed_points(&baker, vec![PhasePoint::square(0.2, 0.0)], vec![1.0]).is_err());
    }

    #[test]
    fn uniform_circle_sine_vanishes() {
        let quad = QuadratureRule::circle_midpoint(4096).unwrap();
        let nu = StationaryMeasure::AbsContinuous(
            AbsContinuousMeasure::new(Arc::new(UniformDensity::new(Domain::Circle)), quad).unwrap(),
        );
        assert!(nu.expect(|x| x.x().sin()).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_and_stationary_density() {
        let quad = QuadratureRule::circle_midpoint(4096).unwrap();
        let m = normalize_density(Arc::new(FnDensity::new(Domain::Circle, |_| 1.0)), &quad).unwrap();
        for v in m.node_values() {
            assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
        let m = normalize_density(
            Arc::new(FnDensity::new(Domain::Circle, |x| 1.0 / (2.0 - x.x().sin()).abs())),
            &quad,
        )
        .unwrap();
        let rho0 = m.rho_bar().density(&PhasePoint::circle(0.0));
        // Z = 2 pi / sqrt(3)
        assert!((rho0 - 3f64.sqrt() / (4.0 * PI)).abs() < 1e-14);
        assert!((rho0 - 0.137832).abs() < 1e-6);
    }

    #[test]
    fn normalize_rejects_zero_node() {
        let quad = QuadratureRule::circle_midpoint(8).unwrap();
        let first = quad.nodes()[0].x();
        let raw = FnDensity::new(Domain::Circle, move |x| if x.x() == first { 0.0 } else { 1.0 });
        let r = normalize_density(Arc::new(raw), &quad);
        assert!(matches!(r, Err(Error::NonPositiveDensity { node: 0, value }) if value == 0.0));
    }

    #[test]
    fn normalize_is_idempotent() {
        let quad = QuadratureRule::circle_midpoint(512).unwrap();
        let once = normalize_density(Arc::new(FnDensity::new(Domain::Circle, |x| 2.0 + x.x().cos())), &quad).unwrap();
        let twice = normalize_density(once.rho_bar().clone(), &quad).unwrap();
        for (a, b) in once.node_values().iter().zip(twice.node_values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_measure() {
        let baker = make_baker(BakerSpec { a: 0.25 }).unwrap();
        let x0 = PhasePoint::square(0.0, 0.0);
        let nu = StationaryMeasure::Empirical(birkhoff_empirical(&baker, Some(x0), 0, 1, 1).unwrap());
        assert_eq!(nu.expect(|p| p.x() + 3.0 * p.y() + 1.0), 1.0);
        assert!(birkhoff_empirical(&baker, None, 10, 0, 1).is_err());
    }

    #[test]
    fn orbit_follows_the_map() {
        let baker = make_baker(BakerSpec { a: 0.25 }).unwrap();
        let e = birkhoff_empirical(&baker, None, 100, 1000, 42).unwrap();
        assert_eq!(e.orbit().len(), 1100);
        for w in e.orbit().windows(2) {
            // only the lowest mantissa bit of x may be refilled
            assert!(baker.forward(&w[0]).distance(&w[1]) <= 2f64.powi(-53));
            assert_eq!(baker.forward(&w[0]).y(), w[1].y());
        }
        assert_eq!(e.preimage(150, 7).unwrap(), e.orbit()[143]);
        assert!(matches!(
            e.preimage(150, 101),
            Err(Error::HorizonExceedsHistory {
                horizon: 101,
                burn_in: 100
            })
        ));
    }

    #[test]
    fn orbits_are_seed_deterministic() {
        let baker = make_baker(BakerSpec { a: 0.5 }).unwrap();
        let a = birkhoff_empirical(&baker, None, 10, 500, 7).unwrap();
        let b = birkhoff_empirical(&baker, None, 10, 500, 7).unwrap();
        let c = birkhoff_empirical(&baker, None, 10, 500, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn failing_integrand_reports_point() {
        let nu = StationaryMeasure::Atomic(AtomicMeasure::new(vec![PhasePoint::circle(0.25)], vec![1.0]).unwrap());
        let r = nu.try_expect(|_| Err(Error::MissingReversal));
        match r {
            Err(Error::AtSupportPoint { point, .. }) => assert_eq!(point.x(), 0.25),
            other => panic!("unexpected {other:?}"),
        }
    }
}
