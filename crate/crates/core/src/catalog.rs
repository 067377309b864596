//! Concrete systems with closed-form ground truth.
//!
//! * the thermostatted circle flow `v(x) = -sin x + omega` on `[-pi, pi)`,
//! * the baker's transformation of the unit square and a dissipative
//!   variant that contracts vertically by `a < 1/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynsys::{ContinuousSystem, DiscreteSystem, Domain, PhasePoint};
use crate::error::{Error, Result};
use crate::measures::{AbsContinuousMeasure, AtomicMeasure, StationaryMeasure};
use crate::transport::{CircleStationaryDensity, QuadratureRule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleFlowSpec {
    pub omega: f64,
}

/// `dx/dt = -sin x + omega` on the circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleFlow {
    omega: f64,
}

impl CircleFlow {
    pub fn omega(&self) -> f64 {
        self.omega
    }
}

pub fn make_circle_flow(omega: f64) -> CircleFlow {
    CircleFlow { omega }
}

impl ContinuousSystem for CircleFlow {
    fn domain(&self) -> Domain {
        Domain::Circle
    }

    fn vector_field(&self, x: [f64; 2]) -> [f64; 2] {
        [self.omega - x[0].sin(), 0.0]
    }

    fn divergence(&self, x: [f64; 2]) -> f64 {
        -x[0].cos()
    }

    fn field_and_divergence(&self, x: [f64; 2]) -> ([f64; 2], f64) {
        let (s, c) = x[0].sin_cos();
        ([self.omega - s, 0.0], -c)
    }

    /// Reflection through `pi/2`: `R(x) = pi - x`.
    fn reversal(&self, x: &PhasePoint) -> Option<PhasePoint> {
        Some(PhasePoint::circle(PI - x.x()))
    }

    fn has_reversal(&self) -> bool {
        true
    }
}

/// Fixed points `(x_plus, x_minus)` of the circle flow: the attractor
/// `arcsin omega` and the repeller `pi - arcsin omega`, wrapped into
/// `[-pi, pi)`. They merge at `|omega| = 1` and disappear beyond.
pub fn circle_fixed_points(omega: f64) -> Option<(f64, f64)> {
    if omega.abs() < 1.0 {
        let x_plus = omega.asin();
        let x_minus = PhasePoint::circle(PI - x_plus).x();
        Some((x_plus, x_minus))
    } else if omega.abs() == 1.0 {
        let x = FRAC_PI_2 * omega.signum();
        Some((x, x))
    } else {
        None
    }
}

/// `K_+ = cos x_+ = sqrt(1 - omega^2)` inside the locked regime, 0 outside.
pub fn circle_k_closed_form(omega: f64) -> f64 {
    if omega.abs() < 1.0 {
        (1.0 - omega * omega).sqrt()
    } else {
        0.0
    }
}

/// Which asymptotic measure to build for the locked circle flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeDirection {
    /// `nu_+`, the limit as `t -> +infinity` (the SRB measure).
    #[default]
    Forward,
    /// `nu_-`, the limit as `t -> -infinity`.
    Backward,
}

/// The stationary measure selected by the circle flow: a point mass at a
/// fixed point for `|omega| < 1`, the density proportional to `1/|v|`
/// otherwise.
pub fn circle_stationary(omega: f64, quad: &QuadratureRule, direction: TimeDirection) -> Result<StationaryMeasure> {
    if omega.abs() == 1.0 {
        return Err(Error::DegenerateOmega(omega));
    }
    let flow = make_circle_flow(omega);
    match circle_fixed_points(omega) {
        Some((x_plus, x_minus)) => {
            let x = match direction {
                TimeDirection::Forward => x_plus,
                TimeDirection::Backward => x_minus,
            };
            let atom = AtomicMeasure::flow_fixed_points(&flow, vec![PhasePoint::circle(x)], vec![1.0])?;
            Ok(StationaryMeasure::Atomic(atom))
        }
        None => {
            if quad.domain() != Domain::Circle {
                return Err(Error::InvalidParameter(
                    "circle measure needs a circle quadrature".into(),
                ));
            }
            let rho_bar = CircleStationaryDensity::new(omega)?;
            Ok(StationaryMeasure::AbsContinuous(AbsContinuousMeasure::normalize(
                rho_bar,
                quad.clone(),
            )?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BakerSpec {
    /// Vertical contraction, in `(0, 1/2]`; `1/2` is the classical baker.
    pub a: f64,
}

/// `T(x, y) = (2x, a y)` for `x < 1/2`, `(2x - 1, a y + 1/2)` otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Baker {
    a: f64,
    log_jac_inv: f64,
}

impl Baker {
    pub fn contraction(&self) -> f64 {
        self.a
    }

    /// `-log(2a)`, the constant `log |det DT^{-1}|`.
    pub fn log_jacobian(&self) -> f64 {
        self.log_jac_inv
    }
}

pub fn make_baker(spec: BakerSpec) -> Result<Baker> {
    let a = spec.a;
    if !(a > 0.0 && a <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "baker contraction must lie in (0, 1/2], got {a}"
        )));
    }
    // exact zero for the area-preserving map
    let log_jac_inv = if a == 0.5 { 0.0 } else { -(2.0 * a).ln() };
    Ok(Baker { a, log_jac_inv })
}

impl Baker {
    fn on_image(&self, y: f64) -> bool {
        y < self.a || (0.5..0.5 + self.a).contains(&y)
    }
}

impl DiscreteSystem for Baker {
    fn domain(&self) -> Domain {
        Domain::UnitSquare
    }

    fn forward(&self, p: &PhasePoint) -> PhasePoint {
        let (x, y) = (p.x(), p.y());
        if x < 0.5 {
            PhasePoint::square(2.0 * x, self.a * y)
        } else {
            PhasePoint::square(2.0 * x - 1.0, self.a * y + 0.5)
        }
    }

    fn inverse(&self, p: &PhasePoint) -> Option<PhasePoint> {
        let (x, y) = (p.x(), p.y());
        if y < self.a {
            Some(PhasePoint::square(x / 2.0, y / self.a))
        } else if y >= 0.5 && y < 0.5 + self.a {
            Some(PhasePoint::square((x + 1.0) / 2.0, (y - 0.5) / self.a))
        } else {
            None
        }
    }

    fn log_jac_inv(&self, p: &PhasePoint) -> Option<f64> {
        self.on_image(p.y()).then_some(self.log_jac_inv)
    }

    fn is_volume_preserving(&self) -> bool {
        self.a == 0.5
    }

    /// The doubling in `x` loses the lowest mantissa bit every step, so a
    /// float orbit collapses onto `x = 0` after ~53 iterations. Once `x` is
    /// on the `2^-53` lattice, the bit freed by the doubling is refilled.
    fn replenish_expanding_bits(&self, p: PhasePoint, random_word: u64) -> PhasePoint {
        const ULP: f64 = 1.0 / (1u64 << 53) as f64;
        let x = p.x();
        if (x / ULP).fract() != 0.0 {
            return p;
        }
        let bit = (random_word >> 63) as f64;
        let refilled = x + bit * ULP;
        if refilled < 1.0 {
            PhasePoint::square(refilled, p.y())
        } else {
            p
        }
    }
}

/// Names and parameters accepted by the harness.
pub fn system_names() -> &'static [(&'static str, &'static str)] {
    &[
        (
            "circle",
            "circle{omega}: thermostatted flow v(x) = -sin x + omega on [-pi, pi)",
        ),
        (
            "baker",
            "baker{a}: baker map of the unit square, vertical contraction a in (0, 1/2]",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{check_reversal, IntegratorConfig};

    #[test]
    fn circle_field_values() {
        let f0 = make_circle_flow(0.0);
        assert_eq!(f0.vector_field([FRAC_PI_2, 0.0])[0], -1.0);
        for omega in [-3.0, 0.0, 0.5, 2.0] {
            assert_eq!(make_circle_flow(omega).divergence([0.0, 0.0]), -1.0);
        }
        let f = make_circle_flow(0.5);
        assert!(f.vector_field([PI / 6.0, 0.0])[0].abs() < 1e-15);
    }

    #[test]
    fn divergence_matches_finite_difference() {
        let f = make_circle_flow(0.7);
        let h = 1e-4;
        for i in 0..50 {
            let x = -PI + 2.0 * PI * (i as f64 + 0.3) / 50.0;
            let fd = (f.vector_field([x + h, 0.0])[0] - f.vector_field([x - h, 0.0])[0]) / (2.0 * h);
            // central difference error ~ h^2/6 * |v'''| <= 2e-9
            assert!((fd - f.divergence([x, 0.0])).abs() < 1e-8);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn fixed_points_cover_all_regimes() {
        let (p, m) = circle_fixed_points(0.5).unwrap();
        assert!((p - 0.523599).abs() < 1e-6);
        assert!((m - 2.617994).abs() < 1e-6);
        assert!(p.abs() < m.abs());
        assert_eq!(circle_fixed_points(1.0), Some((FRAC_PI_2, FRAC_PI_2)));
        assert_eq!(circle_fixed_points(-1.0), Some((-FRAC_PI_2, -FRAC_PI_2)));
        assert_eq!(circle_fixed_points(2.0), None);
        // x_minus wraps to negative values for negative omega
        let (p, m) = circle_fixed_points(-0.5).unwrap();
        assert!((p + PI / 6.0).abs() < 1e-15);
        assert!((m + 5.0 * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_classification() {
        for omega in [0.1, 0.5, 0.9] {
            let (p, m) = circle_fixed_points(omega).unwrap();
            let f = make_circle_flow(omega);
            assert!(f.divergence([p, 0.0]) < 0.0);
            assert!(f.divergence([m, 0.0]) > 0.0);
        }
    }

    #[test]
    fn closed_form_k() {
        assert!((circle_k_closed_form(0.6) - 0.8).abs() < 1e-15);
        assert_eq!(circle_k_closed_form(2.0), 0.0);
        assert_eq!(circle_k_closed_form(0.0), 1.0);
        assert_eq!(circle_k_closed_form(1.0), 0.0);
    }

    #[test]
    fn reversal_is_an_involution() {
        let f = make_circle_flow(0.3);
        for i in 0..100 {
            let x = PhasePoint::circle(-PI + 0.0628 * i as f64);
            let rr = f.reversal(&f.reversal(&x).unwrap()).unwrap();
            assert!(rr.distance(&x) < 1e-12);
        }
    }

    #[test]
    fn reversal_conjugates_the_flow() {
        let cfg = IntegratorConfig::default();
        let f = make_circle_flow(0.8);
        assert!(check_reversal(&f, &PhasePoint::circle(0.0), 1.0, &cfg).unwrap() < 1e-8);
        assert_eq!(check_reversal(&f, &PhasePoint::circle(0.4), 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn stationary_measure_variants() {
        let quad = QuadratureRule::circle_midpoint(256).unwrap();
        match circle_stationary(0.5, &quad, TimeDirection::Forward).unwrap() {
            StationaryMeasure::Atomic(a) => {
                assert_eq!(a.points().len(), 1);
                assert!((a.points()[0].x() - PI / 6.0).abs() < 1e-15);
                assert_eq!(a.weights(), &[1.0]);
            }
            _ => panic!("expected an atom"),
        }
        match circle_stationary(0.5, &quad, TimeDirection::Backward).unwrap() {
            StationaryMeasure::Atomic(a) => assert!((a.points()[0].x() - 5.0 * PI / 6.0).abs() < 1e-14),
            _ => panic!("expected an atom"),
        }
        assert!(matches!(
            circle_stationary(2.0, &quad, TimeDirection::Forward).unwrap(),
            StationaryMeasure::AbsContinuous(_)
        ));
        assert!(matches!(
            circle_stationary(1.0, &quad, TimeDirection::Forward),
            Err(Error::DegenerateOmega(_))
        ));
    }

    #[test]
    fn baker_branches() {
        let b = make_baker(BakerSpec { a: 0.5 }).unwrap();
        assert_eq!(b.forward(&PhasePoint::square(0.3, 0.4)).coords(), [0.6, 0.2]);
        assert_eq!(b.log_jac_inv(&PhasePoint::square(0.6, 0.2)), Some(0.0));
        assert!(b.is_volume_preserving());

        let d = make_baker(BakerSpec { a: 0.25 }).unwrap();
        let img = d.forward(&PhasePoint::square(0.7, 0.2));
        assert!((img.x() - 0.4).abs() < 1e-15 && (img.y() - 0.55).abs() < 1e-15);
        assert_eq!(d.log_jac_inv(&img), Some(2f64.ln()));
        assert_eq!(d.inverse(&PhasePoint::square(0.4, 0.3)), None);
        assert_eq!(d.log_jac_inv(&PhasePoint::square(0.4, 0.3)), None);
        assert!(!d.is_volume_preserving());
    }

    #[test]
    fn baker_parameter_range() {
        for a in [0.0, -0.1, 0.51, f64::NAN] {
            assert!(make_baker(BakerSpec { a }).is_err());
        }
    }

    #[test]
    fn refill_only_touches_lattice_points() {
        let b = make_baker(BakerSpec { a: 0.25 }).unwrap();
        let p = PhasePoint::square(0.5, 0.1);
        let q = b.replenish_expanding_bits(p, u64::MAX);
        assert_eq!(q.x(), 0.5 + 2f64.powi(-53));
        assert_eq!(b.replenish_expanding_bits(p, 0), p);
        // 0.1 is not on the 2^-53 lattice
        let r = PhasePoint::square(0.1 + 1e-17, 0.1);
        assert_eq!(b.replenish_expanding_bits(r, u64::MAX).x(), r.x());
    }
}
