//! Numerical laboratory for ensemble densities under invertible dynamics.
//!
//! Starting from a smooth positive density `rho(x, 0)`, the density
//! transported by an invertible flow or map is evaluated exactly along
//! backward orbits. Averaging `log rho(x, t)` against a stationary measure
//! `nu` gives a series that is exactly linear in `t`; its slope `K` depends
//! only on the dynamics and `nu` and equals `-nu(div v)` for flows or
//! `nu(log J)` for maps. The crate computes that slope three ways and
//! checks the related entropy-rate formulas and time-invariant functionals.
//!
//! | module | contents |
//! |--------|----------|
//! | [`dynsys`] | phase points, flows and maps, RK4 with log-Jacobian accumulation |
//! | [`transport`] | initial densities, quadrature, `rho(x, t)`, `mu_t(f)`, Gibbs entropy |
//! | [`measures`] | atomic, absolutely continuous and empirical stationary measures |
//! | [`functionals`] | log-density series and slope fits, `K` formulas, `B_p`, ratio invariants |
//! | [`catalog`] | the circle flow `v = -sin x + omega` and baker maps |
//! | [`harness`] | TOML experiments, CSV series, plain-text reports |

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod dynsys;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod measures;
pub mod reduce;
pub mod transport;

pub use error::{Error, Result};
