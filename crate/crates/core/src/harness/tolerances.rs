//! Pass/fail thresholds used by every experiment report.

/// Slope gaps and fit residual against an atomic stationary measure.
pub const K_ATOMIC: f64 = 1e-6;
/// Slope gaps and fit residual against a quadrature-backed density.
pub const K_ABS_CONTINUOUS: f64 = 1e-4;
/// Slope gaps and fit residual for volume-preserving maps on a dyadic grid.
pub const K_VOLUME_PRESERVING: f64 = 1e-9;
/// Fit residual against an empirical (orbit) measure.
pub const K_EMPIRICAL: f64 = 5e-3;
/// Slope gap against an empirical measure with a constant Jacobian.
pub const K_EMPIRICAL_CONSTANT_JACOBIAN: f64 = 1e-6;

/// Relative deviation of `B_p(t)` from `B_p(0)`.
pub const BP_RELATIVE: f64 = 1e-4;
/// `B_1(t)` must stay above this fraction of `B_1(0)`.
pub const BP_FLOOR_FRACTION: f64 = 0.5;
/// Slack on `\int |rho - rho_bar|^2 >= B_1^2 / |M|`.
pub const L2_BOUND_SLACK: f64 = 1e-10;

/// `|dS/dt - mu_t(div v)|` for flows.
pub const ENTROPY_RATE: f64 = 1e-5;
/// Central-difference step for `dS/dt`.
pub const ENTROPY_DIFF_STEP: f64 = 1e-3;
/// Entropy slope against `log |det DT|` for maps.
pub const ENTROPY_MAP: f64 = 1e-9;

/// Deviation of the ratio series from constant.
pub const RATIO: f64 = 1e-8;
pub const RATIO_EMPIRICAL: f64 = 5e-3;

/// `|R T_t R x - T_{-t} x|`.
pub const REVERSAL_RESIDUAL: f64 = 1e-8;
pub const REVERSAL_SAMPLES: usize = 100;
pub const REVERSAL_T_MAX: f64 = 5.0;
/// `|K_+ - closed form|` and `|K_- + closed form|`.
pub const REVERSAL_K: f64 = 1e-12;

/// `|mu_N(y) - 1/(4(1 - a))|` at the last probe time.
pub const WEAK_LIMIT: f64 = 2e-3;
/// `|mu_N(f) - nu_emp(f)|` for `f` in `{x, y, xy}`.
pub const WEAK_VS_EMPIRICAL: f64 = 3e-3;

/// Depth in `x` of dyadic baker grids; only `y` needs to follow the horizon.
pub const SQUARE_X_DEPTH: u32 = 6;
