use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A declarative experiment, as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemTable", into = "SystemTable")]
pub enum SystemConfig {
    Circle { omega: f64 },
    Baker { a: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SystemName {
    Circle,
    Baker,
}

// A flat table keeps value spans, which a tagged enum would discard.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemTable {
    kind: SystemName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
}

impl TryFrom<SystemTable> for SystemConfig {
    type Error = String;

    fn try_from(t: SystemTable) -> std::result::Result<Self, String> {
        match (t.kind, t.omega, t.a) {
            (SystemName::Circle, Some(omega), None) => Ok(SystemConfig::Circle { omega }),
            (SystemName::Baker, None, Some(a)) => Ok(SystemConfig::Baker { a }),
            (SystemName::Circle, _, _) => Err("circle takes exactly one parameter, `omega`".into()),
            (SystemName::Baker, _, _) => Err("baker takes exactly one parameter, `a`".into()),
        }
    }
}

impl From<SystemConfig> for SystemTable {
    fn from(s: SystemConfig) -> Self {
        match s {
            SystemConfig::Circle { omega } => SystemTable {
                kind: SystemName::Circle,
                omega: Some(omega),
                a: None,
            },
            SystemConfig::Baker { a } => SystemTable {
                kind: SystemName::Baker,
                omega: None,
                a: Some(a),
            },
        }
    }
}

impl SystemConfig {
    pub fn label(&self) -> String {
        match self {
            SystemConfig::Circle { omega } => format!("circle{{omega={omega:?}}}"),
            SystemConfig::Baker { a } => format!("baker{{a={a:?}}}"),
        }
    }

    pub fn is_flow(&self) -> bool {
        matches!(self, SystemConfig::Circle { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KSlope,
    BpInvariance,
    EntropyRate,
    RatioInvariance,
    Reversibility,
    WeakConvergenceProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KSlope => "k-slope",
            ExperimentKind::BpInvariance => "bp-invariance",
            ExperimentKind::EntropyRate => "entropy-rate",
            ExperimentKind::RatioInvariance => "ratio-invariance",
            ExperimentKind::Reversibility => "reversibility",
            ExperimentKind::WeakConvergenceProbe => "weak-convergence-probe",
        }
    }
}

/// The small family of initial densities offered to experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDensityKind {
    #[default]
    Uniform,
    /// `1 + eps cos x` (circle) or `1 + eps cos 2 pi x` (square), normalized.
    CosineBump,
    /// `rho_bar (1 + eps sin x) / Z`; circle with `|omega| > 1` only.
    StationaryPerturbed,
}

/// Integrand of the ratio invariant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioFunction {
    #[default]
    Identity,
    Log,
}

impl RatioFunction {
    pub fn apply(self, g: f64) -> f64 {
        match self {
            RatioFunction::Identity => g,
            RatioFunction::Log => g.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub density: InitialDensityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<RatioFunction>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    #[default]
    ClosedForm,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(default)]
    pub kind: MeasureKind,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_burn_in() -> usize {
    1000
}

fn default_samples() -> usize {
    100_000
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            kind: MeasureKind::default(),
            burn_in: default_burn_in(),
            samples: default_samples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_step")]
    pub h: f64,
    /// Circle midpoint nodes; also sizes the doubling lattice on the square.
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    /// Dyadic depth in `y` for baker grids; defaults to the horizon + 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dyadic_depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_quad_nodes() -> usize {
    4096
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h: default_step(),
            quad_nodes: default_quad_nodes(),
            dyadic_depth: None,
            times: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Where CSVs and the report go; nothing is written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The configured times, or the defaults: 11 points on `[0, 10]` for
    /// flows, integers `0..=10` for maps, `0..=30` for the weak-convergence
    /// probe.
    pub fn times(&self) -> Vec<f64> {
        if let Some(t) = &self.numerics.times {
            return t.clone();
        }
        let last = if self.experiment.kind == ExperimentKind::WeakConvergenceProbe {
            30
        } else {
            10
        };
        (0..=last).map(|t| t as f64).collect()
    }

    pub fn epsilon(&self) -> f64 {
        self.experiment.epsilon.unwrap_or(0.5)
    }

    pub fn p(&self) -> f64 {
        self.experiment.p.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self.system {
            SystemConfig::Circle { omega } if !omega.is_finite() => {
                return bad(format!("omega must be finite, got {omega}"))
            }
            SystemConfig::Baker { a } if !(a > 0.0 && a <= 0.5) => {
                return bad(format!("baker contraction a must lie in (0, 1/2], got {a}"))
            }
            _ => {}
        }
        let eps = self.epsilon();
        if !(eps > -1.0 && eps < 1.0) {
            return bad(format!("epsilon must lie in (-1, 1), got {eps}"));
        }
        if let Some(p) = self.experiment.p {
            if !(p >= 1.0 && p.is_finite()) {
                return bad(format!("p must be >= 1, got {p}"));
            }
        }
        let times = self.times();
        if times.is_empty() {
            return bad("times must be non-empty".into());
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("times must be non-negative and strictly increasing".into());
        }
        if !self.system.is_flow() && times.iter().any(|t| t.fract() != 0.0) {
            return bad("baker experiments need integer times".into());
        }
        if !(self.numerics.h > 0.0 && self.numerics.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.numerics.h));
        }
        if self.numerics.quad_nodes < 3 {
            return bad("quad_nodes must be at least 3".into());
        }
        if self.measure.samples == 0 {
            return bad("samples must be positive".into());
        }
        Ok(())
    }
}
