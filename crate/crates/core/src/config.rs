//! Experiment configuration, read from TOML.
//!
//! ```toml
//! scenario = "fixed-point"      # see `skewflow --list`
//! seed = 7                      # optional, default 0
//! outdir = "out/fixed-point"    # optional, `--outdir` wins
//!
//! [system]
//! name = "B1-scalar"            # a shipped benchmark, or instead:
//! # frequencies = [1.0, 1.4142135623730951]
//! # field = ["-x1*x1*x1 - x1*x1*x2", "cos(th1)*x1 - x2 + x1*x1"]
//!
//! [params]                      # all optional; unset keys use scenario defaults
//! t0 = 1.0
//! grid = 64
//!
//! [output]
//! plot = true
//! log_scale = true
//! ```
//!
//! Recognized `[params]` keys: `eps`, `eps_list`, `t0`, `grid`, `tol`,
//! `max_iter`, `t_list`, `offset`, `samples`, `horizon`, `window`, `margin`,
//! `alpha`, `beta`, `gamma`, `delta`, `lambda_star`, `lambda_alt`, `points`,
//! `frame_horizon`, `span`, `starts`, `expected`, `expected_tol`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::benchmarks;
use crate::cocycle::System;
use crate::error::{Error, Result};
use crate::expr::inline_system;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    AttractorEquivalence,
    FixedPoint,
    Spectrum,
    QContinuity,
    ReductionFrame,
    Manifold,
    AsymptoticPhase,
    Pliss,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::AttractorEquivalence,
        Scenario::FixedPoint,
        Scenario::Spectrum,
        Scenario::QContinuity,
        Scenario::ReductionFrame,
        Scenario::Manifold,
        Scenario::AsymptoticPhase,
        Scenario::Pliss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::AttractorEquivalence => "attractor-equivalence",
            Scenario::FixedPoint => "fixed-point",
            Scenario::Spectrum => "spectrum",
            Scenario::QContinuity => "q-continuity",
            Scenario::ReductionFrame => "reduction-frame",
            Scenario::Manifold => "manifold",
            Scenario::AsymptoticPhase => "asymptotic-phase",
            Scenario::Pliss => "pliss",
        }
    }

    /// Benchmark used when `[system]` is omitted.
    pub fn default_system(self) -> &'static str {
        match self {
            Scenario::AttractorEquivalence | Scenario::FixedPoint => "B1-scalar",
            Scenario::Spectrum | Scenario::QContinuity | Scenario::ReductionFrame => "B1",
            Scenario::Manifold | Scenario::AsymptoticPhase | Scenario::Pliss => "B2",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: Option<String>,
    pub frequencies: Option<Vec<f64>>,
    pub field: Option<Vec<String>>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<System> {
        match (&self.name, &self.frequencies, &self.field) {
            (Some(n), None, None) => {
                benchmarks::by_name(n).ok_or_else(|| Error::Config(format!("unknown system '{n}'")))
            }
            (None, Some(freq), Some(field)) => {
                inline_system(freq.clone(), field).map_err(|e| Error::Config(format!("inline system: {e}")))
            }
            _ => Err(Error::Config(
                "[system] needs either `name` or both `frequencies` and `field`".into(),
            )),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "inline".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub t_list: Option<Vec<f64>>,
    pub offset: Option<f64>,
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
    pub window: Option<f64>,
    pub margin: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub lambda_star: Option<f64>,
    pub lambda_alt: Option<Vec<f64>>,
    pub points: Option<usize>,
    pub frame_horizon: Option<f64>,
    pub span: Option<f64>,
    pub starts: Option<usize>,
    /// Reference spectral intervals `[[lo, hi], …]`.
    pub expected: Option<Vec<[f64; 2]>>,
    pub expected_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default = "yes")]
    pub plot: bool,
    #[serde(default = "yes")]
    pub log_scale: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            plot: true,
            log_scale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    pub outdir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// A config with every parameter at its scenario default.
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            outdir: None,
            system: None,
            params: Params::default(),
            output: OutputOptions::default(),
        }
    }

    pub fn system_spec(&self) -> SystemSpec {
        self.system.clone().unwrap_or_else(|| SystemSpec {
            name: Some(self.scenario.default_system().into()),
            ..Default::default()
        })
    }

    pub fn system(&self) -> Result<System> {
        self.system_spec().build()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let positive = [
            ("t0", p.t0),
            ("tol", p.tol),
            ("offset", p.offset),
            ("horizon", p.horizon),
            ("window", p.window),
            ("margin", p.margin),
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("gamma", p.gamma),
            ("delta", p.delta),
            ("frame_horizon", p.frame_horizon),
            ("span", p.span),
            ("expected_tol", p.expected_tol),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")));
                }
            }
        }
        let counts = [
            ("grid", p.grid),
            ("max_iter", p.max_iter),
            ("samples", p.samples),
            ("points", p.points),
            ("starts", p.starts),
        ];
        for (name, v) in counts {
            if v == Some(0) {
                return Err(Error::Config(format!("`{name}` must be at least 1")));
            }
        }
        if let Some(e) = p.eps {
            if e == 0.0 || !e.is_finite() {
                return Err(Error::Config("`eps` must be nonzero and finite".into()));
            }
        }
        if let Some(list) = &p.eps_list {
            if list.is_empty() || list.iter().any(|e| !(*e > 0.0)) || list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Config("`eps_list` must be positive and strictly decreasing".into()));
            }
        }
        if let Some(ts) = &p.t_list {
            if ts.is_empty() || ts[0] < 0.0 || ts.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("`t_list` must be nonnegative and strictly increasing".into()));
            }
        }
        if let (Some(a), Some(b)) = (p.alpha, p.beta) {
            if !(b > a) {
                return Err(Error::Config("need alpha < beta".into()));
            }
        }
        if let Some(ex) = &p.expected {
            if ex.iter().any(|[lo, hi]| !(lo <= hi)) {
                return Err(Error::Config("`expected` intervals need lo ≤ hi".into()));
            }
        }
        // catches unknown names and bad inline fields before any work
        self.system()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml("scenario = \"fixed-point\"").unwrap();
        assert_eq!(cfg.scenario, Scenario::FixedPoint);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.system_spec().label(), "B1-scalar");
        assert!(cfg.output.plot);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
scenario = "spectrum"
seed = 3
outdir = "out"
[system]
frequencies = [1.0, 1.4142135623730951]
field = ["0", "cos(th1)*x1 - x2"]
[params]
eps_list = [0.1, 0.05]
alpha = 0.25
beta = 0.5
expected = [[-1.0, -1.0], [0.0, 0.0]]
[output]
log_scale = false
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.params.eps_list.as_deref(), Some(&[0.1, 0.05][..]));
        assert_eq!(cfg.system().unwrap().dim(), 2);
        assert!(!cfg.output.log_scale);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "scenario = \"nope\"",
            "scenario = \"spectrum\"\n[params]\ntol = -1.0",
            "scenario = \"spectrum\"\n[params]\nwhatever = 1",
            "scenario = \"spectrum\"\n[system]\nname = \"B9\"",
            "scenario = \"spectrum\"\n[system]\nname = \"B1\"\nfield = [\"x1\"]",
            "scenario = \"spectrum\"\n[system]\nfrequencies = [1.0]\nfield = [\"x2\"]",
            "scenario = \"spectrum\"\n[params]\neps_list = [0.05, 0.1]",
            "scenario = \"spectrum\"\n[params]\nalpha = 0.5\nbeta = 0.25",
            "scenario = \"fixed-point\"\n[params]\ngrid = 0",
            "scenario = \"fixed-point\"\n[params]\neps = 0.0",
            "not toml at all",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
