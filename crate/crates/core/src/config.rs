//! Run configuration shared by the command-line tool and the C interface.
//!
//! A configuration is a TOML document; every field is optional and missing
//! numerical settings fall back to per-problem defaults. Physical inputs use
//! km, s, kg and N.
//!
//! ```toml
//! problem = "gto-geo"
//! seed = 7
//!
//! [filter]
//! kind = "l2"
//! constant = 1.0
//!
//! [integrator]
//! abs_tol = 1e-12
//! rel_tol = 1e-12
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::ContinuationSchedule;
use crate::error::{Error, Result};
use crate::harness::{run_rng, GuessDomain, Method, MonteCarloConfig};
use crate::lowthrust::{GtoGeo, SpacecraftParams, TransferBoundary};
use crate::numerics::{IntegratorConfig, RootSolveConfig};
use crate::oscillator::{Oscillator, OscillatorConfig};
use crate::problem::IndirectProblem;
use crate::smoothing::{FilterKind, SmoothingFilter};

/// Problems known to the configuration layer.
pub const PROBLEMS: [&str; 2] = ["oscillator", "gto-geo"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub filter: FilterSpec,
    pub integrator: Option<IntegratorConfig>,
    pub solver: Option<RootSolveConfig>,
    pub schedule: Option<ContinuationSchedule>,
    /// Explicit initial shooting vector; drawn from `domain` when absent.
    pub guess: Option<Vec<f64>>,
    pub domain: Option<GuessDomain>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub montecarlo: MonteCarloSpec,
    pub oscillator: OscillatorConfig,
    pub spacecraft: SpacecraftParams,
    pub transfer: TransferBoundary,
}

/// Filter kind with an optional constant (the continuation floor of the
/// kind when omitted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub constant: Option<f64>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self { kind: FilterKind::L2, constant: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub n: usize,
    pub method: Option<Method>,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { n: 100, method: None }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "oscillator".into(),
            filter: FilterSpec::default(),
            integrator: None,
            solver: None,
            schedule: None,
            guess: None,
            domain: None,
            seed: 0,
            threads: None,
            out_dir: PathBuf::from("out"),
            montecarlo: MonteCarloSpec::default(),
            oscillator: OscillatorConfig::default(),
            spacecraft: SpacecraftParams::default(),
            transfer: TransferBoundary::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn is_lowthrust(&self) -> bool {
        self.problem == "gto-geo"
    }

    pub fn build_problem(&self) -> Result<Box<dyn IndirectProblem>> {
        match self.problem.as_str() {
            "oscillator" => Ok(Box::new(Oscillator::new(self.oscillator)?)),
            "gto-geo" => Ok(Box::new(GtoGeo::new(self.spacecraft, self.transfer, None)?)),
            other => Err(Error::Config(format!("unknown problem `{other}`; expected one of {}", PROBLEMS.join(", ")))),
        }
    }

    pub fn filter(&self) -> Result<SmoothingFilter> {
        let constant = self.filter.constant.unwrap_or_else(|| self.filter.kind.default_floor());
        SmoothingFilter::new(self.filter.kind, constant).map_err(|e| Error::Config(e.to_string()))
    }

    /// Tolerances 1e-9 for the oscillator, 1e-12 for the transfer.
    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| {
            let tol = if self.is_lowthrust() { 1e-12 } else { 1e-9 };
            IntegratorConfig::with_tolerances(tol, tol)
        })
    }

    /// Residual tolerance 1e-9 for the oscillator; 1e-6 for the transfer,
    /// which also stops stagnating solves after ten iterations.
    pub fn solver(&self) -> RootSolveConfig {
        self.solver.unwrap_or_else(|| {
            if self.is_lowthrust() {
                RootSolveConfig { stall_window: Some(10), ..RootSolveConfig::with_tolerance(1e-6) }
            } else {
                RootSolveConfig::default()
            }
        })
    }

    pub fn schedule(&self) -> ContinuationSchedule {
        self.schedule.unwrap_or_else(|| ContinuationSchedule::for_filter(self.filter.kind))
    }

    pub fn domain(&self) -> Result<GuessDomain> {
        match &self.domain {
            Some(d) => Ok(d.clone()),
            None => GuessDomain::for_problem(&self.problem)
                .ok_or_else(|| Error::Config(format!("no default guess domain for `{}`", self.problem))),
        }
    }

    /// The configured guess, or the draw of run 0 from the guess domain.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        match &self.guess {
            Some(g) => Ok(g.clone()),
            None => Ok(self.domain()?.sample(&mut run_rng(self.seed, 0))),
        }
    }

    pub fn montecarlo(&self) -> Result<MonteCarloConfig> {
        let method = self.montecarlo.method.unwrap_or(if self.is_lowthrust() {
            Method::Continuation
        } else {
            Method::Direct
        });
        Ok(MonteCarloConfig {
            n: self.montecarlo.n,
            seed: self.seed,
            method,
            filter: self.filter()?,
            schedule: self.schedule(),
            integrator: self.integrator(),
            solver: self.solver(),
            threads: self.threads,
        })
    }

    /// Checks every section against the selected problem.
    pub fn validate(&self) -> Result<Box<dyn IndirectProblem>> {
        let problem = self.build_problem()?;
        let cfg = |e: Error| Error::Config(e.to_string());
        self.filter()?;
        self.integrator().validate().map_err(cfg)?;
        self.solver().validate().map_err(cfg)?;
        self.schedule().validate().map_err(cfg)?;
        if let Some(g) = &self.guess {
            problem.check_shooting(g).map_err(cfg)?;
        }
        if let Some(d) = &self.domain {
            d.validate().map_err(cfg)?;
            if d.dim() != problem.shooting_dim() {
                return Err(Error::Config(format!(
                    "guess domain has {} components, {} needs {}",
                    d.dim(),
                    self.problem,
                    problem.shooting_dim()
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(problem)
    }
}
