//! Experiment configuration, read from TOML.
//!
//! ```toml
//! m = 2.0
//! seed = 0
//!
//! [operator]
//! kind = "SFL"        # RFL, SFL or CFL
//! s = 0.5
//! n = 256
//!
//! [datum]
//! preset = "bump"     # bump, c_phi1, c_phi1_pow, c_profile, constant
//! c = 1.0
//! exponent = 1.0
//!
//! [schedule]
//! dt0 = 1e-3
//! growth = 1.05
//! t_end = 5.0
//! probe_times = [1.0, 5.0]
//!
//! [checks]
//! select = ["all"]
//! kappa_star = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fpme_core::estimates::Tolerances;
use fpme_core::evolution::{DtSchedule, EvolutionConfig, Preset};
use fpme_core::grid::MIN_NODES;
use fpme_core::{build_grid, OperatorKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Grid size used by `--fast`.
pub const FAST_NODES: usize = 256;

pub const CHECKS: [&str; 14] = [
    "time_monotonicity",
    "green_dissipation",
    "pointwise_estimates",
    "absolute_bound",
    "upper_boundary",
    "universal_lower",
    "matching_lower",
    "counterexample_upper",
    "small_data_supersolution",
    "backward_weighted_mass",
    "kato",
    "ghp",
    "local_harnack",
    "asymptotics",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub kind: OperatorKind,
    pub s: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSection {
    pub preset: String,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub dt0: f64,
    pub growth: f64,
    pub t_end: f64,
    #[serde(default)]
    pub probe_times: Vec<f64>,
    #[serde(default = "one_usize")]
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "all_checks")]
    pub select: Vec<String>,
    #[serde(default = "one")]
    pub kappa_star: f64,
    /// `u0 <= c0 phi1` for the small-data upper bound; derived from the datum
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// `u0 <= amp phi1^{1-2s/gamma}` for the supersolution; derived when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default)]
    pub harnack_center: f64,
    #[serde(default = "quarter")]
    pub harnack_radius: f64,
    /// Random positive vectors fed to the Kato check.
    #[serde(default = "kato_samples")]
    pub kato_samples: usize,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            select: all_checks(),
            kappa_star: 1.0,
            c0: None,
            amp: None,
            harnack_center: 0.0,
            harnack_radius: 0.25,
            kato_samples: kato_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub operator: OperatorSection,
    pub datum: DatumSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub checks: ChecksSection,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn quarter() -> f64 {
    0.25
}

fn kato_samples() -> usize {
    8
}

fn all_checks() -> Vec<String> {
    vec!["all".into()]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `--fast` and `--out` and validates again.
    pub fn resolve(mut self, fast: bool, out: Option<&Path>) -> Result<Self> {
        if fast {
            self.operator.n = self.operator.n.min(FAST_NODES);
        }
        if let Some(o) = out {
            self.out = Some(o.to_path_buf());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let op = &self.operator;
        op.kind.validate(op.s).map_err(|e| CliError::Config(e.to_string()))?;
        if op.n < MIN_NODES {
            return Err(CliError::Config(format!("operator.n must be at least {MIN_NODES}, got {}", op.n)));
        }
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(CliError::Config(format!("m must exceed 1, got {}", self.m)));
        }
        let preset = self.preset()?;
        if !(self.datum.c >= 0.0 && self.datum.c.is_finite()) {
            return Err(CliError::Config(format!("datum.c must be nonnegative, got {}", self.datum.c)));
        }
        if matches!(preset, Preset::CPhi1Pow { .. }) && !(self.datum.exponent > 0.0) {
            return Err(CliError::Config(format!("datum.exponent must be positive, got {}", self.datum.exponent)));
        }
        self.evolution().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let ch = &self.checks;
        if let Some(bad) = ch.select.iter().find(|c| c.as_str() != "all" && !CHECKS.contains(&c.as_str())) {
            return Err(CliError::Config(format!("unknown check {bad:?}; known: all, {}", CHECKS.join(", "))));
        }
        if !(ch.kappa_star > 0.0) {
            return Err(CliError::Config(format!("checks.kappa_star must be positive, got {}", ch.kappa_star)));
        }
        for (name, v) in [("checks.c0", ch.c0), ("checks.amp", ch.amp)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(ch.harnack_radius >= 0.0) || ch.harnack_center.abs() + 2.0 * ch.harnack_radius > 1.0 {
            return Err(CliError::Config(format!(
                "harnack ball B_2R({}) with R = {} must lie inside (-1, 1)",
                ch.harnack_center, ch.harnack_radius
            )));
        }
        Ok(())
    }

    pub fn preset(&self) -> Result<Preset> {
        let p = Preset::from_str(&self.datum.preset).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p.with_params(self.datum.c, self.datum.exponent))
    }

    pub fn evolution(&self) -> EvolutionConfig {
        let s = &self.schedule;
        let mut cfg = EvolutionConfig::new(self.m, DtSchedule { dt0: s.dt0, growth: s.growth, t_end: s.t_end })
            .with_probes(&s.probe_times);
        cfg.record_every = s.record_every;
        cfg
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::for_grid(&build_grid(self.operator.n).expect("validated grid size"))
    }

    pub fn selected(&self, check: &str) -> bool {
        self.checks.select.iter().any(|c| c == "all" || c == check)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
