//! Sweep configuration: defaults, TOML loading and the resolved echo written
//! into every output header.

use std::path::Path;

use dheac::analytics::{Accounting, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CANONICAL_M: [usize; 4] = [4, 8, 16, 32];
pub const CANONICAL_Q: [f64; 4] = [0.01, 0.05, 0.10, 0.15];
pub const CANONICAL_DEMAND: [f64; 4] = [0.10, 0.20, 0.40, 0.60];
pub const CANONICAL_SKEW: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Mc,
    Fairness,
    Qverify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Analytic => "analytic",
            Mode::Mc => "mc",
            Mode::Fairness => "fairness",
            Mode::Qverify => "qverify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chi {
    Optimistic,
    Conservative,
}

impl From<Chi> for Accounting {
    fn from(c: Chi) -> Self {
        match c {
            Chi::Optimistic => Accounting::Optimistic,
            Chi::Conservative => Accounting::Conservative,
        }
    }
}

/// Timing, loss-retry and margin constants (loss itself is a grid axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpec {
    pub max_attempts: u32,
    pub t_gen: f64,
    pub t_dist: f64,
    pub t_meas: f64,
    pub t_ctl: f64,
    pub rounds: f64,
    pub beta: f64,
}

impl Default for ParamSpec {
    fn default() -> Self {
        let p = ModelParams::default();
        ParamSpec {
            max_attempts: p.max_attempts,
            t_gen: p.t_gen,
            t_dist: p.t_dist,
            t_meas: p.t_meas,
            t_ctl: p.t_ctl,
            rounds: p.rounds,
            beta: p.beta,
        }
    }
}

impl ParamSpec {
    pub fn model(&self, loss: f64) -> ModelParams {
        ModelParams {
            loss,
            max_attempts: self.max_attempts,
            t_gen: self.t_gen,
            t_dist: self.t_dist,
            t_meas: self.t_meas,
            t_ctl: self.t_ctl,
            rounds: self.rounds,
            beta: self.beta,
        }
    }
}

/// A parameter grid and what to compute at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub m_values: Vec<usize>,
    pub q_values: Vec<f64>,
    pub demand_values: Vec<f64>,
    pub skew_values: Vec<f64>,
    /// Average QLAN size; total capacity is `capacity_per_qlan * m` unless
    /// `total_capacity` is set.
    pub capacity_per_qlan: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_capacity: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub chi: Vec<Chi>,
    pub params: ParamSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            m_values: CANONICAL_M.to_vec(),
            q_values: CANONICAL_Q.to_vec(),
            demand_values: CANONICAL_DEMAND.to_vec(),
            skew_values: CANONICAL_SKEW.to_vec(),
            capacity_per_qlan: 10,
            total_capacity: None,
            trials: 10_000,
            seed: 1,
            modes: vec![Mode::Analytic],
            chi: vec![Chi::Optimistic, Chi::Conservative],
            params: ParamSpec::default(),
        }
    }
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid grid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn total_for(&self, m: usize) -> usize {
        self.total_capacity.unwrap_or(self.capacity_per_qlan * m)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |msg: &str| Err(CliError::Usage(msg.to_owned()));
        if self.m_values.is_empty()
            || self.q_values.is_empty()
            || self.demand_values.is_empty()
            || self.skew_values.is_empty()
        {
            return usage("every grid axis needs at least one value");
        }
        if self.m_values.contains(&0) {
            return usage("m values must be >= 1");
        }
        if self.q_values.iter().any(|q| !(0.0..1.0).contains(q)) {
            return usage("q values must lie in [0, 1)");
        }
        if self.demand_values.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return usage("demand values must lie in (0, 1]");
        }
        if self.skew_values.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return usage("skew values must be finite and >= 0");
        }
        if self.modes.is_empty() {
            return usage("at least one mode is required");
        }
        if self.chi.is_empty() {
            return usage("at least one chi mode is required");
        }
        if self.modes.iter().any(|m| matches!(m, Mode::Mc | Mode::Fairness)) && self.trials == 0 {
            return usage("trials must be >= 1");
        }
        self.params
            .model(0.0)
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    /// The resolved configuration as TOML, for provenance comments.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep spec serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_canonical_grid() {
        let s = SweepSpec::default();
        assert_eq!(s.m_values, vec![4, 8, 16, 32]);
        assert_eq!(s.q_values, vec![0.01, 0.05, 0.10, 0.15]);
        assert_eq!(s.demand_values, vec![0.10, 0.20, 0.40, 0.60]);
        assert_eq!(s.skew_values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.params.max_attempts, 3);
        assert_eq!(s.params.beta, 0.10);
        assert_eq!(s.total_for(16), 160);
        s.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_partial_files() {
        let s = SweepSpec::default();
        assert_eq!(SweepSpec::from_toml(&s.to_toml()).unwrap(), s);

        let partial = SweepSpec::from_toml("m_values = [4]\nmodes = [\"mc\"]\n[params]\nt_ctl = 1.0\n").unwrap();
        assert_eq!(partial.m_values, vec![4]);
        assert_eq!(partial.modes, vec![Mode::Mc]);
        assert_eq!(partial.params.t_ctl, 1.0);
        assert_eq!(partial.params.t_gen, 2.0);
        assert_eq!(partial.q_values, CANONICAL_Q.to_vec());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(SweepSpec::from_toml("bogus = 1"), Err(CliError::Usage(_))));
        let bad = SweepSpec {
            q_values: vec![1.0],
            ..SweepSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = SweepSpec {
            demand_values: vec![0.0],
            ..SweepSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
