//! Experiment configuration and parameter resolution.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CounterexampleScan,
    MaximalScan,
    BourgainScan,
    RmCheck,
    GridLemmaCheck,
    PipelineRun,
    PacketsValidate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CounterexampleScan,
        Experiment::MaximalScan,
        Experiment::BourgainScan,
        Experiment::RmCheck,
        Experiment::GridLemmaCheck,
        Experiment::PipelineRun,
        Experiment::PacketsValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CounterexampleScan => "counterexample-scan",
            Experiment::MaximalScan => "maximal-scan",
            Experiment::BourgainScan => "bourgain-scan",
            Experiment::RmCheck => "rm-check",
            Experiment::GridLemmaCheck => "grid-lemma-check",
            Experiment::PipelineRun => "pipeline-run",
            Experiment::PacketsValidate => "packets-validate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| LabError::UnknownExperiment(s.to_string()))
    }
}

/// Optional experiment parameters; missing values take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "N_list", skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<u32>,
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<usize>>,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Samples per unit length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// Kernel name or `y,k` CSV path for `maximal-scan`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Tile system file for `pipeline-run`; the synthetic corpus otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig { experiment, params: Params::default(), seed, output: default_output() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks parameter consistency and fills `p`, `q` or `r` from
    /// `1/p + 1/q = 1/r` when exactly one is missing. Returns log lines.
    pub fn resolve(&mut self) -> Result<Vec<String>> {
        let mut log = Vec::new();
        let pr = &mut self.params;
        for (name, v) in [("r", pr.r), ("p", pr.p), ("q", pr.q)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(LabError::invalid("exponent", format!("{name} = {v} must be positive")));
                }
            }
        }
        match (pr.p, pr.q, pr.r) {
            (Some(p), Some(q), Some(r)) => {
                if ((1.0 / p + 1.0 / q) - 1.0 / r).abs() > 1e-9 {
                    return Err(LabError::invalid("p,q,r", format!("1/{p} + 1/{q} != 1/{r}")));
                }
            }
            (Some(p), None, Some(r)) => {
                let q = hoelder_partner(p, r)?;
                log.push(format!("q inferred from 1/p + 1/q = 1/r: q = {q}"));
                pr.q = Some(q);
            }
            (None, Some(q), Some(r)) => {
                let p = hoelder_partner(q, r)?;
                log.push(format!("p inferred from 1/p + 1/q = 1/r: p = {p}"));
                pr.p = Some(p);
            }
            (Some(p), Some(q), None) => {
                let r = 1.0 / (1.0 / p + 1.0 / q);
                log.push(format!("r inferred from 1/p + 1/q = 1/r: r = {r}"));
                pr.r = Some(r);
            }
            _ => {}
        }
        if pr.trials == Some(0) {
            return Err(LabError::invalid("trials", "must be at least 1"));
        }
        if let Some((a, b)) = pr.window {
            if !(a < b) {
                return Err(LabError::invalid("window", format!("empty window ({a}, {b})")));
            }
        }
        if pr.resolution == Some(0) {
            return Err(LabError::invalid("resolution", "must be positive"));
        }
        if let Some(a) = pr.a {
            if !(a >= 1.0) {
                return Err(LabError::invalid("A", "must be at least 1"));
            }
        }
        Ok(log)
    }
}

fn hoelder_partner(known: f64, r: f64) -> Result<f64> {
    let inv = 1.0 / r - 1.0 / known;
    if !(inv > 0.0) {
        return Err(LabError::invalid("p,q,r", format!("no positive exponent with 1/{known} + 1/x = 1/{r}")));
    }
    Ok(1.0 / inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.name()));
        }
        assert!(matches!("nope".parse::<Experiment>(), Err(LabError::UnknownExperiment(_))));
    }

    #[test]
    fn missing_q_is_inferred_and_logged() {
        let mut c = ExperimentConfig::new(Experiment::CounterexampleScan, 1);
        c.params.p = Some(1.5);
        c.params.r = Some(0.6);
        let log = c.resolve().unwrap();
        assert!((c.params.q.unwrap() - 1.0).abs() < 1e-12);
        assert!(log[0].starts_with("q inferred"));
    }

    #[test]
    fn inconsistent_exponents_rejected() {
        let mut c = ExperimentConfig::new(Experiment::CounterexampleScan, 1);
        c.params.p = Some(2.0);
        c.params.q = Some(3.0);
        c.params.r = Some(1.0);
        assert!(c.resolve().is_err());
        c.params.q = None;
        c.params.p = Some(0.5);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let mut c = ExperimentConfig::new(Experiment::RmCheck, 1);
        c.params.trials = Some(0);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn json_config() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "rm-check", "params": {"J": [4, 16]}, "seed": 9}"#).unwrap();
        assert_eq!(c.experiment, Experiment::RmCheck);
        assert_eq!(c.params.j, Some(vec![4, 16]));
        assert_eq!(c.output, PathBuf::from("out"));
        assert!(ExperimentConfig::from_json(r#"{"experiment": "rm-check", "params": {"bogus": 1}}"#).is_err());
    }
}
