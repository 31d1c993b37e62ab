//! Versioned JSON run configurations.
//!
//! Every file carries `"version": 1` and unknown keys are rejected, so a typo
//! fails before anything runs.

use std::path::Path;

use ccwm_core::optimizer::SolveOptions;
use ccwm_core::simulator::ExperimentConfig;
use ccwm_core::ProbVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliResult};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable that replaces every seed in a loaded config.
pub const SEED_ENV: &str = "CCWM_SEED";

/// Input of `one-shot` and `roc`: a list of simulator runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    pub experiments: Vec<ExperimentConfig>,
}

fn default_gamma() -> f64 {
    1.0
}

/// Input of `tradeoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffFile {
    pub version: u32,
    pub q: ProbVector,
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub solver: SolveOptions,
}

/// Parameters of `maxmin-curve` as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveParams {
    pub k: usize,
    pub m: usize,
    pub lambda_grid: Vec<f64>,
}

pub trait Versioned {
    fn version(&self) -> u32;
    fn validate(&self) -> CliResult<()>;
    fn override_seed(&mut self, seed: u64);
}

impl Versioned for ExperimentFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self) -> CliResult<()> {
        if self.experiments.is_empty() {
            return Err(invalid("config lists no experiments"));
        }
        for (i, e) in self.experiments.iter().enumerate() {
            e.validate()
                .map_err(|err| invalid(format!("experiment {i}: {err}")))?;
        }
        Ok(())
    }

    fn override_seed(&mut self, seed: u64) {
        for e in &mut self.experiments {
            e.seed = seed;
        }
    }
}

impl Versioned for TradeoffFile {
    fn version(&self) -> u32 {
        self.version
    }

    fn validate(&self) -> CliResult<()> {
        if self.alpha_grid.is_empty() {
            return Err(invalid("alpha_grid is empty"));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(invalid(format!("alpha {a} outside [0, 1]")));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        use ccwm_core::optimizer::{MAX_K, MAX_M};
        if !(2..=MAX_K).contains(&self.k) {
            return Err(invalid(format!("k must be in 2..={MAX_K}, got {}", self.k)));
        }
        if self.q.len() > MAX_M {
            return Err(invalid(format!("q has {} entries; at most {MAX_M} supported", self.q.len())));
        }
        Ok(())
    }

    fn override_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
    }
}

/// Reads `CCWM_SEED`, if set.
pub fn seed_override() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| invalid(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(invalid(format!("{SEED_ENV}: {e}"))),
    }
}

/// Parses, version-checks, applies the seed override and validates.
pub fn from_json<T: DeserializeOwned + Versioned>(text: &str, origin: &str) -> CliResult<T> {
    let mut cfg: T =
        serde_json::from_str(text).map_err(|e| invalid(format!("{origin}: {e}")))?;
    if cfg.version() != CONFIG_VERSION {
        return Err(invalid(format!(
            "{origin}: unsupported config version {} (expected {CONFIG_VERSION})",
            cfg.version()
        )));
    }
    if let Some(seed) = seed_override()? {
        cfg.override_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text, &path.display().to_string())
}

/// `"a:b:n"` (inclusive, `n` points) or a comma-separated list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || invalid(format!("malformed grid '{spec}'; use 'start:stop:count' or 'x1,x2,...'"));
    if let Some((range, count)) = spec.rsplit_once(':') {
        let (a, b) = range.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let n: usize = count.trim().parse().map_err(|_| bad())?;
        if n < 2 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    parse_list(spec)
}

pub fn parse_list<T: std::str::FromStr>(spec: &str) -> CliResult<Vec<T>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| invalid(format!("cannot parse '{}' in list '{spec}'", s.trim())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn version_and_unknown_keys() {
        let ok = r#"{"version":1,"experiments":[{"m":10,"k":2,"source":{"kind":"uniform"},"trials":5,"seed":1}]}"#;
        let cfg: ExperimentFile = from_json(ok, "t").unwrap();
        assert_eq!(cfg.experiments.len(), 1);
        let v2 = ok.replace("\"version\":1", "\"version\":2");
        assert!(from_json::<ExperimentFile>(&v2, "t").is_err());
        let extra = ok.replace("\"version\":1", "\"version\":1,\"x\":0");
        assert!(from_json::<ExperimentFile>(&extra, "t").is_err());
    }
}
