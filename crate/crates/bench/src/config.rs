use std::path::Path;

use kronsense::{KronDims, SolverConfig, Sparsity, SparsityModel};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// One recovery pipeline to run on every instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    /// Two-stage recovery with MMV-SBL, then SBL (MMV-SBL for Kronecker-supported models).
    TsrSbl,
    /// Two-stage recovery with simultaneous OMP at both stages.
    TsrOmp,
    /// Two-stage recovery with simultaneous OMP, then per-block HTP.
    TsrHtp,
    /// SBL on the materialized `H1 ⊗ H2`.
    Sbl,
    Omp,
    Htp,
    /// HiHTP on the materialized product. Levels default to the model's
    /// block sparsity times `overestimate` (rounded up, clamped to the layout).
    Hihtp {
        #[serde(default)]
        s1: Option<usize>,
        #[serde(default)]
        s2: Option<usize>,
        #[serde(default = "one")]
        overestimate: f64,
        #[serde(default)]
        label: Option<String>,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl AlgorithmSpec {
    pub fn name(&self) -> String {
        match self {
            AlgorithmSpec::TsrSbl => "tsr-sbl".into(),
            AlgorithmSpec::TsrOmp => "tsr-omp".into(),
            AlgorithmSpec::TsrHtp => "tsr-htp".into(),
            AlgorithmSpec::Sbl => "sbl".into(),
            AlgorithmSpec::Omp => "omp".into(),
            AlgorithmSpec::Htp => "htp".into(),
            AlgorithmSpec::Hihtp { label: Some(l), .. } => l.clone(),
            AlgorithmSpec::Hihtp { .. } => "hihtp".into(),
        }
    }

    /// Whether the pipeline works on the materialized Kronecker product.
    pub fn is_direct(&self) -> bool {
        !matches!(self, AlgorithmSpec::TsrSbl | AlgorithmSpec::TsrOmp | AlgorithmSpec::TsrHtp)
    }

    /// HiHTP levels used for `model`.
    pub fn hihtp_levels(&self, model: &SparsityModel) -> Option<(usize, usize)> {
        let AlgorithmSpec::Hihtp { s1, s2, overestimate, .. } = self else { return None };
        let (b1, b2) = model.block_sparsity_bounds();
        let scale = |b: usize| (b as f64 * overestimate).ceil() as usize;
        Some((
            s1.unwrap_or_else(|| scale(b1)).min(model.layout.n_blocks),
            s2.unwrap_or_else(|| scale(b2)).min(model.layout.block_len),
        ))
    }
}

/// Serde accepts stray keys next to the tag of a field-less variant; reject them here.
fn check_algorithm_keys(entry: &serde_json::Value) -> serde_json::Result<()> {
    use serde::de::Error as _;
    let Some(obj) = entry.as_object() else { return Ok(()) };
    let allowed: &[&str] = match obj.get("algo").and_then(|a| a.as_str()) {
        Some("hihtp") => &["algo", "s1", "s2", "overestimate", "label"],
        _ => &["algo"],
    };
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(serde_json::Error::custom(format!("unknown field `{k}` in algorithm entry"))),
        None => Ok(()),
    }
}

/// A Monte-Carlo experiment, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: KronDims,
    pub model: Sparsity,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub solver_cfg: SolverConfig,
    /// Hand SBL the true per-trial noise variance. When false the noise mode
    /// in `solver_cfg` is used as given.
    #[serde(default = "yes")]
    pub oracle_noise: bool,
    #[serde(default = "yes")]
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(algos) = value.get("algorithms").and_then(|a| a.as_array()) {
            for entry in algos {
                check_algorithm_keys(entry)?;
            }
        }
        serde_json::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let cfg = Self::from_json(&text).map_err(|source| BenchError::Json { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sparsity_model(&self) -> Result<SparsityModel> {
        Ok(SparsityModel::new(self.model, self.dims.layout())?)
    }

    pub fn validate(&self) -> Result<()> {
        KronDims::new(self.dims.m1, self.dims.n1, self.dims.m2, self.dims.n2)?;
        self.sparsity_model()?;
        self.solver_cfg.validate()?;
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        if self.snr_grid.is_empty() {
            return Err(BenchError::Config("snr_grid must not be empty".into()));
        }
        if let Some(bad) = self.snr_grid.iter().find(|v| v.is_nan()) {
            return Err(BenchError::Config(format!("SNR {bad} is not a number")));
        }
        if self.algorithms.is_empty() {
            return Err(BenchError::Config("no algorithms configured".into()));
        }
        let mut names: Vec<String> = self.algorithms.iter().map(AlgorithmSpec::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(BenchError::Config(format!("algorithm name {:?} is used twice", w[0])));
        }
        for spec in &self.algorithms {
            if let AlgorithmSpec::Hihtp { overestimate, .. } = spec {
                if !(*overestimate > 0.0) || !overestimate.is_finite() {
                    return Err(BenchError::Config(format!("hihtp overestimate {overestimate}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "dims": {"m1": 6, "n1": 8, "m2": 6, "n2": 8},
        "model": {"kind": "hierarchical", "s1": 2, "s2": 2},
        "snr_grid": [0, 10],
        "trials": 3,
        "master_seed": 7,
        "algorithms": [{"algo": "tsr-sbl"}, {"algo": "hihtp", "overestimate": 1.5}]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.validate().unwrap();
        assert!(cfg.parallel && cfg.oracle_noise);
        assert_eq!(cfg.solver_cfg, SolverConfig::default());
        assert_eq!(cfg.algorithms[1].name(), "hihtp");
        let model = cfg.sparsity_model().unwrap();
        assert_eq!(cfg.algorithms[1].hihtp_levels(&model), Some((3, 3)));
        assert_eq!(cfg.algorithms[0].hihtp_levels(&model), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let extra = BASE.replacen("\"trials\"", "\"bogus\": 1, \"trials\"", 1);
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let bad_algo = BASE.replace("{\"algo\": \"tsr-sbl\"}", "{\"algo\": \"tsr-sbl\", \"x\": 1}");
        assert!(ExperimentConfig::from_json(&bad_algo).is_err());
    }

    #[test]
    fn invariants_are_checked() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.snr_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.model = Sparsity::Hierarchical { s1: 9, s2: 2 };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.algorithms.push(AlgorithmSpec::TsrSbl);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn levels_are_clamped_to_layout() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        let model = cfg.sparsity_model().unwrap();
        let spec = AlgorithmSpec::Hihtp { s1: None, s2: Some(20), overestimate: 10.0, label: None };
        assert_eq!(spec.hihtp_levels(&model), Some((8, 8)));
    }
}
