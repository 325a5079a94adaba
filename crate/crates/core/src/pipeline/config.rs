//! Experiment configuration document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::seeds::{SeedModel, SeedRef};
use crate::error::{Error, Result};
use crate::localizer::{ClassifierSpec, FitOptions};
use crate::mutator::{KillCriteria, OperatorGrid};
use crate::probe::ProbeConfig;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Rows of every feature matrix; bundled seeds train this many epochs.
    pub epochs: usize,
    /// Layer slots of every feature matrix.
    pub max_layers: usize,
    /// Token sequence length.
    pub seq_len: usize,
    /// Train, validation and test fractions of the corpus.
    pub splits: [f64; 3],
    /// Minimum mean test accuracy a seed model must reach.
    pub accuracy_floor: f64,
    /// Fraction of each task's samples held out to measure target accuracy.
    pub target_test_fraction: f64,
    pub kill: KillCriteria,
    /// Instrumented runs of each unmutated seed added as correct records.
    pub correct_replicas: usize,
    /// Dual-fault candidates kill-checked per seed; all when absent.
    pub max_multi_per_seed: Option<usize>,
    /// Instrumented runs recorded per mutant, each with its own seed.
    pub trace_replicas: usize,
    pub seeds: Vec<SeedRef>,
    pub grid: OperatorGrid,
    pub probe: ProbeConfig,
    pub classifier: ClassifierSpec,
    pub fit: FitOptions,
    /// Classifier trainings averaged in a report.
    pub runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: DEFAULT_SEED,
            epochs: 20,
            max_layers: 4,
            seq_len: 48,
            splits: [0.70, 0.15, 0.15],
            accuracy_floor: 0.65,
            target_test_fraction: 0.3,
            kill: KillCriteria::default(),
            correct_replicas: 4,
            max_multi_per_seed: None,
            trace_replicas: 1,
            seeds: Vec::new(),
            grid: OperatorGrid::default(),
            probe: ProbeConfig::default(),
            classifier: ClassifierSpec::default(),
            fit: FitOptions::default(),
            runs: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let sum: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|r| !(0.0..=1.0).contains(r)) || (sum - 1.0).abs() > 1e-9 {
            return bad(format!("split ratios {:?} must be in [0, 1] and sum to 1", self.splits));
        }
        if self.epochs == 0 || self.max_layers == 0 || self.seq_len == 0 {
            return bad("epochs, max_layers and seq_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.target_test_fraction) || self.target_test_fraction == 0.0 {
            return bad(format!("target_test_fraction {} must be in (0, 1)", self.target_test_fraction));
        }
        if self.seeds.is_empty() {
            return bad("no seed models configured".into());
        }
        if self.runs == 0 || self.trace_replicas == 0 {
            return bad("runs and trace_replicas must be >= 1".into());
        }
        self.kill.validate()?;
        let seeds = self.resolve_seeds()?;
        let mut ids: Vec<&str> = seeds.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("seed id '{}' appears twice", w[0]));
        }
        Ok(())
    }

    pub fn resolve_seeds(&self) -> Result<Vec<SeedModel>> {
        self.seeds.iter().map(|s| s.resolve(self.epochs)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seeds":["blobs_softmax"]}"#, "test").unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.splits, [0.70, 0.15, 0.15]);
        assert_eq!(cfg.kill.runs, 5);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json(), "again").unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(ExperimentConfig::from_json(r#"{"seeds":["blobs_softmax"],"splits":[0.5,0.2,0.2]}"#, "t").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds":["nope"]}"#, "t").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds":["blobs_softmax"],"bogus":1}"#, "t").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seeds":["blobs_softmax","blobs_softmax"]}"#, "t").is_err());
    }
}
