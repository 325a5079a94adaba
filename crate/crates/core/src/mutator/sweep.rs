//! Single-fault sweeps over an operator grid and their pairwise combination.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kill::{run_accuracies, verdict, KillCriteria, KillVerdict, TargetData};
use super::ops::{apply_operator, Category, MutationOp};
use crate::error::{Error, Result};
use crate::nn::ModelConfig;
use crate::rng::SeedTree;

/// Concrete operator parameterizations to try on every seed model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorGrid {
    pub operators: Vec<MutationOp>,
}

impl OperatorGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Grid restricted to the given categories.
    pub fn only(&self, categories: &[Category]) -> OperatorGrid {
        OperatorGrid {
            operators: self
                .operators
                .iter()
                .filter(|op| categories.contains(&op.category()))
                .cloned()
                .collect(),
        }
    }
}

/// Killed single-fault operators grouped by category.
pub type KilledReport = BTreeMap<Category, Vec<MutationOp>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFaultResult {
    pub op: MutationOp,
    pub verdict: KillVerdict,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Test accuracies of the unmutated seed, one per kill-check run.
    pub baseline: Vec<f64>,
    /// Every applicable grid point with its verdict, in grid order.
    pub results: Vec<SingleFaultResult>,
    /// Grid points that could not be applied, with the reason.
    pub skipped: Vec<(MutationOp, String)>,
    pub report: KilledReport,
}

impl SweepOutcome {
    pub fn killed(&self) -> impl Iterator<Item = &SingleFaultResult> {
        self.results.iter().filter(|r| r.verdict.killed)
    }
}

/// Mean test accuracy of the seed, refusing seeds below `floor`.
pub fn check_floor(id: &str, baseline: &[f64], floor: f64) -> Result<f64> {
    let accuracy = baseline.iter().sum::<f64>() / baseline.len().max(1) as f64;
    if accuracy < floor {
        return Err(Error::BelowAccuracyFloor { id: id.to_string(), accuracy, floor });
    }
    Ok(accuracy)
}

/// Applies and kill-checks every grid point against `model`. Grid points
/// run in parallel on the current rayon pool; results keep grid order.
pub fn single_fault_sweep(
    id: &str,
    model: &ModelConfig,
    grid: &OperatorGrid,
    data: &TargetData,
    criteria: &KillCriteria,
    floor: f64,
    seed: SeedTree,
) -> Result<SweepOutcome> {
    criteria.validate()?;
    let baseline = run_accuracies(model, data, criteria.runs, seed)?;
    check_floor(id, &baseline, floor)?;
    let outcomes: Vec<Result<std::result::Result<SingleFaultResult, String>>> = grid
        .operators
        .par_iter()
        .map(|op| {
            let mutant = match apply_operator(model, op) {
                Ok(m) => m,
                Err(e) => return Ok(Err(e.to_string())),
            };
            if let Err(e) = mutant.train.validate(data.train.len()) {
                return Ok(Err(e.to_string()));
            }
            let accs = run_accuracies(&mutant, data, criteria.runs, seed)?;
            Ok(Ok(SingleFaultResult { op: op.clone(), verdict: verdict(&baseline, &accs, criteria) }))
        })
        .collect();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for (op, outcome) in grid.operators.iter().zip(outcomes) {
        match outcome? {
            Ok(r) => results.push(r),
            Err(reason) => {
                log::info!("{id}: skipping {op}: {reason}");
                skipped.push((op.clone(), reason));
            }
        }
    }
    let mut report = KilledReport::new();
    for r in results.iter().filter(|r| r.verdict.killed) {
        report.entry(r.op.category()).or_default().push(r.op.clone());
    }
    Ok(SweepOutcome { baseline, results, skipped, report })
}

/// Every unordered pair of distinct categories contributes the Cartesian
/// product of their killed operators. Pairs come out in ascending category
/// order, each as `[op from lower category, op from higher category]`.
pub fn inject_multiple(report: &KilledReport) -> Vec<Vec<MutationOp>> {
    let groups: Vec<&Vec<MutationOp>> = report.values().collect();
    let mut out = Vec::new();
    for (i, g1) in groups.iter().enumerate() {
        for g2 in &groups[i + 1..] {
            for a in g1.iter() {
                for b in g2.iter() {
                    out.push(vec![a.clone(), b.clone()]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LossKind, OptimizerKind};

    #[test]
    fn loss_times_optimizer_pairs() {
        let mut report = KilledReport::new();
        report.insert(Category::ChangeLossFunction, vec![MutationOp::ChangeLossFunction { loss: LossKind::Mse }]);
        report.insert(
            Category::ChangeOptimisationFunction,
            vec![
                MutationOp::ChangeOptimisationFunction { optimizer: OptimizerKind::Sgd },
                MutationOp::ChangeOptimisationFunction { optimizer: OptimizerKind::Rmsprop },
            ],
        );
        let pairs = inject_multiple(&report);
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert_eq!(super::super::ops::labels_of(p), vec![1, 7]);
        }
    }

    #[test]
    fn empty_groups_contribute_nothing() {
        let mut report = KilledReport::new();
        report.insert(Category::ChangeLossFunction, vec![MutationOp::ChangeLossFunction { loss: LossKind::Mse }]);
        report.insert(Category::ChangeBatchSize, vec![]);
        assert!(inject_multiple(&report).is_empty());
    }
}
