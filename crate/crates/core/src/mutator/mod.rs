//! Mutation operators, the statistical kill check and multi-fault
//! combination.

pub mod kill;
pub mod manifest;
pub mod ops;
pub mod sweep;

pub use kill::{final_accuracy, is_killed, run_accuracies, verdict, KillCriteria, KillVerdict, TargetData};
pub use manifest::{read_manifest, write_manifest, ManifestRow};
pub use ops::{
    apply_all, apply_operator, class_description, class_name, labels_of, Category, MutationOp,
    CORRECT_LABEL, NUM_CLASSES,
};
pub use sweep::{check_floor, inject_multiple, single_fault_sweep, KilledReport, OperatorGrid, SingleFaultResult, SweepOutcome};
