//! Manufactured solutions, error norms and refinement studies.

mod cases;
mod norms;
mod sweep;

pub use cases::{builtin_cases, CaseKind, ManufacturedCase};
pub use norms::{error_norms, field_errors, h1_error, l2_error, lemma_norm_check, ErrorNorms, LemmaCheck};
pub use sweep::{
    convergence_sweep, guardrail_flags, robin_gap_study, solve_case, Coupling, LevelOutcome,
    ParameterRule, RobinGapTable, RobinRow, SweepConfig, SweepError, SweepResult, SweepRow,
    SWEEP_CSV_HEADER,
};
