//! Statistical battery and report tables over cohorts: alignment rates
//! against a random baseline, self-nomination gaps, optimal-leader gap
//! decomposition, and election-stage gender ratios.

pub mod emit;
pub mod hypothesis;
pub mod special;
pub mod tables;

pub use emit::{emit_report, CohortMeta, EmitError, ReportBundle, ReportManifest};
pub use hypothesis::{
    binomial_test_exact, chi_square_test, chi_square_test_opts, welch_t_test, Alternative,
    TestMethod, TestResult,
};
pub use tables::{
    alignment_report, gap_table, nomination_table, stage_ratio_table, AlignmentReport,
    AlignmentStratum, AnalyticsError, GapRow, GapTable, GapTests, NominationRow, StageKind,
    StageRatioRow,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("sample too small: need at least {needed}, got {got}")]
    UndersizedSample { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("contingency table has a zero marginal")]
    ZeroMarginal,
}
