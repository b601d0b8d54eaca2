//! Batch simulator and analytics library for multi-stage group leader
//! elections: replay of recorded human cohorts, matched LLM-agent cohort
//! simulation under identity-visibility treatments, and the statistical
//! battery comparing them.

pub mod agent;
pub mod analytics;
pub mod election;
pub mod protocol;
pub mod seed;
pub mod synth;

pub use election::{
    borda_scores, leader_gap, optimal_leaders, pairwise_matrix, resolve_election,
    select_candidates, Ballot, CandidateSet, ElectionError, ElectionOutcome, GapReport,
    ParticipantId, SelfNomination, TaskScore, TieBreakRule, GROUP_SIZE,
};
pub use protocol::{
    Cohort, CohortHeader, CohortKind, GenderCategory, GroupRecord, ParticipantRecord, StageId,
    TaskKey, Treatment, SCHEMA_VERSION,
};
