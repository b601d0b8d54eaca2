//! Cohort-level report tables: alignment of simulated elections with their
//! human counterparts, optimal-leader gap decomposition, self-nomination
//! gender gaps, and gender composition per election stage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{GenderCategory, GroupRecord};

use super::hypothesis::{binomial_test_exact, welch_t_test, Alternative, TestMethod, TestResult};
use super::StatError;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("group {0} is missing required artifacts ({1})")]
    IncompleteGroup(String, &'static str),
    #[error("cohorts do not share group ids (first mismatch: {0})")]
    UnmatchedGroups(String),
    #[error(transparent)]
    Stat(#[from] StatError),
}

/// Welch test that tolerates the degenerate all-constant case: with zero
/// variance on both sides and equal means there is no evidence of a
/// difference, so t=0, p=1. Constant samples with different means remain an
/// error.
fn welch_or_degenerate(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<TestResult, StatError> {
    match welch_t_test(a, b, alternative) {
        Err(StatError::ZeroVariance) => {
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            if mean(a) == mean(b) {
                Ok(TestResult {
                    statistic: 0.0,
                    degrees_of_freedom: None,
                    p_value: 1.0,
                    method: TestMethod::WelchT,
                    alternative,
                })
            } else {
                Err(StatError::ZeroVariance)
            }
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentStratum {
    pub label: String,
    pub n_groups: usize,
    pub exact_matches: usize,
    pub gender_matches: usize,
    pub exact_rate: f64,
    pub gender_rate: f64,
    /// Exact-match rate tested against the random baseline; absent for an
    /// empty stratum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_test: Option<TestResult>,
}

/// Alignment of a simulated cohort with its matched human cohort, overall
/// and stratified by the gender of the human-elected leader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub baseline: f64,
    pub overall: AlignmentStratum,
    pub male_leader: AlignmentStratum,
    pub non_male_leader: AlignmentStratum,
}

fn stratum(
    label: &str,
    pairs: &[(&GroupRecord, &GroupRecord)],
    baseline: f64,
) -> Result<AlignmentStratum, AnalyticsError> {
    let n = pairs.len();
    let mut exact = 0;
    let mut gender = 0;
    for (human, sim) in pairs {
        let h_elected = &human.election.as_ref().expect("checked").elected;
        let s_elected = &sim.election.as_ref().expect("checked").elected;
        let is_exact = h_elected == s_elected;
        if is_exact {
            exact += 1;
        }
        if is_exact || human.elected_gender() == sim.elected_gender() {
            gender += 1;
        }
    }
    let exact_test = if n > 0 {
        Some(binomial_test_exact(
            exact as u64,
            n as u64,
            baseline,
            Alternative::Greater,
        )?)
    } else {
        None
    };
    Ok(AlignmentStratum {
        label: label.to_string(),
        n_groups: n,
        exact_matches: exact,
        gender_matches: gender,
        exact_rate: if n > 0 { exact as f64 / n as f64 } else { 0.0 },
        gender_rate: if n > 0 { gender as f64 / n as f64 } else { 0.0 },
        exact_test,
    })
}

/// Compares elected leaders group-by-group between a human cohort and a
/// matched simulated cohort. Cohorts must cover the same group ids; both
/// must carry elections.
pub fn alignment_report(
    human: &[GroupRecord],
    simulated: &[GroupRecord],
    baseline: f64,
) -> Result<AlignmentReport, AnalyticsError> {
    if human.is_empty() {
        return Err(AnalyticsError::EmptyCohort);
    }
    let sim_by_id: BTreeMap<&str, &GroupRecord> = simulated
        .iter()
        .map(|g| (g.group_id.as_str(), g))
        .collect();
    if simulated.len() != human.len() {
        let first = human
            .iter()
            .map(|g| g.group_id.as_str())
            .find(|id| !sim_by_id.contains_key(id))
            .unwrap_or("<extra simulated group>");
        return Err(AnalyticsError::UnmatchedGroups(first.to_string()));
    }

    let mut pairs = Vec::with_capacity(human.len());
    for h in human {
        let s = sim_by_id
            .get(h.group_id.as_str())
            .ok_or_else(|| AnalyticsError::UnmatchedGroups(h.group_id.clone()))?;
        for (g, what) in [(h, "human"), (*s, "simulated")] {
            if g.election.is_none() {
                return Err(AnalyticsError::IncompleteGroup(
                    format!("{} ({what})", g.group_id),
                    "election",
                ));
            }
        }
        pairs.push((h, *s));
    }

    let male: Vec<_> = pairs
        .iter()
        .copied()
        .filter(|(h, _)| h.elected_gender() == Some(GenderCategory::Male))
        .collect();
    let non_male: Vec<_> = pairs
        .iter()
        .copied()
        .filter(|(h, _)| h.elected_gender() == Some(GenderCategory::NonMale))
        .collect();

    Ok(AlignmentReport {
        baseline,
        overall: stratum("overall", &pairs, baseline)?,
        male_leader: stratum("human_leader_male", &male, baseline)?,
        non_male_leader: stratum("human_leader_non_male", &non_male, baseline)?,
    })
}

/// Welch comparisons of one cohort's per-group normalized gaps against a
/// reference cohort's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTests {
    pub self_excl: TestResult,
    pub peer: TestResult,
    pub total: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub cohort: String,
    pub n_groups: usize,
    /// Means of the per-group normalized gap components.
    pub mean_self: f64,
    pub mean_peer: f64,
    pub mean_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tests_vs_reference: Option<GapTests>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub rows: Vec<GapRow>,
}

/// Per-group normalized (self, peer, total) gap vectors.
type GapVectors = (Vec<f64>, Vec<f64>, Vec<f64>);

fn gap_vectors(cohort: &[GroupRecord]) -> Result<GapVectors, AnalyticsError> {
    let mut selfs = Vec::with_capacity(cohort.len());
    let mut peers = Vec::with_capacity(cohort.len());
    let mut totals = Vec::with_capacity(cohort.len());
    for g in cohort {
        let gap = g
            .gap
            .as_ref()
            .ok_or_else(|| AnalyticsError::IncompleteGroup(g.group_id.clone(), "gap"))?;
        selfs.push(gap.normalized_self);
        peers.push(gap.normalized_peer);
        totals.push(gap.normalized_total);
    }
    Ok((selfs, peers, totals))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean normalized gap decomposition for a cohort, with Welch tests against
/// a reference cohort when one is supplied. The reference row (tests absent)
/// comes first.
pub fn gap_table(
    target: (&str, &[GroupRecord]),
    reference: Option<(&str, &[GroupRecord])>,
) -> Result<GapTable, AnalyticsError> {
    let (target_label, target_groups) = target;
    if target_groups.is_empty() {
        return Err(AnalyticsError::EmptyCohort);
    }
    let (t_self, t_peer, t_total) = gap_vectors(target_groups)?;

    let mut rows = Vec::new();
    let mut tests = None;
    if let Some((ref_label, ref_groups)) = reference {
        if ref_groups.is_empty() {
            return Err(AnalyticsError::EmptyCohort);
        }
        let (r_self, r_peer, r_total) = gap_vectors(ref_groups)?;
        rows.push(GapRow {
            cohort: ref_label.to_string(),
            n_groups: ref_groups.len(),
            mean_self: mean(&r_self),
            mean_peer: mean(&r_peer),
            mean_total: mean(&r_total),
            tests_vs_reference: None,
        });
        tests = Some(GapTests {
            self_excl: welch_or_degenerate(&t_self, &r_self, Alternative::TwoSided)?,
            peer: welch_or_degenerate(&t_peer, &r_peer, Alternative::TwoSided)?,
            total: welch_or_degenerate(&t_total, &r_total, Alternative::TwoSided)?,
        });
    }

    rows.push(GapRow {
        cohort: target_label.to_string(),
        n_groups: target_groups.len(),
        mean_self: mean(&t_self),
        mean_peer: mean(&t_peer),
        mean_total: mean(&t_total),
        tests_vs_reference: tests,
    });
    Ok(GapTable { rows })
}

/// Election stages a qualifier set can be read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Optimal,
    Candidates,
    Elected,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Optimal => "optimal",
            StageKind::Candidates => "candidates",
            StageKind::Elected => "elected",
        }
    }
}

/// Gender composition of one stage's qualifier sets across a cohort.
///
/// `mixed_fraction` is the share of groups whose qualifiers span both
/// gender categories. `male_fraction` is male-only groups over all
/// single-gender groups; it is absent when every group is mixed. Raw counts
/// are attached so either ratio convention can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRatioRow {
    pub stage: StageKind,
    pub n_groups: usize,
    pub mixed_count: usize,
    pub male_only_count: usize,
    pub non_male_only_count: usize,
    pub mixed_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub male_fraction: Option<f64>,
}

/// Gender composition of the optimal set, the candidate set, and the
/// elected leader, per group, aggregated over the cohort.
pub fn stage_ratio_table(cohort: &[GroupRecord]) -> Result<Vec<StageRatioRow>, AnalyticsError> {
    if cohort.is_empty() {
        return Err(AnalyticsError::EmptyCohort);
    }
    let mut rows = Vec::new();
    for stage in [StageKind::Optimal, StageKind::Candidates, StageKind::Elected] {
        let mut mixed = 0;
        let mut male_only = 0;
        let mut non_male_only = 0;
        for g in cohort {
            let election = g
                .election
                .as_ref()
                .ok_or_else(|| AnalyticsError::IncompleteGroup(g.group_id.clone(), "election"))?;
            let qualifier_ids: Vec<&crate::election::ParticipantId> = match stage {
                StageKind::Optimal => g
                    .gap
                    .as_ref()
                    .ok_or_else(|| AnalyticsError::IncompleteGroup(g.group_id.clone(), "gap"))?
                    .optimal_set
                    .iter()
                    .collect(),
                StageKind::Candidates => election.candidates.members().iter().collect(),
                StageKind::Elected => vec![&election.elected],
            };
            let mut has_male = false;
            let mut has_non_male = false;
            for id in qualifier_ids {
                match g.member(id).map(|m| m.gender_category()) {
                    Some(GenderCategory::Male) => has_male = true,
                    Some(GenderCategory::NonMale) => has_non_male = true,
                    None => {
                        return Err(AnalyticsError::IncompleteGroup(
                            g.group_id.clone(),
                            "qualifier is not a member",
                        ))
                    }
                }
            }
            match (has_male, has_non_male) {
                (true, true) => mixed += 1,
                (true, false) => male_only += 1,
                (false, true) => non_male_only += 1,
                (false, false) => unreachable!("qualifier sets are non-empty"),
            }
        }
        let single = male_only + non_male_only;
        rows.push(StageRatioRow {
            stage,
            n_groups: cohort.len(),
            mixed_count: mixed,
            male_only_count: male_only,
            non_male_only_count: non_male_only,
            mixed_fraction: mixed as f64 / cohort.len() as f64,
            male_fraction: (single > 0).then(|| male_only as f64 / single as f64),
        });
    }
    Ok(rows)
}

/// Self-nomination score moments by gender with a Welch test on the gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominationRow {
    pub cohort: String,
    pub male_n: usize,
    pub male_mean: f64,
    pub male_sd: f64,
    pub non_male_n: usize,
    pub non_male_mean: f64,
    pub non_male_sd: f64,
    /// male mean minus non-male mean.
    pub gap: f64,
    pub test: TestResult,
}

pub fn nomination_table(label: &str, cohort: &[GroupRecord]) -> Result<NominationRow, AnalyticsError> {
    let mut male = Vec::new();
    let mut non_male = Vec::new();
    for g in cohort {
        for m in &g.members {
            let w = m.nomination.ok_or_else(|| {
                AnalyticsError::IncompleteGroup(g.group_id.clone(), "nomination")
            })?;
            match m.gender_category() {
                GenderCategory::Male => male.push(w),
                GenderCategory::NonMale => non_male.push(w),
            }
        }
    }
    if male.is_empty() || non_male.is_empty() {
        return Err(AnalyticsError::EmptyCohort);
    }
    let sd = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let test = welch_or_degenerate(&male, &non_male, Alternative::TwoSided)?;
    Ok(NominationRow {
        cohort: label.to_string(),
        male_n: male.len(),
        male_mean: mean(&male),
        male_sd: sd(&male),
        non_male_n: non_male.len(),
        non_male_mean: mean(&non_male),
        non_male_sd: sd(&non_male),
        gap: mean(&male) - mean(&non_male),
        test,
    })
}
