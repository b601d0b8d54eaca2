//! Cohort data model and protocol operations: treatment conditions, group
//! records and their invariants, stratified group formation, pseudonym
//! assignment, task scoring, payouts, and the five-stage session runner.

pub mod cohort;
pub mod session;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::election::{ElectionOutcome, GapReport, ParticipantId, GROUP_SIZE};
use crate::seed::derive_seed;

pub use cohort::{
    cohort_to_canonical_string, ingest_cohort, ingest_cohort_strict, write_cohort, Cohort,
    CohortHeader, CohortKind, GroupDiagnostic, IngestError, IngestReport, SCHEMA_VERSION,
};
pub use session::{
    run_session, ReplayResponder, SessionError, StageContext, StageOutput, StageResponder,
};

/// Marker placed in transcripts that were generated rather than recorded;
/// simulation refuses identity-conditioned treatments over such text unless
/// explicitly forced.
pub const SYNTHETIC_TRANSCRIPT_MARKER: &str = "[synthetic-transcript]";

/// Identity-visibility condition of a group.
///
/// `NoDemographics` is a counterfactual that only exists for simulated
/// cohorts; a recorded human group can never be identity-blind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Identified,
    Pseudonymous,
    NoDemographics,
}

impl Treatment {
    /// True for treatments built on pseudonymous data (aliases required).
    pub fn is_pseudonymous_derived(self) -> bool {
        matches!(self, Treatment::Pseudonymous | Treatment::NoDemographics)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::Identified => "identified",
            Treatment::Pseudonymous => "pseudonymous",
            Treatment::NoDemographics => "no_demographics",
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary gender stratification category used by the analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderCategory {
    Male,
    NonMale,
}

/// Self-created participant profile with visible demographic attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityProfile {
    #[serde(rename = "name")]
    pub display_name: String,
    pub avatar: String,
    pub pronouns: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl IdentityProfile {
    /// `NonMale` for every participant who did not select `he/him`
    /// pronouns.
    pub fn gender_category(&self) -> GenderCategory {
        if self.pronouns == "he/him" {
            GenderCategory::Male
        } else {
            GenderCategory::NonMale
        }
    }
}

/// Gender-neutral animal alias assigned under pseudonymity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pseudonym(pub String);

impl Pseudonym {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Post-task survey answers folded into agent personas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponses {
    pub survival_experience: String,
    pub leadership_experience: String,
    /// 0 = unwilling, 10 = fully willing.
    pub risk_willingness: u8,
    /// 1 = men are better at such tasks, 10 = women are better.
    pub gender_task_belief: u8,
    /// 1 = men are better leaders, 10 = women are better leaders.
    pub gender_leader_belief: u8,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// One message of a recorded group discussion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub speaker_alias: String,
    pub turn_index: u32,
    pub text: String,
}

/// A question id paired with an answer token. Used both for task keys and
/// for participants' submitted answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub id: String,
    pub answer: String,
}

/// Correct/total counts for one participant on the representative task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub correct: u32,
    pub max_items: u32,
}

/// Everything recorded about one participant (human) or produced for one
/// agent. Stage outputs are optional until the corresponding stage has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: ParticipantId,
    pub profile: IdentityProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudonym: Option<Pseudonym>,
    pub survey: SurveyResponses,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nomination: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ballot: Option<Vec<ParticipantId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_answers: Option<Vec<AnswerEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreEntry>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ParticipantRecord {
    pub fn gender_category(&self) -> GenderCategory {
        self.profile.gender_category()
    }

    /// The identity other group members see under the given treatment:
    /// profile name when identified, alias otherwise.
    pub fn visible_alias(&self, treatment: Treatment) -> &str {
        if treatment == Treatment::Identified {
            &self.profile.display_name
        } else {
            self.pseudonym
                .as_ref()
                .map(Pseudonym::as_str)
                .unwrap_or(&self.profile.display_name)
        }
    }
}

/// A four-member group with its treatment, recorded discussion, and (once
/// complete) election and gap artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: String,
    pub treatment: Treatment,
    pub members: Vec<ParticipantRecord>,
    #[serde(default)]
    pub transcript: Vec<TranscriptMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub election: Option<ElectionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl GroupRecord {
    /// Member indexes in canonical (lexicographic id) order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.members.len()).collect();
        idx.sort_by(|&a, &b| self.members[a].id.cmp(&self.members[b].id));
        idx
    }

    pub fn member(&self, id: &ParticipantId) -> Option<&ParticipantRecord> {
        self.members.iter().find(|m| &m.id == id)
    }

    /// True once election, gap, and every member's stage outputs are
    /// present.
    pub fn is_complete(&self) -> bool {
        self.election.is_some()
            && self.gap.is_some()
            && self.members.iter().all(|m| {
                m.nomination.is_some() && m.ballot.is_some() && m.score.is_some()
            })
    }

    /// Gender category of the elected leader, if an election is recorded.
    pub fn elected_gender(&self) -> Option<GenderCategory> {
        let elected = &self.election.as_ref()?.elected;
        self.member(elected).map(ParticipantRecord::gender_category)
    }

    pub fn has_synthetic_transcript(&self) -> bool {
        self.transcript
            .iter()
            .any(|m| m.text.contains(SYNTHETIC_TRANSCRIPT_MARKER))
    }
}

/// Answer key for the representative task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskKey {
    pub items: Vec<AnswerEntry>,
    pub max_items: u32,
}

impl TaskKey {
    pub fn new(items: Vec<AnswerEntry>) -> Result<Self, ProtocolError> {
        let max_items = items.len() as u32;
        if max_items == 0 {
            return Err(ProtocolError::EmptyTaskKey);
        }
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.id.clone()) {
                return Err(ProtocolError::DuplicateQuestion(item.id.clone()));
            }
        }
        Ok(TaskKey { items, max_items })
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let key: TaskKey = serde_json::from_str(text)
            .map_err(|e| ProtocolError::KeyParse(e.to_string()))?;
        if key.max_items as usize != key.items.len() {
            return Err(ProtocolError::KeyParse(format!(
                "max_items={} does not match item count {}",
                key.max_items,
                key.items.len()
            )));
        }
        TaskKey::new(key.items)
    }

    pub fn question_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }
}

/// The five session stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageId {
    Profile,
    Discussion,
    SelfNomination,
    ElectionBallot,
    Task,
}

/// Fixed stage execution order.
pub const STAGE_ORDER: [StageId; 5] = [
    StageId::Profile,
    StageId::Discussion,
    StageId::SelfNomination,
    StageId::ElectionBallot,
    StageId::Task,
];

impl StageId {
    pub fn name(self) -> &'static str {
        match self {
            StageId::Profile => "PROFILE",
            StageId::Discussion => "DISCUSSION",
            StageId::SelfNomination => "SELF_NOMINATION",
            StageId::ElectionBallot => "ELECTION_BALLOT",
            StageId::Task => "TASK",
        }
    }

    pub fn index(self) -> usize {
        STAGE_ORDER.iter().position(|s| *s == self).expect("listed")
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("participant count {0} is not divisible by {GROUP_SIZE}")]
    NotGroupable(usize),
    #[error("cannot stratify: {male} male vs {non_male} non-male participants")]
    UnbalancedGenders { male: usize, non_male: usize },
    #[error("pseudonym roster needs at least {GROUP_SIZE} distinct aliases, got {0}")]
    RosterTooSmall(usize),
    #[error("treatment {0} does not use pseudonyms")]
    TreatmentMismatch(Treatment),
    #[error("task key has no items")]
    EmptyTaskKey,
    #[error("duplicate question id {0}")]
    DuplicateQuestion(String),
    #[error("unknown question id {0} in answers")]
    UnknownQuestion(String),
    #[error("task key parse failure: {0}")]
    KeyParse(String),
    #[error("group {0} is incomplete")]
    IncompleteGroup(String),
    #[error(transparent)]
    Election(#[from] crate::election::ElectionError),
}

/// A single invariant violation, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every structural invariant of a group record. Stage outputs may
/// be absent (a not-yet-run group is valid); whatever is present must be
/// consistent.
pub fn validate_group(group: &GroupRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_string(),
            message,
        });
    };

    if group.group_id.is_empty() {
        push("group_id", "must be non-empty".into());
    }
    if group.members.len() != GROUP_SIZE {
        push(
            "members",
            format!("expected {GROUP_SIZE} members, got {}", group.members.len()),
        );
        return out;
    }

    let mut ids = BTreeSet::new();
    for (i, m) in group.members.iter().enumerate() {
        if m.id.as_str().is_empty() {
            push(&format!("members[{i}].id"), "must be non-empty".into());
        }
        if !ids.insert(m.id.clone()) {
            push(&format!("members[{i}].id"), format!("duplicate id {}", m.id));
        }
    }

    let males = group
        .members
        .iter()
        .filter(|m| m.gender_category() == GenderCategory::Male)
        .count();
    if males != GROUP_SIZE / 2 {
        push(
            "members",
            format!("expected 2 male and 2 non-male members, got {males} male"),
        );
    }

    let mut aliases = BTreeSet::new();
    for (i, m) in group.members.iter().enumerate() {
        match (&m.pseudonym, group.treatment.is_pseudonymous_derived()) {
            (None, true) => push(
                &format!("members[{i}].pseudonym"),
                format!("required under treatment {}", group.treatment),
            ),
            (Some(_), false) => push(
                &format!("members[{i}].pseudonym"),
                format!("not allowed under treatment {}", group.treatment),
            ),
            (Some(p), true) => {
                if !aliases.insert(p.as_str().to_string()) {
                    push(
                        &format!("members[{i}].pseudonym"),
                        format!("duplicate alias {}", p.as_str()),
                    );
                }
            }
            (None, false) => {}
        }

        if m.survey.risk_willingness > 10 {
            push(
                &format!("members[{i}].survey.risk_willingness"),
                format!("{} outside 0..=10", m.survey.risk_willingness),
            );
        }
        for (name, v) in [
            ("gender_task_belief", m.survey.gender_task_belief),
            ("gender_leader_belief", m.survey.gender_leader_belief),
        ] {
            if !(1..=10).contains(&v) {
                push(
                    &format!("members[{i}].survey.{name}"),
                    format!("{v} outside 1..=10"),
                );
            }
        }

        if let Some(w) = m.nomination {
            if !(0.0..=10.0).contains(&w) || w.is_nan() {
                push(
                    &format!("members[{i}].nomination"),
                    format!("{w} outside [0, 10]"),
                );
            }
        }
        if let Some(ballot) = &m.ballot {
            for c in ballot {
                if !group.members.iter().any(|mm| &mm.id == c) {
                    push(
                        &format!("members[{i}].ballot"),
                        format!("ranked id {c} is not a group member"),
                    );
                }
            }
        }
        if let Some(score) = &m.score {
            if score.max_items == 0 || score.correct > score.max_items {
                push(
                    &format!("members[{i}].score"),
                    format!("{}/{} is not a valid score", score.correct, score.max_items),
                );
            }
        }
    }

    let score_maxes: BTreeSet<u32> = group
        .members
        .iter()
        .filter_map(|m| m.score.as_ref().map(|s| s.max_items))
        .collect();
    if score_maxes.len() > 1 {
        push("members", "task scores disagree on max_items".into());
    }

    let mut last_turn: Option<u32> = None;
    for (j, msg) in group.transcript.iter().enumerate() {
        if let Some(prev) = last_turn {
            if msg.turn_index <= prev {
                push(
                    &format!("transcript[{j}].turn_index"),
                    format!("{} does not increase past {prev}", msg.turn_index),
                );
            }
        }
        last_turn = Some(msg.turn_index);
        let resolves = group
            .members
            .iter()
            .any(|m| m.visible_alias(group.treatment) == msg.speaker_alias);
        if !resolves {
            push(
                &format!("transcript[{j}].speaker_alias"),
                format!("{} is not a visible member identity", msg.speaker_alias),
            );
        }
    }

    if let Some(election) = &group.election {
        for c in election.candidates.members() {
            if !group.members.iter().any(|m| &m.id == c) {
                push("election.candidates", format!("{c} is not a group member"));
            }
        }
        if !election.candidates.contains(&election.elected) {
            push(
                "election.elected",
                format!("{} is not in the candidate set", election.elected),
            );
        }
    }

    if let Some(gap) = &group.gap {
        if gap.delta_total != gap.delta_self + gap.delta_peer {
            push(
                "gap",
                format!(
                    "delta_total {} != delta_self {} + delta_peer {}",
                    gap.delta_total, gap.delta_self, gap.delta_peer
                ),
            );
        }
        if gap.delta_self != 0 && gap.delta_peer != 0 {
            push("gap", "both decomposition components are nonzero".into());
        }
    }

    out
}

/// Forms 4-member groups with the mandatory 2 male / 2 non-male
/// composition. Assignment is a seeded shuffle within each gender, so the
/// same seed always reproduces the same grouping.
pub fn stratify_groups(
    participants: Vec<ParticipantRecord>,
    seed: u64,
) -> Result<Vec<Vec<ParticipantRecord>>, ProtocolError> {
    if participants.is_empty() || !participants.len().is_multiple_of(GROUP_SIZE) {
        return Err(ProtocolError::NotGroupable(participants.len()));
    }
    let (mut males, mut non_males): (Vec<_>, Vec<_>) = participants
        .into_iter()
        .partition(|p| p.gender_category() == GenderCategory::Male);
    if males.len() != non_males.len() {
        return Err(ProtocolError::UnbalancedGenders {
            male: males.len(),
            non_male: non_males.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "stratify"));
    males.shuffle(&mut rng);
    non_males.shuffle(&mut rng);

    let mut groups = Vec::with_capacity(males.len() / 2);
    while !males.is_empty() {
        let mut group = vec![
            males.pop().expect("checked"),
            males.pop().expect("checked"),
            non_males.pop().expect("checked"),
            non_males.pop().expect("checked"),
        ];
        group.sort_by(|a, b| a.id.cmp(&b.id));
        groups.push(group);
    }
    Ok(groups)
}

/// Assigns four distinct aliases from the roster to the group members (in
/// canonical order), deterministically for a given seed.
pub fn assign_pseudonyms(
    group: &GroupRecord,
    roster: &[String],
    seed: u64,
) -> Result<GroupRecord, ProtocolError> {
    if !group.treatment.is_pseudonymous_derived() {
        return Err(ProtocolError::TreatmentMismatch(group.treatment));
    }
    let distinct: BTreeSet<&String> = roster.iter().collect();
    if distinct.len() < GROUP_SIZE {
        return Err(ProtocolError::RosterTooSmall(distinct.len()));
    }

    let mut indices: Vec<usize> = (0..roster.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("pseudonyms/{}", group.group_id)));
    indices.shuffle(&mut rng);

    let mut out = group.clone();
    let mut taken = BTreeSet::new();
    let order = out.canonical_order();
    let mut picks = indices.into_iter().filter_map(|i| {
        let alias = roster[i].clone();
        taken.insert(alias.clone()).then_some(alias)
    });
    for idx in order {
        out.members[idx].pseudonym = Some(Pseudonym(picks.next().expect("roster checked")));
    }
    Ok(out)
}

/// Scores submitted answers against the key: exact matches count, missing
/// answers count as incorrect, unknown question ids are an error.
pub fn score_task(
    participant: &ParticipantId,
    answers: &[AnswerEntry],
    key: &TaskKey,
) -> Result<crate::election::TaskScore, ProtocolError> {
    let known: BTreeSet<&str> = key.items.iter().map(|i| i.id.as_str()).collect();
    for a in answers {
        if !known.contains(a.id.as_str()) {
            return Err(ProtocolError::UnknownQuestion(a.id.clone()));
        }
    }
    let correct = key
        .items
        .iter()
        .filter(|item| {
            answers
                .iter()
                .any(|a| a.id == item.id && a.answer == item.answer)
        })
        .count() as u32;
    Ok(crate::election::TaskScore::new(
        participant.clone(),
        correct,
        key.max_items,
    )?)
}

/// Per-member payout in integer cents: everyone receives the base amount
/// plus a bonus scaled by the elected leader's task score.
pub fn payout_preview(
    group: &GroupRecord,
    base_cents: u64,
    bonus_max_cents: u64,
) -> Result<Vec<(ParticipantId, u64)>, ProtocolError> {
    if !group.is_complete() {
        return Err(ProtocolError::IncompleteGroup(group.group_id.clone()));
    }
    let elected = &group.election.as_ref().expect("complete").elected;
    let score = group
        .member(elected)
        .and_then(|m| m.score)
        .expect("complete");
    let bonus = (bonus_max_cents as f64 * f64::from(score.correct) / f64::from(score.max_items))
        .round() as u64;
    Ok(group
        .members
        .iter()
        .map(|m| (m.id.clone(), base_cents + bonus))
        .collect())
}

#[cfg(test)]
pub(crate) mod fixtures;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fixtures::{basic_group, make_participant};

    #[test]
    fn gender_category_follows_pronouns() {
        let p = make_participant("p1", "Alex", "he/him");
        assert_eq!(p.gender_category(), GenderCategory::Male);
        for pronouns in ["she/her", "they/them", "xe/xem"] {
            let p = make_participant("p1", "Alex", pronouns);
            assert_eq!(p.gender_category(), GenderCategory::NonMale);
        }
    }

    #[test]
    fn validate_accepts_basic_group() {
        let group = basic_group("g1", Treatment::Identified);
        assert!(validate_group(&group).is_empty());
    }

    #[test]
    fn validate_rejects_three_members() {
        let mut group = basic_group("g1", Treatment::Identified);
        group.members.pop();
        let violations = validate_group(&group);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "members");
    }

    #[test]
    fn validate_rejects_out_of_range_nomination() {
        let mut group = basic_group("g1", Treatment::Identified);
        group.members[2].nomination = Some(12.0);
        let violations = validate_group(&group);
        assert!(violations
            .iter()
            .any(|v| v.field == "members[2].nomination"));
    }

    #[test]
    fn validate_rejects_unbalanced_genders() {
        let mut group = basic_group("g1", Treatment::Identified);
        group.members[0].profile.pronouns = "she/her".to_string();
        assert!(validate_group(&group)
            .iter()
            .any(|v| v.field == "members" && v.message.contains("male")));
    }

    #[test]
    fn validate_pseudonym_presence_matches_treatment() {
        let mut group = basic_group("g1", Treatment::Pseudonymous);
        group.members[1].pseudonym = None;
        assert!(validate_group(&group)
            .iter()
            .any(|v| v.field == "members[1].pseudonym"));

        let mut group = basic_group("g1", Treatment::Identified);
        group.members[0].pseudonym = Some(Pseudonym("Bear".into()));
        assert!(validate_group(&group)
            .iter()
            .any(|v| v.field == "members[0].pseudonym"));
    }

    #[test]
    fn stratify_two_groups() {
        let mut people = Vec::new();
        for i in 0..4 {
            people.push(make_participant(&format!("m{i}"), "M", "he/him"));
            people.push(make_participant(&format!("f{i}"), "F", "she/her"));
        }
        let groups = stratify_groups(people, 3).unwrap();
        assert_eq!(groups.len(), 2);
        for g in &groups {
            let males = g
                .iter()
                .filter(|p| p.gender_category() == GenderCategory::Male)
                .count();
            assert_eq!(males, 2);
        }
    }

    #[test]
    fn stratify_rejects_unbalanced() {
        let mut people = Vec::new();
        for i in 0..5 {
            people.push(make_participant(&format!("m{i}"), "M", "he/him"));
        }
        for i in 0..3 {
            people.push(make_participant(&format!("f{i}"), "F", "she/her"));
        }
        assert!(matches!(
            stratify_groups(people, 0),
            Err(ProtocolError::UnbalancedGenders { .. })
        ));
    }

    #[test]
    fn stratify_large_cohort_reproducible() {
        let build = || {
            let mut people = Vec::new();
            for i in 0..100 {
                people.push(make_participant(&format!("m{i:03}"), "M", "he/him"));
                people.push(make_participant(&format!("f{i:03}"), "F", "she/her"));
            }
            people
        };
        let a = stratify_groups(build(), 42).unwrap();
        let b = stratify_groups(build(), 42).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        for g in &a {
            assert_eq!(
                g.iter()
                    .filter(|p| p.gender_category() == GenderCategory::Male)
                    .count(),
                2
            );
        }
    }

    #[test]
    fn pseudonyms_distinct_and_seeded() {
        let mut group = basic_group("g1", Treatment::Pseudonymous);
        for m in &mut group.members {
            m.pseudonym = None;
        }
        let roster: Vec<String> = ["Bear", "Cat", "Fox", "Owl", "Elk"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let assigned = assign_pseudonyms(&group, &roster, 1).unwrap();
        let aliases: BTreeSet<_> = assigned
            .members
            .iter()
            .map(|m| m.pseudonym.clone().unwrap())
            .collect();
        assert_eq!(aliases.len(), 4);
        assert_eq!(assigned, assign_pseudonyms(&group, &roster, 1).unwrap());

        // A different seed may assign differently but stays internally
        // distinct.
        let other = assign_pseudonyms(&group, &roster, 2).unwrap();
        let other_aliases: BTreeSet<_> = other
            .members
            .iter()
            .map(|m| m.pseudonym.clone().unwrap())
            .collect();
        assert_eq!(other_aliases.len(), 4);
    }

    #[test]
    fn pseudonyms_reject_small_roster_and_wrong_treatment() {
        let group = basic_group("g1", Treatment::Pseudonymous);
        let small: Vec<String> = ["Bear", "Cat", "Fox"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            assign_pseudonyms(&group, &small, 0),
            Err(ProtocolError::RosterTooSmall(3))
        ));

        let identified = basic_group("g1", Treatment::Identified);
        let roster: Vec<String> = ["Bear", "Cat", "Fox", "Owl"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(matches!(
            assign_pseudonyms(&identified, &roster, 0),
            Err(ProtocolError::TreatmentMismatch(_))
        ));
    }

    fn six_item_key() -> TaskKey {
        TaskKey::new(
            (1..=6)
                .map(|i| AnswerEntry {
                    id: format!("q{i}"),
                    answer: "a".to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn score_task_counts_matches() {
        let key = six_item_key();
        let pid = ParticipantId::new("p1").unwrap();
        let all: Vec<AnswerEntry> = key.items.clone();
        assert_eq!(score_task(&pid, &all, &key).unwrap().correct, 6);
        assert_eq!(score_task(&pid, &[], &key).unwrap().correct, 0);

        let three: Vec<AnswerEntry> = (1..=6)
            .map(|i| AnswerEntry {
                id: format!("q{i}"),
                answer: if i <= 3 { "a" } else { "b" }.to_string(),
            })
            .collect();
        assert_eq!(score_task(&pid, &three, &key).unwrap().correct, 3);
    }

    #[test]
    fn score_task_rejects_unknown_question() {
        let key = six_item_key();
        let pid = ParticipantId::new("p1").unwrap();
        let bad = vec![AnswerEntry {
            id: "q99".to_string(),
            answer: "a".to_string(),
        }];
        assert!(matches!(
            score_task(&pid, &bad, &key),
            Err(ProtocolError::UnknownQuestion(_))
        ));
    }

    #[test]
    fn task_key_rejects_duplicates_and_bad_json() {
        assert!(matches!(
            TaskKey::new(vec![
                AnswerEntry { id: "q1".into(), answer: "a".into() },
                AnswerEntry { id: "q1".into(), answer: "b".into() },
            ]),
            Err(ProtocolError::DuplicateQuestion(_))
        ));
        assert!(TaskKey::from_json("{\"items\":[],\"max_items\":0}").is_err());
        let ok = TaskKey::from_json(
            "{\"items\":[{\"id\":\"q1\",\"answer\":\"a\"}],\"max_items\":1}",
        )
        .unwrap();
        assert_eq!(ok.max_items, 1);
    }
}
