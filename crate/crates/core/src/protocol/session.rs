//! The five-stage session state machine. A responder supplies each member's
//! output per stage (replay reads stored answers; simulation asks an agent);
//! the engine validates outputs, runs candidate selection after
//! self-nomination, resolves the election after balloting, and scores the
//! task and gap at the end.

use crate::election::{
    leader_gap, resolve_election, select_candidates, Ballot, CandidateSet, ElectionError,
    ParticipantId, SelfNomination,
};
use crate::seed::derive_seed;

use super::{
    score_task, validate_group, AnswerEntry, GroupRecord, ProtocolError, ScoreEntry, StageId,
    TaskKey, Violation, STAGE_ORDER,
};

/// One member's output for one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutput {
    /// Free-text output (profile introduction, discussion evaluation).
    Text(String),
    /// Willingness-to-lead score in [0, 10].
    Nomination(f64),
    /// Full ranking over the candidate set.
    Ranking(Vec<ParticipantId>),
    /// Task answers keyed by question id.
    Answers(Vec<AnswerEntry>),
}

/// What the responder can see when producing an output.
pub struct StageContext<'a> {
    pub group: &'a GroupRecord,
    pub stage: StageId,
    /// Present from the ballot stage onward.
    pub candidates: Option<&'a CandidateSet>,
    pub key: &'a TaskKey,
}

/// Source of stage outputs, one call per member per stage, in stage order.
pub trait StageResponder {
    fn respond(
        &mut self,
        member_index: usize,
        ctx: &StageContext<'_>,
    ) -> Result<StageOutput, SessionError>;
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("group failed validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("responder failed for {member} at {stage}: {message}")]
    Responder {
        member: ParticipantId,
        stage: StageId,
        message: String,
    },
    #[error("responder returned the wrong output kind for {member} at {stage}")]
    WrongOutputKind {
        member: ParticipantId,
        stage: StageId,
    },
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Replays a recorded group: stage outputs come from the stored member
/// fields, so re-running a complete group re-derives its election artifacts
/// from the same inputs.
pub struct ReplayResponder;

impl StageResponder for ReplayResponder {
    fn respond(
        &mut self,
        member_index: usize,
        ctx: &StageContext<'_>,
    ) -> Result<StageOutput, SessionError> {
        let member = &ctx.group.members[member_index];
        let missing = |what: &str| SessionError::Responder {
            member: member.id.clone(),
            stage: ctx.stage,
            message: format!("no stored {what} to replay"),
        };
        match ctx.stage {
            StageId::Profile | StageId::Discussion => Ok(StageOutput::Text(String::new())),
            StageId::SelfNomination => member
                .nomination
                .map(StageOutput::Nomination)
                .ok_or_else(|| missing("nomination")),
            StageId::ElectionBallot => member
                .ballot
                .clone()
                .map(StageOutput::Ranking)
                .ok_or_else(|| missing("ballot")),
            StageId::Task => member
                .task_answers
                .clone()
                .map(StageOutput::Answers)
                .ok_or_else(|| missing("task answers")),
        }
    }
}

/// Runs the stages in fixed order and returns the completed group. The
/// input group is untouched; members are visited in canonical id order
/// within each stage.
pub fn run_session(
    group: &GroupRecord,
    responder: &mut dyn StageResponder,
    key: &TaskKey,
    seed: u64,
) -> Result<GroupRecord, SessionError> {
    let violations = validate_group(group);
    if !violations.is_empty() {
        return Err(SessionError::Invalid(violations));
    }

    let mut out = group.clone();
    let order = out.canonical_order();
    let group_seed = |purpose: &str| derive_seed(seed, &format!("{}/{purpose}", out.group_id));

    let mut candidates: Option<CandidateSet> = None;
    for stage in STAGE_ORDER {
        for &idx in &order {
            let ctx = StageContext {
                group: &out,
                stage,
                candidates: candidates.as_ref(),
                key,
            };
            let output = responder.respond(idx, &ctx)?;
            let member_id = out.members[idx].id.clone();
            match (stage, output) {
                (StageId::Profile | StageId::Discussion, StageOutput::Text(_)) => {}
                (StageId::SelfNomination, StageOutput::Nomination(w)) => {
                    // Range check happens here so a bad responder aborts the
                    // session rather than storing an invalid record.
                    SelfNomination::new(member_id.clone(), w)?;
                    out.members[idx].nomination = Some(w);
                }
                (StageId::ElectionBallot, StageOutput::Ranking(ranking)) => {
                    out.members[idx].ballot = Some(ranking);
                }
                (StageId::Task, StageOutput::Answers(answers)) => {
                    let score = score_task(&member_id, &answers, key)?;
                    out.members[idx].task_answers = Some(answers);
                    out.members[idx].score = Some(ScoreEntry {
                        correct: score.correct,
                        max_items: score.max_items,
                    });
                }
                (stage, _) => {
                    return Err(SessionError::WrongOutputKind {
                        member: member_id,
                        stage,
                    });
                }
            }
        }

        match stage {
            StageId::SelfNomination => {
                let nominations = collect_nominations(&out, &order)?;
                candidates = Some(select_candidates(
                    &nominations,
                    group_seed("candidates"),
                )?);
            }
            StageId::ElectionBallot => {
                let nominations = collect_nominations(&out, &order)?;
                let ballots: Vec<Ballot> = order
                    .iter()
                    .map(|&idx| Ballot {
                        voter: out.members[idx].id.clone(),
                        ranking: out.members[idx].ballot.clone().expect("stage ran"),
                    })
                    .collect();
                let outcome = resolve_election(
                    &ballots,
                    candidates.as_ref().expect("selected after nomination"),
                    &nominations,
                    group_seed("election"),
                )?;
                out.election = Some(outcome);
            }
            StageId::Task => {
                let scores: Vec<crate::election::TaskScore> = order
                    .iter()
                    .map(|&idx| {
                        let m = &out.members[idx];
                        let s = m.score.expect("stage ran");
                        crate::election::TaskScore::new(m.id.clone(), s.correct, s.max_items)
                    })
                    .collect::<Result<_, _>>()?;
                let election = out.election.as_ref().expect("ran before task");
                let gap = leader_gap(
                    &out.group_id,
                    &scores,
                    &election.candidates,
                    &election.elected,
                    key.max_items,
                )?;
                out.gap = Some(gap);
            }
            _ => {}
        }
    }

    debug_assert!(
        validate_group(&out).is_empty(),
        "completed group violates invariants: {:?}",
        validate_group(&out)
    );
    Ok(out)
}

fn collect_nominations(
    group: &GroupRecord,
    order: &[usize],
) -> Result<Vec<SelfNomination>, SessionError> {
    order
        .iter()
        .map(|&idx| {
            let m = &group.members[idx];
            SelfNomination::new(m.id.clone(), m.nomination.expect("stage ran"))
                .map_err(SessionError::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fixtures::{answers_with_correct, basic_group, fixture_key};
    use crate::protocol::{payout_preview, Treatment};
    use crate::TieBreakRule;

    #[test]
    fn replay_rederives_election_from_stored_ballots() {
        let group = basic_group("g1", Treatment::Identified);
        let key = fixture_key();
        let done = run_session(&group, &mut ReplayResponder, &key, 11).unwrap();
        let election = done.election.as_ref().unwrap();
        assert_eq!(election.elected.as_str(), "p1");
        assert_eq!(election.tiebreak_trace, vec![TieBreakRule::Condorcet]);
        // Candidates are the two highest nominations.
        let cands: Vec<&str> = election
            .candidates
            .members()
            .iter()
            .map(|c| c.as_str())
            .collect();
        assert_eq!(cands, vec!["p1", "p2"]);
        // p1 scored 4/6 and is optimal, so the gap is zero.
        let gap = done.gap.as_ref().unwrap();
        assert_eq!(gap.delta_total, 0);
        // Transcript is untouched.
        assert_eq!(done.transcript, group.transcript);
        // Replaying a second time gives the identical record.
        assert_eq!(done, run_session(&group, &mut ReplayResponder, &key, 11).unwrap());
    }

    /// Replaying an already-completed record re-derives the same election
    /// artifacts from its stored ballots, i.e. replay is idempotent.
    #[test]
    fn replay_of_completed_group_is_idempotent() {
        let key = fixture_key();
        let done = run_session(
            &basic_group("g1", Treatment::Identified),
            &mut ReplayResponder,
            &key,
            11,
        )
        .unwrap();
        let again = run_session(&done, &mut ReplayResponder, &key, 11).unwrap();
        assert_eq!(again.election, done.election);
        assert_eq!(again.gap, done.gap);
        assert_eq!(again, done);
    }

    /// Fixed-output responder: every member nominates the same W, ranks
    /// candidates in context order, and answers three items correctly.
    struct FixedResponder;

    impl StageResponder for FixedResponder {
        fn respond(
            &mut self,
            _member_index: usize,
            ctx: &StageContext<'_>,
        ) -> Result<StageOutput, SessionError> {
            Ok(match ctx.stage {
                StageId::Profile | StageId::Discussion => StageOutput::Text("ok".to_string()),
                StageId::SelfNomination => StageOutput::Nomination(5.0),
                StageId::ElectionBallot => StageOutput::Ranking(
                    ctx.candidates.expect("ballot stage").members().to_vec(),
                ),
                StageId::Task => StageOutput::Answers(answers_with_correct(3)),
            })
        }
    }

    #[test]
    fn fixed_responder_is_deterministic() {
        let group = basic_group("g2", Treatment::Pseudonymous);
        let key = fixture_key();
        let a = run_session(&group, &mut FixedResponder, &key, 7).unwrap();
        let b = run_session(&group, &mut FixedResponder, &key, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_complete());
        // All nominations tie, so candidate selection recorded a draw.
        assert!(a
            .election
            .as_ref()
            .unwrap()
            .candidates
            .selection_trace
            .cutoff_draw
            .is_some());
    }

    struct OutOfRangeResponder;

    impl StageResponder for OutOfRangeResponder {
        fn respond(
            &mut self,
            _member_index: usize,
            ctx: &StageContext<'_>,
        ) -> Result<StageOutput, SessionError> {
            Ok(match ctx.stage {
                StageId::SelfNomination => StageOutput::Nomination(15.0),
                _ => StageOutput::Text(String::new()),
            })
        }
    }

    #[test]
    fn out_of_range_nomination_aborts_session() {
        let group = basic_group("g3", Treatment::Identified);
        let err = run_session(&group, &mut OutOfRangeResponder, &fixture_key(), 0).unwrap_err();
        assert!(matches!(
            err,
            SessionError::Election(ElectionError::ScoreOutOfRange { .. })
        ));
    }

    #[test]
    fn invalid_group_is_rejected_before_any_stage() {
        let mut group = basic_group("g4", Treatment::Identified);
        group.members.pop();
        assert!(matches!(
            run_session(&group, &mut ReplayResponder, &fixture_key(), 0),
            Err(SessionError::Invalid(_))
        ));
    }

    #[test]
    fn payout_scales_with_elected_score() {
        let key = fixture_key();
        let base = 900;
        let bonus = 400;

        // p1 elected with 4/6 correct in the basic fixture.
        let done = run_session(&basic_group("g5", Treatment::Identified), &mut ReplayResponder, &key, 0)
            .unwrap();
        let payouts = payout_preview(&done, base, bonus).unwrap();
        assert!(payouts.iter().all(|(_, cents)| *cents == 900 + 267));

        // Full marks for the elected leader: 13.00 each.
        let mut full = basic_group("g6", Treatment::Identified);
        for m in &mut full.members {
            m.task_answers = Some(answers_with_correct(6));
        }
        let done = run_session(&full, &mut ReplayResponder, &key, 0).unwrap();
        let payouts = payout_preview(&done, base, bonus).unwrap();
        assert!(payouts.iter().all(|(_, cents)| *cents == 1300));

        // Elected leader scores zero: base only.
        let mut zero = basic_group("g7", Treatment::Identified);
        for m in &mut zero.members {
            m.task_answers = Some(answers_with_correct(0));
        }
        let done = run_session(&zero, &mut ReplayResponder, &key, 0).unwrap();
        let payouts = payout_preview(&done, base, bonus).unwrap();
        assert!(payouts.iter().all(|(_, cents)| *cents == 900));

        // Elected leader scores 3/6: 11.00 each.
        let mut half = basic_group("g8", Treatment::Identified);
        for m in &mut half.members {
            m.task_answers = Some(answers_with_correct(3));
        }
        let done = run_session(&half, &mut ReplayResponder, &key, 0).unwrap();
        let payouts = payout_preview(&done, base, bonus).unwrap();
        assert!(payouts.iter().all(|(_, cents)| *cents == 1100));
    }

    #[test]
    fn payout_rejects_incomplete_group() {
        let group = basic_group("g9", Treatment::Identified);
        assert!(matches!(
            payout_preview(&group, 900, 400),
            Err(ProtocolError::IncompleteGroup(_))
        ));
    }
}
