//! Shared test fixtures for protocol, agent, and analytics unit tests.

use serde_json::Map;

use super::{
    AnswerEntry, GroupRecord, IdentityProfile, ParticipantRecord, Pseudonym, ScoreEntry,
    SurveyResponses, TaskKey, TranscriptMessage, Treatment,
};
use crate::election::ParticipantId;

pub fn make_participant(id: &str, name: &str, pronouns: &str) -> ParticipantRecord {
    ParticipantRecord {
        id: ParticipantId::new(id).unwrap(),
        profile: IdentityProfile {
            display_name: name.to_string(),
            avatar: "compass".to_string(),
            pronouns: pronouns.to_string(),
            extra: Map::new(),
        },
        pseudonym: None,
        survey: SurveyResponses {
            survival_experience: format!("{name} once camped in the highlands"),
            leadership_experience: format!("{name} coordinated a volunteer shift"),
            risk_willingness: 5,
            gender_task_belief: 5,
            gender_leader_belief: 5,
            extra: Map::new(),
        },
        nomination: None,
        ballot: None,
        task_answers: None,
        score: None,
        extra: Map::new(),
    }
}

pub fn fixture_key() -> TaskKey {
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

/// Answers hitting exactly `correct` of the six fixture key items.
pub fn answers_with_correct(correct: u32) -> Vec<AnswerEntry> {
    (1..=6)
        .map(|i| AnswerEntry {
            id: format!("q{i}"),
            answer: if i <= correct { "a" } else { "b" }.to_string(),
        })
        .collect()
}

/// A structurally valid group with recorded stage outputs: nominations
/// 8/6/4/2 (so p1 and p2 are the candidates), unanimous ballots for p1,
/// and task scores 4/3/2/1 out of 6 backed by consistent answers.
pub fn basic_group(group_id: &str, treatment: Treatment) -> GroupRecord {
    let rows = [
        ("p1", "Ben", "he/him", "Bear", 8.0, 4),
        ("p2", "Ava", "she/her", "Cat", 6.0, 3),
        ("p3", "Dan", "he/him", "Fox", 4.0, 2),
        ("p4", "Cleo", "she/her", "Owl", 2.0, 1),
    ];
    let mut members = Vec::new();
    for (id, name, pronouns, alias, w, correct) in rows {
        let mut m = make_participant(id, name, pronouns);
        if treatment.is_pseudonymous_derived() {
            m.pseudonym = Some(Pseudonym(alias.to_string()));
        }
        m.nomination = Some(w);
        m.ballot = Some(vec![
            ParticipantId::new("p1").unwrap(),
            ParticipantId::new("p2").unwrap(),
        ]);
        m.task_answers = Some(answers_with_correct(correct));
        m.score = Some(ScoreEntry {
            correct,
            max_items: 6,
        });
        members.push(m);
    }

    let transcript = members
        .iter()
        .enumerate()
        .map(|(i, m)| TranscriptMessage {
            speaker_alias: m.visible_alias(treatment).to_string(),
            turn_index: i as u32,
            text: format!("I think the mirror matters most. (turn {i})"),
        })
        .collect();

    GroupRecord {
        group_id: group_id.to_string(),
        treatment,
        members,
        transcript,
        election: None,
        gap: None,
        extra: Map::new(),
    }
}
