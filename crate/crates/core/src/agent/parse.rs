//! Strict parsing of model replies into stage values. A violation is a
//! signal to re-ask, never something to clamp or silently repair.

use crate::election::ParticipantId;
use crate::protocol::{AnswerEntry, StageId};

/// A candidate id paired with the label the agent saw for it (display name
/// or alias, depending on treatment).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLabel {
    pub id: ParticipantId,
    pub label: String,
}

/// What the parser needs to know for the stage being parsed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseContext<'a> {
    /// Required for the ballot stage.
    pub candidates: Option<&'a [CandidateLabel]>,
    /// Required for the task stage.
    pub question_ids: Option<&'a [String]>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty reply")]
    Empty,
    #[error("no usable number in reply")]
    NoNumber,
    #[error("found several numbers; reply is ambiguous")]
    AmbiguousNumber,
    #[error("nomination score {0} outside [0, 10]")]
    OutOfRange(f64),
    #[error("ranking does not mention candidate {0:?}")]
    MissingCandidate(String),
    #[error("no item answers found in reply")]
    NoAnswers,
    #[error("parser context is missing {0}")]
    MissingContext(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedValue {
    Text(String),
    Nomination(f64),
    Ranking(Vec<ParticipantId>),
    Answers(Vec<AnswerEntry>),
}

/// Parses a raw model reply for the given stage.
///
/// Self-nominations must contain exactly one number, in range; rankings
/// must mention every candidate label; task replies must answer at least
/// one known item id. Anything else is an error for the caller to re-ask.
pub fn parse_stage_response(
    stage: StageId,
    raw: &str,
    ctx: &ParseContext<'_>,
) -> Result<ParsedValue, ParseError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ParseError::Empty);
    }
    match stage {
        StageId::Profile | StageId::Discussion => Ok(ParsedValue::Text(trimmed.to_string())),
        StageId::SelfNomination => parse_nomination(trimmed).map(ParsedValue::Nomination),
        StageId::ElectionBallot => {
            let candidates = ctx
                .candidates
                .ok_or(ParseError::MissingContext("candidates"))?;
            parse_ranking(trimmed, candidates).map(ParsedValue::Ranking)
        }
        StageId::Task => {
            let ids = ctx
                .question_ids
                .ok_or(ParseError::MissingContext("question ids"))?;
            parse_answers(trimmed, ids).map(ParsedValue::Answers)
        }
    }
}

/// Maximal runs of number-ish characters that parse as f64.
fn numeric_runs(text: &str) -> Vec<f64> {
    let mut runs = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_ascii_digit() || ch == '.' || ch == '-' || ch == '+' {
            current.push(ch);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.into_iter()
        .filter_map(|r| r.trim_matches(|c| c == '.' || c == '+').parse::<f64>().ok())
        .collect()
}

fn parse_nomination(raw: &str) -> Result<f64, ParseError> {
    // The straightforward case: the whole reply is the number.
    if let Ok(value) = raw.parse::<f64>() {
        return check_range(value);
    }
    let runs = numeric_runs(raw);
    match runs.len() {
        0 => Err(ParseError::NoNumber),
        1 => check_range(runs[0]),
        _ => Err(ParseError::AmbiguousNumber),
    }
}

fn check_range(value: f64) -> Result<f64, ParseError> {
    if (0.0..=10.0).contains(&value) && !value.is_nan() {
        Ok(value)
    } else {
        Err(ParseError::OutOfRange(value))
    }
}

/// Position of the first occurrence of `label` in `text`, case-insensitive
/// and bounded by non-alphanumeric neighbors.
fn find_label(text: &str, label: &str) -> Option<usize> {
    let lower = text.to_lowercase();
    let needle = label.to_lowercase();
    let mut from = 0;
    while let Some(at) = lower[from..].find(&needle) {
        let start = from + at;
        let end = start + needle.len();
        let left_ok = start == 0
            || !lower[..start]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric());
        let right_ok = end == lower.len()
            || !lower[end..].chars().next().is_some_and(|c| c.is_alphanumeric());
        if left_ok && right_ok {
            return Some(start);
        }
        from = end;
    }
    None
}

fn parse_ranking(
    raw: &str,
    candidates: &[CandidateLabel],
) -> Result<Vec<ParticipantId>, ParseError> {
    let mut placed: Vec<(usize, &CandidateLabel)> = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        match find_label(raw, &candidate.label) {
            Some(at) => placed.push((at, candidate)),
            None => return Err(ParseError::MissingCandidate(candidate.label.clone())),
        }
    }
    // Longer labels win position ties so a label that prefixes another
    // cannot shadow it.
    placed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.label.len().cmp(&a.1.label.len())));
    Ok(placed.into_iter().map(|(_, c)| c.id.clone()).collect())
}

fn parse_answers(raw: &str, question_ids: &[String]) -> Result<Vec<AnswerEntry>, ParseError> {
    let mut entries = Vec::new();
    for id in question_ids {
        let Some(at) = find_label(raw, id) else {
            continue;
        };
        let rest = &raw[at + id.len()..];
        let token: String = rest
            .chars()
            .skip_while(|c| c.is_whitespace() || matches!(c, ':' | '=' | ')' | '.' | '-'))
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        if !token.is_empty() {
            entries.push(AnswerEntry {
                id: id.clone(),
                answer: token,
            });
        }
    }
    if entries.is_empty() {
        return Err(ParseError::NoAnswers);
    }
    Ok(entries)
}
