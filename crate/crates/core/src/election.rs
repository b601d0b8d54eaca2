//! Group leader elections: candidate selection from self-nomination scores,
//! ranked-choice resolution (Condorcet with Borda fallback), ex-post optimal
//! leader identification, and the gap decomposition between elected and
//! optimal leaders.
//!
//! All operations are pure and deterministic. Ties are broken by a seeded
//! draw so that identical inputs and seed always produce identical outputs,
//! and every tie-break is recorded in a trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of members in a group.
pub const GROUP_SIZE: usize = 4;

/// Inclusive bounds for self-nomination scores.
pub const NOMINATION_MIN: f64 = 0.0;
pub const NOMINATION_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElectionError {
    #[error("participant id must be non-empty")]
    EmptyParticipantId,
    #[error("expected {expected} nominations, got {got}")]
    WrongMemberCount { expected: usize, got: usize },
    #[error("duplicate participant {0}")]
    DuplicateParticipant(ParticipantId),
    #[error("nomination score {score} for {participant} outside [0, 10]")]
    ScoreOutOfRange {
        participant: ParticipantId,
        score: f64,
    },
    #[error("candidate set must have at least 2 members, got {0}")]
    CandidateSetTooSmall(usize),
    #[error("ballot from {voter} is not a permutation of the candidate set")]
    MalformedBallot { voter: ParticipantId },
    #[error("expected {expected} ballots, got {got}")]
    WrongBallotCount { expected: usize, got: usize },
    #[error("ballot voter {0} is not a group member")]
    UnknownVoter(ParticipantId),
    #[error("duplicate ballot from {0}")]
    DuplicateBallot(ParticipantId),
    #[error("task score {correct}/{max_items} for {participant} is invalid")]
    InvalidTaskScore {
        participant: ParticipantId,
        correct: u32,
        max_items: u32,
    },
    #[error("missing task score for {0}")]
    MissingScore(ParticipantId),
    #[error("task scores disagree on max_items ({0} vs {1})")]
    MixedMaxItems(u32, u32),
    #[error("elected participant {0} is not in the candidate set")]
    ElectedNotCandidate(ParticipantId),
}

/// Opaque stable identifier for a participant, unique within a cohort.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Result<Self, ElectionError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ElectionError::EmptyParticipantId);
        }
        Ok(ParticipantId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A member's willingness-to-lead score in [0, 10].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfNomination {
    pub participant: ParticipantId,
    pub score: f64,
}

impl SelfNomination {
    pub fn new(participant: ParticipantId, score: f64) -> Result<Self, ElectionError> {
        if !(NOMINATION_MIN..=NOMINATION_MAX).contains(&score) || score.is_nan() {
            return Err(ElectionError::ScoreOutOfRange { participant, score });
        }
        Ok(SelfNomination { participant, score })
    }
}

/// A member's score on the representative task: count of correct items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScore {
    pub participant: ParticipantId,
    pub correct: u32,
    pub max_items: u32,
}

impl TaskScore {
    pub fn new(participant: ParticipantId, correct: u32, max_items: u32) -> Result<Self, ElectionError> {
        if max_items == 0 || correct > max_items {
            return Err(ElectionError::InvalidTaskScore {
                participant,
                correct,
                max_items,
            });
        }
        Ok(TaskScore {
            participant,
            correct,
            max_items,
        })
    }
}

/// Record of a seeded draw used to resolve a tie.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    /// Participants that were tied before the draw.
    pub tied: Vec<ParticipantId>,
    /// Participants the draw selected, in draw order.
    pub chosen: Vec<ParticipantId>,
    pub seed: u64,
}

/// How the candidate set was formed: the nomination scores considered and
/// whether a tie at the cutoff had to be drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Nomination scores in input order.
    pub scores: Vec<(ParticipantId, f64)>,
    /// Present when a tie at the top-two cutoff was resolved by a seeded draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_draw: Option<DrawRecord>,
}

/// The eligible leader candidates: normally the two highest self-nomination
/// scores, ordered by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    members: Vec<ParticipantId>,
    pub selection_trace: SelectionTrace,
}

impl CandidateSet {
    /// Builds a candidate set directly from members, without a selection
    /// pass. Used for tie-expanded sets and by test oracles.
    pub fn from_members(members: Vec<ParticipantId>) -> Result<Self, ElectionError> {
        if members.len() < 2 {
            return Err(ElectionError::CandidateSetTooSmall(members.len()));
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.clone()) {
                return Err(ElectionError::DuplicateParticipant(m.clone()));
            }
        }
        Ok(CandidateSet {
            members,
            selection_trace: SelectionTrace {
                scores: Vec::new(),
                cutoff_draw: None,
            },
        })
    }

    pub fn members(&self) -> &[ParticipantId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &ParticipantId) -> bool {
        self.members.iter().any(|m| m == id)
    }
}

/// A full ranking over the candidate set from one voter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: ParticipantId,
    /// Candidates from most to least preferred. Must be a permutation of the
    /// candidate set.
    pub ranking: Vec<ParticipantId>,
}

/// Head-to-head win counts between candidates.
///
/// `wins(x, y)` is the number of ballots ranking `x` above `y`; for `x != y`
/// the two directions sum to the ballot count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    candidates: Vec<ParticipantId>,
    counts: Vec<Vec<u32>>,
}

impl PairwiseMatrix {
    pub fn candidates(&self) -> &[ParticipantId] {
        &self.candidates
    }

    pub fn wins(&self, x: &ParticipantId, y: &ParticipantId) -> Option<u32> {
        let i = self.candidates.iter().position(|c| c == x)?;
        let j = self.candidates.iter().position(|c| c == y)?;
        Some(self.counts[i][j])
    }

    /// The candidate beating every other candidate strictly head-to-head,
    /// if one exists.
    pub fn strict_condorcet_winner(&self) -> Option<&ParticipantId> {
        'outer: for (i, c) in self.candidates.iter().enumerate() {
            for j in 0..self.candidates.len() {
                if i != j && self.counts[i][j] <= self.counts[j][i] {
                    continue 'outer;
                }
            }
            return Some(c);
        }
        None
    }
}

/// Tie-break rules in the order they can apply during election resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakRule {
    Condorcet,
    Borda,
    HighestNomination,
    SeededDraw,
}

/// The result of resolving an election over a candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionOutcome {
    pub candidates: CandidateSet,
    pub pairwise: PairwiseMatrix,
    pub borda: BTreeMap<ParticipantId, u32>,
    pub elected: ParticipantId,
    /// Rules evaluated in order; the last entry is the rule that decided.
    pub tiebreak_trace: Vec<TieBreakRule>,
}

/// Per-group gap between the elected leader's task score and the best
/// member's, split into self-exclusion (best member not a candidate) and
/// peer-exclusion (best member a candidate but not elected).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub group: String,
    pub optimal_set: BTreeSet<ParticipantId>,
    pub delta_total: u32,
    pub delta_self: u32,
    pub delta_peer: u32,
    pub normalized_total: f64,
    pub normalized_self: f64,
    pub normalized_peer: f64,
}

fn check_group_nominations(nominations: &[SelfNomination]) -> Result<(), ElectionError> {
    if nominations.len() != GROUP_SIZE {
        return Err(ElectionError::WrongMemberCount {
            expected: GROUP_SIZE,
            got: nominations.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for n in nominations {
        if !seen.insert(n.participant.clone()) {
            return Err(ElectionError::DuplicateParticipant(n.participant.clone()));
        }
        if !(NOMINATION_MIN..=NOMINATION_MAX).contains(&n.score) || n.score.is_nan() {
            return Err(ElectionError::ScoreOutOfRange {
                participant: n.participant.clone(),
                score: n.score,
            });
        }
    }
    Ok(())
}

/// Draws `take` entries from `pool` (kept in input order) using a seeded
/// shuffle. The draw depends only on positions, not identifiers, so a
/// consistent relabeling of participants permutes the result identically.
fn seeded_draw(pool: &[ParticipantId], take: usize, seed: u64) -> Vec<ParticipantId> {
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices
        .into_iter()
        .take(take)
        .map(|i| pool[i].clone())
        .collect()
}

/// Selects the two highest-scoring members as leader candidates.
///
/// A score tie at the cutoff is resolved by a seeded deterministic draw and
/// recorded in the selection trace. Members are returned by descending score,
/// with drawn members after any member strictly above the cutoff.
pub fn select_candidates(
    nominations: &[SelfNomination],
    seed: u64,
) -> Result<CandidateSet, ElectionError> {
    check_group_nominations(nominations)?;

    let mut ordered: Vec<&SelfNomination> = nominations.iter().collect();
    // Stable sort keeps input order within equal scores.
    ordered.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are not NaN"));

    let cutoff = ordered[1].score;
    let above: Vec<&SelfNomination> = ordered.iter().filter(|n| n.score > cutoff).copied().collect();
    let tied: Vec<&SelfNomination> = ordered
        .iter()
        .filter(|n| n.score == cutoff)
        .copied()
        .collect();

    let slots = 2 - above.len();
    let mut members: Vec<ParticipantId> = above.iter().map(|n| n.participant.clone()).collect();
    let mut cutoff_draw = None;
    if tied.len() > slots {
        let pool: Vec<ParticipantId> = tied.iter().map(|n| n.participant.clone()).collect();
        let chosen = seeded_draw(&pool, slots, seed);
        members.extend(chosen.iter().cloned());
        cutoff_draw = Some(DrawRecord {
            tied: pool,
            chosen,
            seed,
        });
    } else {
        members.extend(tied.iter().map(|n| n.participant.clone()));
    }

    Ok(CandidateSet {
        members,
        selection_trace: SelectionTrace {
            scores: nominations
                .iter()
                .map(|n| (n.participant.clone(), n.score))
                .collect(),
            cutoff_draw,
        },
    })
}

fn validate_ballots(ballots: &[Ballot], candidates: &CandidateSet) -> Result<(), ElectionError> {
    for ballot in ballots {
        if ballot.ranking.len() != candidates.len() {
            return Err(ElectionError::MalformedBallot {
                voter: ballot.voter.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for c in &ballot.ranking {
            if !candidates.contains(c) || !seen.insert(c.clone()) {
                return Err(ElectionError::MalformedBallot {
                    voter: ballot.voter.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Counts, for every ordered candidate pair `(x, y)`, the ballots ranking
/// `x` above `y`.
pub fn pairwise_matrix(
    ballots: &[Ballot],
    candidates: &CandidateSet,
) -> Result<PairwiseMatrix, ElectionError> {
    validate_ballots(ballots, candidates)?;
    let n = candidates.len();
    let mut counts = vec![vec![0u32; n]; n];
    for ballot in ballots {
        for (upper, x) in ballot.ranking.iter().enumerate() {
            let i = candidates
                .members()
                .iter()
                .position(|c| c == x)
                .expect("validated");
            for y in &ballot.ranking[upper + 1..] {
                let j = candidates
                    .members()
                    .iter()
                    .position(|c| c == y)
                    .expect("validated");
                counts[i][j] += 1;
            }
        }
    }
    Ok(PairwiseMatrix {
        candidates: candidates.members().to_vec(),
        counts,
    })
}

/// Borda totals: each ballot awards `C-1` points to its top choice down to
/// `0` for its last.
pub fn borda_scores(
    ballots: &[Ballot],
    candidates: &CandidateSet,
) -> Result<BTreeMap<ParticipantId, u32>, ElectionError> {
    validate_ballots(ballots, candidates)?;
    let top = (candidates.len() - 1) as u32;
    let mut totals: BTreeMap<ParticipantId, u32> = candidates
        .members()
        .iter()
        .map(|c| (c.clone(), 0))
        .collect();
    for ballot in ballots {
        for (rank, c) in ballot.ranking.iter().enumerate() {
            *totals.get_mut(c).expect("validated") += top - rank as u32;
        }
    }
    Ok(totals)
}

/// Resolves an election: strict Condorcet winner if one exists, otherwise
/// highest Borda total, then highest nomination score among those still
/// tied, then a seeded draw. Every rule evaluated is recorded in the trace.
pub fn resolve_election(
    ballots: &[Ballot],
    candidates: &CandidateSet,
    nominations: &[SelfNomination],
    seed: u64,
) -> Result<ElectionOutcome, ElectionError> {
    check_group_nominations(nominations)?;
    if ballots.len() != GROUP_SIZE {
        return Err(ElectionError::WrongBallotCount {
            expected: GROUP_SIZE,
            got: ballots.len(),
        });
    }
    let members: BTreeSet<&ParticipantId> = nominations.iter().map(|n| &n.participant).collect();
    let mut voters = BTreeSet::new();
    for b in ballots {
        if !members.contains(&b.voter) {
            return Err(ElectionError::UnknownVoter(b.voter.clone()));
        }
        if !voters.insert(b.voter.clone()) {
            return Err(ElectionError::DuplicateBallot(b.voter.clone()));
        }
    }

    let pairwise = pairwise_matrix(ballots, candidates)?;
    let borda = borda_scores(ballots, candidates)?;

    let mut trace = vec![TieBreakRule::Condorcet];
    if let Some(winner) = pairwise.strict_condorcet_winner().cloned() {
        return Ok(ElectionOutcome {
            candidates: candidates.clone(),
            pairwise,
            borda,
            elected: winner,
            tiebreak_trace: trace,
        });
    }

    trace.push(TieBreakRule::Borda);
    let best = *borda.values().max().expect("non-empty candidate set");
    // Keep candidate-set order so later draws stay positional.
    let mut leaders: Vec<ParticipantId> = candidates
        .members()
        .iter()
        .filter(|c| borda[*c] == best)
        .cloned()
        .collect();
    if leaders.len() == 1 {
        return Ok(ElectionOutcome {
            candidates: candidates.clone(),
            pairwise,
            borda,
            elected: leaders.remove(0),
            tiebreak_trace: trace,
        });
    }

    trace.push(TieBreakRule::HighestNomination);
    let score_of = |id: &ParticipantId| -> f64 {
        nominations
            .iter()
            .find(|n| &n.participant == id)
            .map(|n| n.score)
            .unwrap_or(NOMINATION_MIN)
    };
    let top_w = leaders
        .iter()
        .map(&score_of)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut leaders: Vec<ParticipantId> = leaders
        .into_iter()
        .filter(|c| score_of(c) == top_w)
        .collect();
    if leaders.len() == 1 {
        return Ok(ElectionOutcome {
            candidates: candidates.clone(),
            pairwise,
            borda,
            elected: leaders.remove(0),
            tiebreak_trace: trace,
        });
    }

    trace.push(TieBreakRule::SeededDraw);
    let elected = seeded_draw(&leaders, 1, seed).remove(0);
    Ok(ElectionOutcome {
        candidates: candidates.clone(),
        pairwise,
        borda,
        elected,
        tiebreak_trace: trace,
    })
}

/// The member(s) with the highest task score; ties produce a multi-member
/// set.
pub fn optimal_leaders(scores: &[TaskScore]) -> Result<BTreeSet<ParticipantId>, ElectionError> {
    if scores.len() != GROUP_SIZE {
        return Err(ElectionError::WrongMemberCount {
            expected: GROUP_SIZE,
            got: scores.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for s in scores {
        if !seen.insert(s.participant.clone()) {
            return Err(ElectionError::DuplicateParticipant(s.participant.clone()));
        }
    }
    let best = scores.iter().map(|s| s.correct).max().expect("non-empty");
    Ok(scores
        .iter()
        .filter(|s| s.correct == best)
        .map(|s| s.participant.clone())
        .collect())
}

/// Computes the optimal leader gap for a group and decomposes it.
///
/// `delta_total` is the best member's score minus the elected leader's.
/// It lands entirely in `delta_self` when no optimal member was a candidate,
/// and entirely in `delta_peer` when an optimal member was a candidate but
/// not elected. The identity `delta_total == delta_self + delta_peer` always
/// holds.
pub fn leader_gap(
    group_id: &str,
    scores: &[TaskScore],
    candidates: &CandidateSet,
    elected: &ParticipantId,
    max_items: u32,
) -> Result<GapReport, ElectionError> {
    if !candidates.contains(elected) {
        return Err(ElectionError::ElectedNotCandidate(elected.clone()));
    }
    for s in scores {
        if s.max_items != max_items {
            return Err(ElectionError::MixedMaxItems(s.max_items, max_items));
        }
    }
    let optimal_set = optimal_leaders(scores)?;
    for c in candidates.members() {
        if !scores.iter().any(|s| &s.participant == c) {
            return Err(ElectionError::MissingScore(c.clone()));
        }
    }

    let best = scores.iter().map(|s| s.correct).max().expect("non-empty");
    let elected_score = scores
        .iter()
        .find(|s| &s.participant == elected)
        .map(|s| s.correct)
        .ok_or_else(|| ElectionError::MissingScore(elected.clone()))?;
    let delta_total = best - elected_score;

    let optimal_is_candidate = optimal_set.iter().any(|o| candidates.contains(o));
    let (delta_self, delta_peer) = if delta_total == 0 {
        (0, 0)
    } else if !optimal_is_candidate {
        (delta_total, 0)
    } else {
        // An optimal member was eligible but someone else got elected.
        (0, delta_total)
    };

    let norm = |d: u32| f64::from(d) / f64::from(max_items);
    Ok(GapReport {
        group: group_id.to_string(),
        optimal_set,
        delta_total,
        delta_self,
        delta_peer,
        normalized_total: norm(delta_total),
        normalized_self: norm(delta_self),
        normalized_peer: norm(delta_peer),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParticipantId {
        ParticipantId::new(s).unwrap()
    }

    fn noms(entries: &[(&str, f64)]) -> Vec<SelfNomination> {
        entries
            .iter()
            .map(|(id, w)| SelfNomination::new(pid(id), *w).unwrap())
            .collect()
    }

    fn ballot(voter: &str, ranking: &[&str]) -> Ballot {
        Ballot {
            voter: pid(voter),
            ranking: ranking.iter().map(|r| pid(r)).collect(),
        }
    }

    fn scores(entries: &[(&str, u32)], max_items: u32) -> Vec<TaskScore> {
        entries
            .iter()
            .map(|(id, c)| TaskScore::new(pid(id), *c, max_items).unwrap())
            .collect()
    }

    #[test]
    fn select_candidates_strict_ordering() {
        let set = select_candidates(&noms(&[("A", 2.0), ("B", 9.0), ("C", 8.0), ("D", 1.0)]), 0)
            .unwrap();
        assert_eq!(set.members(), &[pid("B"), pid("C")]);
        assert!(set.selection_trace.cutoff_draw.is_none());
    }

    #[test]
    fn select_candidates_full_tie_draws_deterministically() {
        let nominations = noms(&[("A", 5.0), ("B", 5.0), ("C", 5.0), ("D", 5.0)]);
        let first = select_candidates(&nominations, 7).unwrap();
        let second = select_candidates(&nominations, 7).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.len(), 2);
        let draw = first.selection_trace.cutoff_draw.as_ref().unwrap();
        assert_eq!(draw.tied.len(), 4);
        assert_eq!(draw.chosen.len(), 2);
    }

    #[test]
    fn select_candidates_cutoff_tie() {
        let nominations = noms(&[("A", 9.0), ("B", 7.0), ("C", 7.0), ("D", 1.0)]);
        let set = select_candidates(&nominations, 1).unwrap();
        assert_eq!(set.members()[0], pid("A"));
        assert!(set.members()[1] == pid("B") || set.members()[1] == pid("C"));
        let draw = set.selection_trace.cutoff_draw.as_ref().unwrap();
        assert_eq!(draw.tied, vec![pid("B"), pid("C")]);
        // Stable under the same seed.
        assert_eq!(set, select_candidates(&nominations, 1).unwrap());
    }

    #[test]
    fn select_candidates_rejects_bad_input() {
        assert!(matches!(
            select_candidates(&noms(&[("A", 1.0), ("B", 2.0)]), 0),
            Err(ElectionError::WrongMemberCount { .. })
        ));
        let mut bad = noms(&[("A", 1.0), ("B", 2.0), ("C", 3.0), ("D", 4.0)]);
        bad[0].score = 12.0;
        assert!(matches!(
            select_candidates(&bad, 0),
            Err(ElectionError::ScoreOutOfRange { .. })
        ));
    }

    fn two_candidates() -> CandidateSet {
        CandidateSet::from_members(vec![pid("X"), pid("Y")]).unwrap()
    }

    fn three_candidates() -> CandidateSet {
        CandidateSet::from_members(vec![pid("X"), pid("Y"), pid("Z")]).unwrap()
    }

    #[test]
    fn pairwise_counts_majority() {
        let cands = two_candidates();
        let ballots = vec![
            ballot("a", &["X", "Y"]),
            ballot("b", &["X", "Y"]),
            ballot("c", &["X", "Y"]),
            ballot("d", &["Y", "X"]),
        ];
        let m = pairwise_matrix(&ballots, &cands).unwrap();
        assert_eq!(m.wins(&pid("X"), &pid("Y")), Some(3));
        assert_eq!(m.wins(&pid("Y"), &pid("X")), Some(1));
    }

    #[test]
    fn pairwise_symmetric_split() {
        let cands = two_candidates();
        let ballots = vec![
            ballot("a", &["X", "Y"]),
            ballot("b", &["X", "Y"]),
            ballot("c", &["Y", "X"]),
            ballot("d", &["Y", "X"]),
        ];
        let m = pairwise_matrix(&ballots, &cands).unwrap();
        assert_eq!(m.wins(&pid("X"), &pid("Y")), Some(2));
        assert_eq!(m.wins(&pid("Y"), &pid("X")), Some(2));
        assert!(m.strict_condorcet_winner().is_none());
    }

    // Hand-counted pairwise preferences for the three-candidate profile
    // {X>Y>Z, Y>Z>X, Z>X>Y, X>Y>Z}.
    #[test]
    fn pairwise_three_candidates() {
        let cands = three_candidates();
        let ballots = cycle_ballots();
        let m = pairwise_matrix(&ballots, &cands).unwrap();
        assert_eq!(m.wins(&pid("X"), &pid("Y")), Some(3));
        assert_eq!(m.wins(&pid("Y"), &pid("Z")), Some(3));
        assert_eq!(m.wins(&pid("X"), &pid("Z")), Some(2));
        assert_eq!(m.wins(&pid("Z"), &pid("X")), Some(2));
    }

    #[test]
    fn pairwise_rejects_malformed_ballot() {
        let cands = two_candidates();
        let short = vec![ballot("a", &["X"])];
        assert!(matches!(
            pairwise_matrix(&short, &cands),
            Err(ElectionError::MalformedBallot { .. })
        ));
        let dup = vec![ballot("a", &["X", "X"])];
        assert!(matches!(
            pairwise_matrix(&dup, &cands),
            Err(ElectionError::MalformedBallot { .. })
        ));
    }

    fn cycle_ballots() -> Vec<Ballot> {
        vec![
            ballot("a", &["X", "Y", "Z"]),
            ballot("b", &["Y", "Z", "X"]),
            ballot("c", &["Z", "X", "Y"]),
            ballot("d", &["X", "Y", "Z"]),
        ]
    }

    // Per-ballot point assignment summed by hand: X=2+0+1+2, Y=1+2+0+1,
    // Z=0+1+2+0.
    #[test]
    fn borda_three_candidates() {
        let totals = borda_scores(&cycle_ballots(), &three_candidates()).unwrap();
        assert_eq!(totals[&pid("X")], 5);
        assert_eq!(totals[&pid("Y")], 4);
        assert_eq!(totals[&pid("Z")], 3);
    }

    #[test]
    fn borda_unanimous_and_split() {
        let cands = two_candidates();
        let unanimous: Vec<Ballot> = ["a", "b", "c", "d"]
            .iter()
            .map(|v| ballot(v, &["X", "Y"]))
            .collect();
        let totals = borda_scores(&unanimous, &cands).unwrap();
        assert_eq!(totals[&pid("X")], 4);
        assert_eq!(totals[&pid("Y")], 0);

        let split = vec![
            ballot("a", &["X", "Y"]),
            ballot("b", &["X", "Y"]),
            ballot("c", &["Y", "X"]),
            ballot("d", &["Y", "X"]),
        ];
        let totals = borda_scores(&split, &cands).unwrap();
        assert_eq!(totals[&pid("X")], 2);
        assert_eq!(totals[&pid("Y")], 2);
    }

    fn group_noms(w_x: f64, w_y: f64) -> Vec<SelfNomination> {
        noms(&[("X", w_x), ("Y", w_y), ("a", 1.0), ("b", 1.0)])
    }

    #[test]
    fn resolve_condorcet_majority() {
        let cands = CandidateSet::from_members(vec![pid("X"), pid("Y")]).unwrap();
        let ballots = vec![
            ballot("X", &["X", "Y"]),
            ballot("Y", &["X", "Y"]),
            ballot("a", &["X", "Y"]),
            ballot("b", &["Y", "X"]),
        ];
        let outcome = resolve_election(&ballots, &cands, &group_noms(5.0, 5.0), 0).unwrap();
        assert_eq!(outcome.elected, pid("X"));
        assert_eq!(outcome.tiebreak_trace, vec![TieBreakRule::Condorcet]);
    }

    #[test]
    fn resolve_split_falls_through_to_nomination() {
        let cands = CandidateSet::from_members(vec![pid("X"), pid("Y")]).unwrap();
        let ballots = vec![
            ballot("X", &["X", "Y"]),
            ballot("Y", &["Y", "X"]),
            ballot("a", &["X", "Y"]),
            ballot("b", &["Y", "X"]),
        ];
        let outcome = resolve_election(&ballots, &cands, &group_noms(8.0, 6.0), 0).unwrap();
        assert_eq!(outcome.elected, pid("X"));
        assert_eq!(
            outcome.tiebreak_trace,
            vec![
                TieBreakRule::Condorcet,
                TieBreakRule::Borda,
                TieBreakRule::HighestNomination
            ]
        );
    }

    // Brute-force check in `synth` covers all profiles; this is the worked
    // cycle: X ties Z pairwise, so no strict Condorcet winner, and Borda
    // X=5 decides.
    #[test]
    fn resolve_cycle_by_borda() {
        let cands = three_candidates();
        let ballots = vec![
            ballot("X", &["X", "Y", "Z"]),
            ballot("Y", &["Y", "Z", "X"]),
            ballot("Z", &["Z", "X", "Y"]),
            ballot("d", &["X", "Y", "Z"]),
        ];
        let nominations = noms(&[("X", 5.0), ("Y", 5.0), ("Z", 5.0), ("d", 1.0)]);
        let outcome = resolve_election(&ballots, &cands, &nominations, 0).unwrap();
        assert_eq!(outcome.elected, pid("X"));
        assert_eq!(
            outcome.tiebreak_trace,
            vec![TieBreakRule::Condorcet, TieBreakRule::Borda]
        );
    }

    #[test]
    fn resolve_seeded_draw_is_deterministic() {
        let cands = CandidateSet::from_members(vec![pid("X"), pid("Y")]).unwrap();
        let ballots = vec![
            ballot("X", &["X", "Y"]),
            ballot("Y", &["Y", "X"]),
            ballot("a", &["X", "Y"]),
            ballot("b", &["Y", "X"]),
        ];
        let nominations = group_noms(5.0, 5.0);
        let first = resolve_election(&ballots, &cands, &nominations, 9).unwrap();
        let second = resolve_election(&ballots, &cands, &nominations, 9).unwrap();
        assert_eq!(first, second);
        assert_eq!(
            first.tiebreak_trace,
            vec![
                TieBreakRule::Condorcet,
                TieBreakRule::Borda,
                TieBreakRule::HighestNomination,
                TieBreakRule::SeededDraw
            ]
        );
    }

    #[test]
    fn resolve_rejects_wrong_ballot_count() {
        let cands = two_candidates();
        let ballots = vec![ballot("X", &["X", "Y"])];
        assert!(matches!(
            resolve_election(&ballots, &cands, &group_noms(5.0, 5.0), 0),
            Err(ElectionError::WrongBallotCount { .. })
        ));
    }

    #[test]
    fn optimal_leaders_cases() {
        let strict = optimal_leaders(&scores(&[("A", 10), ("B", 7), ("C", 5), ("D", 3)], 10)).unwrap();
        assert_eq!(strict, BTreeSet::from([pid("A")]));

        let tie = optimal_leaders(&scores(&[("A", 6), ("B", 6), ("C", 2), ("D", 1)], 10)).unwrap();
        assert_eq!(tie, BTreeSet::from([pid("A"), pid("B")]));

        let all = optimal_leaders(&scores(&[("A", 4), ("B", 4), ("C", 4), ("D", 4)], 10)).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn gap_self_exclusion() {
        let s = scores(&[("A", 10), ("B", 7), ("C", 5), ("D", 3)], 10);
        let cands = CandidateSet::from_members(vec![pid("B"), pid("C")]).unwrap();
        let gap = leader_gap("g", &s, &cands, &pid("B"), 10).unwrap();
        assert_eq!(gap.delta_total, 3);
        assert_eq!(gap.delta_self, 3);
        assert_eq!(gap.delta_peer, 0);
        assert!((gap.normalized_total - 0.3).abs() < 1e-12);
    }

    #[test]
    fn gap_peer_exclusion() {
        let s = scores(&[("A", 4), ("B", 9), ("C", 2), ("D", 1)], 10);
        let cands = CandidateSet::from_members(vec![pid("A"), pid("B")]).unwrap();
        let gap = leader_gap("g", &s, &cands, &pid("A"), 10).unwrap();
        assert_eq!(gap.delta_total, 5);
        assert_eq!(gap.delta_self, 0);
        assert_eq!(gap.delta_peer, 5);
    }

    #[test]
    fn gap_zero_when_optimal_elected() {
        let s = scores(&[("A", 4), ("B", 9), ("C", 2), ("D", 1)], 10);
        let cands = CandidateSet::from_members(vec![pid("A"), pid("B")]).unwrap();
        let gap = leader_gap("g", &s, &cands, &pid("B"), 10).unwrap();
        assert_eq!(gap.delta_total, 0);
        assert_eq!(gap.delta_self, 0);
        assert_eq!(gap.delta_peer, 0);
    }

    #[test]
    fn gap_rejects_elected_outside_candidates() {
        let s = scores(&[("A", 4), ("B", 9), ("C", 2), ("D", 1)], 10);
        let cands = CandidateSet::from_members(vec![pid("A"), pid("B")]).unwrap();
        assert!(matches!(
            leader_gap("g", &s, &cands, &pid("C"), 10),
            Err(ElectionError::ElectedNotCandidate(_))
        ));
    }
}
