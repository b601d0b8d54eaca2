//! Synthetic cohorts with controllable bias knobs, plus independent
//! brute-force oracles used to cross-check the election and binomial
//! implementations.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Map;

use crate::analytics::StatError;
use crate::election::{
    leader_gap, resolve_election, select_candidates, Ballot, CandidateSet, ElectionError,
    ParticipantId, SelfNomination, TaskScore, GROUP_SIZE,
};
use crate::protocol::{
    assign_pseudonyms, AnswerEntry, Cohort, CohortKind, GroupRecord, IdentityProfile,
    ParticipantRecord, ScoreEntry, SurveyResponses, TaskKey, TranscriptMessage, Treatment,
    SYNTHETIC_TRANSCRIPT_MARKER,
};
use crate::seed::derive_seed;

/// Voter-specific perception noise applied to candidate scores when
/// synthesizing ballots, as a fraction of the cohort noise spread.
const BALLOT_PERCEPTION_NOISE: f64 = 0.35;

const MALE_NAMES: [&str; 8] = [
    "Liam", "Noah", "Oscar", "Theo", "Felix", "Hugo", "Jasper", "Rowan",
];
const NON_MALE_NAMES: [&str; 8] = [
    "Ada", "Mira", "Sofia", "Ines", "Freya", "Nadia", "Elif", "Carmen",
];
const AVATARS: [&str; 8] = [
    "compass", "lantern", "anchor", "sextant", "flare", "raft", "whistle", "tarp",
];

/// Gender-neutral animal aliases used for synthetic pseudonyms.
pub const ANIMAL_ROSTER: [&str; 12] = [
    "Bear", "Cat", "Fox", "Owl", "Elk", "Wolf", "Hawk", "Seal", "Crane", "Otter", "Lynx", "Hare",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
}

/// Knobs for synthetic cohort generation. Shifts are additive for
/// male-category members; noise is the standard deviation of the
/// disturbances, in nomination-score units.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_groups: usize,
    pub max_items: u32,
    pub nomination_base: f64,
    pub male_nomination_shift: f64,
    pub score_gender_shift: f64,
    pub noise_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_groups: 88,
            max_items: 6,
            nomination_base: 5.5,
            male_nomination_shift: 0.0,
            score_gender_shift: 0.0,
            noise_spread: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_groups == 0 {
            return Err(SynthError::InvalidConfig("n_groups must be >= 1".into()));
        }
        if self.max_items == 0 {
            return Err(SynthError::InvalidConfig("max_items must be >= 1".into()));
        }
        if self.noise_spread < 0.0 || !self.noise_spread.is_finite() {
            return Err(SynthError::InvalidConfig(
                "noise_spread must be a non-negative finite number".into(),
            ));
        }
        if !(0.0..=10.0).contains(&self.nomination_base) {
            return Err(SynthError::InvalidConfig(
                "nomination_base must lie in [0, 10]".into(),
            ));
        }
        Ok(())
    }
}

/// The fixed multiple-choice key synthetic cohorts are scored against:
/// question ids q1..qM with answers cycling a-d.
pub fn canonical_task_key(max_items: u32) -> TaskKey {
    let options = ["a", "b", "c", "d"];
    TaskKey::new(
        (1..=max_items)
            .map(|i| AnswerEntry {
                id: format!("q{i}"),
                answer: options[(i as usize - 1) % options.len()].to_string(),
            })
            .collect(),
    )
    .expect("max_items >= 1")
}

/// Answers matching the canonical key on exactly `correct` items; wrong
/// answers pick the next option cyclically so they never collide with the
/// key.
pub fn answers_for_score(key: &TaskKey, correct: u32) -> Vec<AnswerEntry> {
    let options = ["a", "b", "c", "d"];
    key.items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let answer = if (i as u32) < correct {
                item.answer.clone()
            } else {
                let at = options.iter().position(|o| *o == item.answer).unwrap_or(0);
                options[(at + 1) % options.len()].to_string()
            };
            AnswerEntry {
                id: item.id.clone(),
                answer,
            }
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates a complete synthetic cohort: balanced groups, nominations and
/// scores drawn around the configured bases with optional male shifts,
/// ballots from noisy perception of candidate nominations, and elections
/// and gaps computed by the real pipeline. Deterministic for a given seed.
pub fn generate_cohort(config: &SynthConfig) -> Result<Cohort, SynthError> {
    config.validate()?;
    let key = canonical_task_key(config.max_items);
    let mut groups = Vec::with_capacity(config.n_groups);
    for gi in 0..config.n_groups {
        groups.push(synth_group(gi, config, &key)?);
    }
    let mut cohort = Cohort::new(groups);
    cohort.header.kind = Some(CohortKind::Synthetic);
    cohort.header.seed = Some(config.seed);
    Ok(cohort)
}

fn synth_group(gi: usize, config: &SynthConfig, key: &TaskKey) -> Result<GroupRecord, SynthError> {
    let group_id = format!("synth-{gi:04}");
    let sub = derive_seed(config.seed, &group_id);
    let mut rng = ChaCha8Rng::seed_from_u64(sub);

    // p1/p3 male, p2/p4 non-male, so canonical order interleaves genders.
    let mut members = Vec::with_capacity(GROUP_SIZE);
    for mi in 0..GROUP_SIZE {
        let male = mi % 2 == 0;
        let names = if male { MALE_NAMES } else { NON_MALE_NAMES };
        let name = names[(gi * 2 + mi / 2) % names.len()];
        let id = ParticipantId::new(format!("{group_id}-p{}", mi + 1)).expect("non-empty");

        let w_mean = config.nomination_base
            + if male { config.male_nomination_shift } else { 0.0 };
        let w = (w_mean + config.noise_spread * normal(&mut rng)).clamp(0.0, 10.0);

        let score_mean = f64::from(config.max_items) / 2.0
            + if male { config.score_gender_shift } else { 0.0 };
        let score_sd = config.noise_spread * f64::from(config.max_items) / 10.0;
        let correct = (score_mean + score_sd * normal(&mut rng))
            .round()
            .clamp(0.0, f64::from(config.max_items)) as u32;

        members.push(ParticipantRecord {
            id,
            profile: IdentityProfile {
                display_name: format!("{name} {}", (b'A' + (gi % 26) as u8) as char),
                avatar: AVATARS[(gi + mi) % AVATARS.len()].to_string(),
                pronouns: if male { "he/him" } else { "she/her" }.to_string(),
                extra: Map::new(),
            },
            pseudonym: None,
            survey: SurveyResponses {
                survival_experience: "No notable survival experience.".to_string(),
                leadership_experience: "Occasional project coordination.".to_string(),
                risk_willingness: rng.random_range(0..=10),
                gender_task_belief: rng.random_range(4..=6),
                gender_leader_belief: rng.random_range(4..=6),
                extra: Map::new(),
            },
            nomination: Some(w),
            ballot: None,
            task_answers: Some(answers_for_score(key, correct)),
            score: Some(ScoreEntry {
                correct,
                max_items: config.max_items,
            }),
            extra: Map::new(),
        });
    }

    let mut group = GroupRecord {
        group_id: group_id.clone(),
        treatment: Treatment::Pseudonymous,
        members,
        transcript: Vec::new(),
        election: None,
        gap: None,
        extra: Map::new(),
    };

    let roster: Vec<String> = ANIMAL_ROSTER.iter().map(|s| s.to_string()).collect();
    group = assign_pseudonyms(&group, &roster, sub)?;

    group.transcript = group
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| TranscriptMessage {
            speaker_alias: m.visible_alias(Treatment::Pseudonymous).to_string(),
            turn_index: i as u32,
            text: format!(
                "{SYNTHETIC_TRANSCRIPT_MARKER} placeholder deliberation turn {i}"
            ),
        })
        .collect();

    // Elections run through the real pipeline.
    let nominations: Vec<SelfNomination> = group
        .canonical_order()
        .into_iter()
        .map(|idx| {
            let m = &group.members[idx];
            SelfNomination::new(m.id.clone(), m.nomination.expect("set above"))
        })
        .collect::<Result<_, _>>()?;
    let candidates = select_candidates(&nominations, derive_seed(sub, "candidates"))?;

    let perceived_noise = BALLOT_PERCEPTION_NOISE * config.noise_spread;
    let order = group.canonical_order();
    for &idx in &order {
        let mut perception: Vec<(usize, f64)> = candidates
            .members()
            .iter()
            .enumerate()
            .map(|(ci, cand)| {
                let w = nominations
                    .iter()
                    .find(|n| &n.participant == cand)
                    .expect("candidate is a member")
                    .score;
                (ci, w + perceived_noise * normal(&mut rng))
            })
            .collect();
        perception.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
        let ranking: Vec<ParticipantId> = perception
            .iter()
            .map(|(ci, _)| candidates.members()[*ci].clone())
            .collect();
        group.members[idx].ballot = Some(ranking);
    }

    let ballots: Vec<Ballot> = order
        .iter()
        .map(|&idx| Ballot {
            voter: group.members[idx].id.clone(),
            ranking: group.members[idx].ballot.clone().expect("set above"),
        })
        .collect();
    let election = resolve_election(&ballots, &candidates, &nominations, derive_seed(sub, "election"))?;

    let scores: Vec<TaskScore> = order
        .iter()
        .map(|&idx| {
            let m = &group.members[idx];
            let s = m.score.expect("set above");
            TaskScore::new(m.id.clone(), s.correct, s.max_items)
        })
        .collect::<Result<_, _>>()?;
    let gap = leader_gap(
        &group_id,
        &scores,
        &election.candidates,
        &election.elected,
        config.max_items,
    )?;

    group.election = Some(election);
    group.gap = Some(gap);
    Ok(group)
}

/// Rebuilds each group's election so the leader is drawn uniformly at
/// random among all four members: nominations tie (the candidate pair is a
/// seeded draw over members) and ballots unanimously back a seeded pick of
/// the pair. Task scores are kept, gaps recomputed.
pub fn uniform_random_elector(
    cohort: &[GroupRecord],
    seed: u64,
) -> Result<Vec<GroupRecord>, SynthError> {
    let mut out = Vec::with_capacity(cohort.len());
    for group in cohort {
        let mut g = group.clone();
        let order = g.canonical_order();
        for &idx in &order {
            g.members[idx].nomination = Some(5.0);
        }
        let nominations: Vec<SelfNomination> = order
            .iter()
            .map(|&idx| SelfNomination::new(g.members[idx].id.clone(), 5.0))
            .collect::<Result<_, _>>()?;
        let candidates = select_candidates(
            &nominations,
            derive_seed(seed, &format!("{}/candidates", g.group_id)),
        )?;

        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{}/winner", g.group_id)));
        let winner_at = rng.random_range(0..candidates.len());
        let mut ranking: Vec<ParticipantId> = candidates.members().to_vec();
        ranking.swap(0, winner_at);

        for &idx in &order {
            g.members[idx].ballot = Some(ranking.clone());
        }
        let ballots: Vec<Ballot> = order
            .iter()
            .map(|&idx| Ballot {
                voter: g.members[idx].id.clone(),
                ranking: ranking.clone(),
            })
            .collect();
        let election = resolve_election(
            &ballots,
            &candidates,
            &nominations,
            derive_seed(seed, &format!("{}/election", g.group_id)),
        )?;

        let scores: Vec<TaskScore> = order
            .iter()
            .map(|&idx| {
                let m = &g.members[idx];
                let s = m
                    .score
                    .ok_or_else(|| SynthError::InvalidConfig(format!("{} has no score", m.id)))?;
                TaskScore::new(m.id.clone(), s.correct, s.max_items).map_err(SynthError::from)
            })
            .collect::<Result<_, _>>()?;
        let max_items = scores[0].max_items;
        g.gap = Some(leader_gap(
            &g.group_id,
            &scores,
            &election.candidates,
            &election.elected,
            max_items,
        )?);
        g.election = Some(election);
        out.push(g);
    }
    Ok(out)
}

/// Independent election oracle: strict Condorcet winner by exhaustive
/// pairwise comparison, else the Borda-maximum set. No further
/// tie-breaking; the result is a set.
pub fn election_oracle(
    ballots: &[Ballot],
    candidates: &CandidateSet,
) -> Result<BTreeSet<ParticipantId>, ElectionError> {
    let members = candidates.members();
    for b in ballots {
        if b.ranking.len() != members.len()
            || members.iter().any(|c| !b.ranking.contains(c))
        {
            return Err(ElectionError::MalformedBallot {
                voter: b.voter.clone(),
            });
        }
    }
    let prefers = |b: &Ballot, x: &ParticipantId, y: &ParticipantId| {
        let px = b.ranking.iter().position(|r| r == x).expect("validated");
        let py = b.ranking.iter().position(|r| r == y).expect("validated");
        px < py
    };

    'next: for c in members {
        for other in members {
            if c == other {
                continue;
            }
            let wins = ballots.iter().filter(|b| prefers(b, c, other)).count();
            let losses = ballots.len() - wins;
            if wins <= losses {
                continue 'next;
            }
        }
        return Ok(BTreeSet::from([c.clone()]));
    }

    let mut best = 0usize;
    let mut totals: Vec<(ParticipantId, usize)> = Vec::new();
    for c in members {
        let mut points = 0usize;
        for b in ballots {
            let at = b.ranking.iter().position(|r| r == c).expect("validated");
            points += b.ranking.len() - 1 - at;
        }
        best = best.max(points);
        totals.push((c.clone(), points));
    }
    Ok(totals
        .into_iter()
        .filter(|(_, p)| *p == best)
        .map(|(c, _)| c)
        .collect())
}

/// Soft-float with a wide exponent so binomial probability masses can be
/// accumulated directly even where f64 would underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WideFloat {
    /// Mantissa in [0.5, 1), or 0.
    m: f64,
    e: i64,
}

impl WideFloat {
    fn zero() -> Self {
        WideFloat { m: 0.0, e: 0 }
    }

    fn from_f64(x: f64) -> Self {
        let (m, e) = frexp(x);
        WideFloat { m, e }
    }

    fn normalized(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::zero();
        }
        let (m2, de) = frexp(m);
        WideFloat { m: m2, e: e + de }
    }

    fn mul_f64(self, x: f64) -> Self {
        Self::normalized(self.m * x, self.e)
    }

    fn add(self, other: Self) -> Self {
        if self.m == 0.0 {
            return other;
        }
        if other.m == 0.0 {
            return self;
        }
        let (hi, lo) = if self.e >= other.e {
            (self, other)
        } else {
            (other, self)
        };
        let shift = hi.e - lo.e;
        if shift > 120 {
            return hi;
        }
        Self::normalized(hi.m + lo.m * 0.5f64.powi(shift as i32), hi.e)
    }

    fn le(self, other: Self) -> bool {
        debug_assert!(self.m >= 0.0 && other.m >= 0.0);
        if self.m == 0.0 {
            return true;
        }
        if other.m == 0.0 {
            return false;
        }
        match self.e.cmp(&other.e) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.m <= other.m,
        }
    }

    fn to_f64(self) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        if self.e > 1024 {
            return f64::INFINITY * self.m.signum();
        }
        if self.e < -1070 {
            return 0.0;
        }
        self.m * 2f64.powi(self.e as i32)
    }
}

/// Splits x into (mantissa in [0.5, 1), exponent) with x = m * 2^e.
fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    if raw_exp == 0 {
        // Subnormal: renormalize first.
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let e = raw_exp - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

/// Exact binomial tail/point-mass summation in extended precision, used as
/// the independent oracle for `analytics::binomial_test_exact`. Probability
/// masses come from the multiplicative recurrence
/// pmf(j+1) = pmf(j) * (n-j)/(j+1) * p/(1-p), not from log-gamma.
pub fn exact_binomial_oracle(
    k: u64,
    n: u64,
    p0: f64,
    alternative: crate::analytics::Alternative,
) -> Result<f64, StatError> {
    if k > n {
        return Err(StatError::DomainViolation(format!("k={k} exceeds n={n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatError::DomainViolation(format!("p0={p0} outside (0, 1)")));
    }
    if n > 10_000 {
        return Err(StatError::DomainViolation(format!(
            "n={n} exceeds the direct-summation bound 10000"
        )));
    }

    let q = 1.0 - p0;
    let ratio = p0 / q;
    let mut pmf = Vec::with_capacity(n as usize + 1);
    let mut current = WideFloat::from_f64(1.0);
    for _ in 0..n {
        current = current.mul_f64(q);
    }
    pmf.push(current);
    for j in 0..n {
        current = current.mul_f64((n - j) as f64 / (j + 1) as f64).mul_f64(ratio);
        pmf.push(current);
    }

    use crate::analytics::Alternative;
    let included: Vec<WideFloat> = match alternative {
        Alternative::Less => pmf[..=(k as usize)].to_vec(),
        Alternative::Greater => pmf[(k as usize)..].to_vec(),
        Alternative::TwoSided => {
            let threshold = pmf[k as usize].mul_f64(1.0 + 1e-7);
            let included: Vec<WideFloat> = pmf
                .iter()
                .copied()
                .filter(|m| m.le(threshold))
                .collect();
            if included.len() == pmf.len() {
                return Ok(1.0);
            }
            included
        }
    };

    // Ascending-magnitude accumulation keeps the sum well conditioned.
    let mut sorted = included;
    sorted.sort_by(|a, b| {
        a.e.cmp(&b.e)
            .then(a.m.partial_cmp(&b.m).expect("mantissas are finite"))
    });
    let mut sum = WideFloat::zero();
    for v in sorted {
        sum = sum.add(v);
    }
    Ok(sum.to_f64().min(1.0))
}
