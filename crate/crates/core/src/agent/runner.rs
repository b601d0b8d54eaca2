//! Simulated cohort construction: one agent per human participant, same
//! groups, consuming the recorded human transcript. Groups run under a
//! bounded worker pool; each group is a pure function of its inputs and the
//! run seed, so results are invariant to parallelism degree and execution
//! order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;

use crate::protocol::{
    run_session, validate_group, Cohort, CohortKind, GroupRecord, SessionError, StageContext,
    StageId, StageOutput, StageResponder, TaskKey, Treatment,
};

use super::parse::{parse_stage_response, CandidateLabel, ParseContext, ParsedValue};
use super::persona::{build_persona, PersonaContext};
use super::prompt::{
    ballot_materials, discussion_materials, format_reminder, nomination_materials,
    profile_materials, render_stage_prompt, task_materials,
};
use super::provider::{
    request_completion, AttemptRecord, CompletionProvider, CompletionRequest, ProviderConfig,
    RequestMeta,
};
use super::trace::{now_unix_ms, StageEvent};
use super::AgentError;

/// A group dropped from the simulated cohort, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionRecord {
    pub group_id: String,
    pub reason: String,
}

/// Result of simulating a cohort: the completed groups, per-group
/// exclusions, and the full stage-event trace (partial traces are kept for
/// excluded groups).
#[derive(Debug)]
pub struct SimulationOutcome {
    pub cohort: Cohort,
    pub excluded: Vec<ExclusionRecord>,
    pub traces: Vec<StageEvent>,
}

struct AgentSession {
    persona: PersonaContext,
    history: Vec<(StageId, String)>,
}

struct AgentResponder<'a> {
    provider: &'a dyn CompletionProvider,
    config: &'a ProviderConfig,
    treatment: Treatment,
    question_ids: Vec<String>,
    sessions: Vec<AgentSession>,
    events: Vec<StageEvent>,
}

impl AgentResponder<'_> {
    fn candidate_labels(&self, ctx: &StageContext<'_>) -> Vec<CandidateLabel> {
        ctx.candidates
            .map(|set| {
                set.members()
                    .iter()
                    .map(|id| CandidateLabel {
                        id: id.clone(),
                        label: ctx
                            .group
                            .member(id)
                            .map(|m| m.visible_alias(self.treatment).to_string())
                            .unwrap_or_else(|| id.to_string()),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl StageResponder for AgentResponder<'_> {
    fn respond(
        &mut self,
        member_index: usize,
        ctx: &StageContext<'_>,
    ) -> Result<StageOutput, SessionError> {
        let member = &ctx.group.members[member_index];
        let stage = ctx.stage;
        let candidates = self.candidate_labels(ctx);
        let session = &mut self.sessions[member_index];

        let base_materials = match stage {
            StageId::Profile => profile_materials(&session.persona),
            StageId::Discussion => discussion_materials(&session.persona, &ctx.group.transcript),
            StageId::SelfNomination => nomination_materials(),
            StageId::ElectionBallot => ballot_materials(&candidates),
            StageId::Task => task_materials(&self.question_ids),
        };
        let parse_ctx = ParseContext {
            candidates: (stage == StageId::ElectionBallot).then_some(candidates.as_slice()),
            question_ids: (stage == StageId::Task).then_some(self.question_ids.as_slice()),
        };

        let started = now_unix_ms();
        let mut all_attempts: Vec<AttemptRecord> = Vec::new();
        let mut last_parse_error = None;
        for reask in 0..=self.config.reask_max {
            let mut materials = base_materials.clone();
            if reask > 0 {
                materials.push_str(format_reminder(stage));
            }
            let prompt = render_stage_prompt(&session.persona, &session.history, stage, &materials)
                .map_err(|e| SessionError::Responder {
                    member: member.id.clone(),
                    stage,
                    message: e.to_string(),
                })?;
            let rendered = prompt.render();

            let request = CompletionRequest {
                model: &self.config.model,
                prompt: &rendered,
                temperature: self.config.temperature,
                max_output_tokens: self.config.max_output_tokens,
                meta: RequestMeta {
                    group_id: &ctx.group.group_id,
                    participant: &member.id,
                    stage,
                    candidates: parse_ctx.candidates,
                    question_ids: parse_ctx.question_ids,
                },
            };
            let (result, attempts) = request_completion(self.provider, &request, &self.config.retry);
            all_attempts.extend(attempts);

            let raw = match result {
                Ok(raw) => raw,
                Err(err) => {
                    self.events.push(StageEvent {
                        group_id: ctx.group.group_id.clone(),
                        participant: member.id.clone(),
                        stage,
                        prompt: rendered,
                        raw_reply: String::new(),
                        parsed: None,
                        attempts: all_attempts,
                        reasks: reask,
                        started_unix_ms: started,
                        finished_unix_ms: now_unix_ms(),
                        outcome: err.kind().to_string(),
                    });
                    return Err(SessionError::Responder {
                        member: member.id.clone(),
                        stage,
                        message: err.to_string(),
                    });
                }
            };

            match parse_stage_response(stage, &raw, &parse_ctx) {
                Ok(parsed) => {
                    let (output, parsed_json) = match parsed {
                        ParsedValue::Text(t) => {
                            let v = json!(t);
                            (StageOutput::Text(t), v)
                        }
                        ParsedValue::Nomination(w) => (StageOutput::Nomination(w), json!(w)),
                        ParsedValue::Ranking(r) => {
                            let v = json!(r);
                            (StageOutput::Ranking(r), v)
                        }
                        ParsedValue::Answers(a) => {
                            let v = serde_json::to_value(&a).expect("answers serialize");
                            (StageOutput::Answers(a), v)
                        }
                    };
                    self.events.push(StageEvent {
                        group_id: ctx.group.group_id.clone(),
                        participant: member.id.clone(),
                        stage,
                        prompt: rendered,
                        raw_reply: raw.clone(),
                        parsed: Some(parsed_json),
                        attempts: all_attempts,
                        reasks: reask,
                        started_unix_ms: started,
                        finished_unix_ms: now_unix_ms(),
                        outcome: "ok".to_string(),
                    });
                    session.history.push((stage, raw));
                    return Ok(output);
                }
                Err(parse_err) => {
                    last_parse_error = Some((parse_err, rendered, raw));
                }
            }
        }

        let (parse_err, rendered, raw) = last_parse_error.expect("loop ran at least once");
        self.events.push(StageEvent {
            group_id: ctx.group.group_id.clone(),
            participant: member.id.clone(),
            stage,
            prompt: rendered,
            raw_reply: raw,
            parsed: None,
            attempts: all_attempts,
            reasks: self.config.reask_max,
            started_unix_ms: started,
            finished_unix_ms: now_unix_ms(),
            outcome: format!("parse_error:{parse_err}"),
        });
        Err(SessionError::Responder {
            member: member.id.clone(),
            stage,
            message: format!(
                "reply failed to parse after {} re-asks: {parse_err}",
                self.config.reask_max
            ),
        })
    }
}

/// Strips recorded stage outputs and applies the simulation treatment so
/// agents produce everything fresh. The transcript is kept verbatim.
fn prepare_group(group: &GroupRecord, treatment: Treatment) -> GroupRecord {
    let mut out = group.clone();
    out.treatment = treatment;
    if treatment == Treatment::Identified {
        for m in &mut out.members {
            m.pseudonym = None;
        }
    }
    for m in &mut out.members {
        m.nomination = None;
        m.ballot = None;
        m.task_answers = None;
        m.score = None;
    }
    out.election = None;
    out.gap = None;
    out
}

fn simulate_group(
    group: &GroupRecord,
    treatment: Treatment,
    provider: &dyn CompletionProvider,
    config: &ProviderConfig,
    key: &TaskKey,
    seed: u64,
) -> (Result<GroupRecord, ExclusionRecord>, Vec<StageEvent>) {
    let exclude = |reason: String| ExclusionRecord {
        group_id: group.group_id.clone(),
        reason,
    };

    if group.transcript.is_empty() {
        return (
            Err(exclude("no discussion transcript recorded".to_string())),
            Vec::new(),
        );
    }
    let template = prepare_group(group, treatment);
    let violations = validate_group(&template);
    if !violations.is_empty() {
        let detail = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return (Err(exclude(format!("invalid under {treatment}: {detail}"))), Vec::new());
    }

    let mut sessions = Vec::with_capacity(template.members.len());
    for (i, member) in template.members.iter().enumerate() {
        let peers: Vec<&crate::protocol::ParticipantRecord> = template
            .members
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, m)| m)
            .collect();
        match build_persona(member, &peers, treatment) {
            Ok(persona) => sessions.push(AgentSession {
                persona,
                history: Vec::new(),
            }),
            Err(e) => return (Err(exclude(e.to_string())), Vec::new()),
        }
    }

    let mut responder = AgentResponder {
        provider,
        config,
        treatment,
        question_ids: key.question_ids(),
        sessions,
        events: Vec::new(),
    };
    match run_session(&template, &mut responder, key, seed) {
        Ok(done) => (Ok(done), responder.events),
        Err(e) => (Err(exclude(e.to_string())), responder.events),
    }
}

/// Runs one round-robin worker pool over the group indexes.
fn run_bounded<T: Send>(
    items: usize,
    workers: usize,
    job: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..items).map(|_| None).collect());
    let worker_count = workers.clamp(1, items.max(1));
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items {
                    break;
                }
                let out = job(i);
                results.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|slot| slot.expect("every index visited"))
        .collect()
}

/// Builds a matched simulated cohort from a human cohort: one agent per
/// participant, same groups, agents consuming the recorded transcript and
/// never generating discussion. Provider exhaustion or unparseable replies
/// exclude the affected group; other groups are unaffected.
///
/// Identity-conditioned treatments refuse to run over synthetic transcripts
/// unless the config explicitly forces it.
pub fn run_agent_cohort(
    human: &Cohort,
    treatment: Treatment,
    provider: &dyn CompletionProvider,
    config: &ProviderConfig,
    key: &TaskKey,
    seed: u64,
) -> Result<SimulationOutcome, AgentError> {
    config.validate()?;
    if treatment != Treatment::NoDemographics
        && !config.force_synthetic_transcripts
        && human.groups.iter().any(GroupRecord::has_synthetic_transcript)
    {
        return Err(AgentError::SyntheticTranscripts { treatment });
    }

    let results = run_bounded(human.groups.len(), config.max_parallel, |i| {
        simulate_group(&human.groups[i], treatment, provider, config, key, seed)
    });

    let mut groups = Vec::new();
    let mut excluded = Vec::new();
    let mut traces = Vec::new();
    for (result, events) in results {
        traces.extend(events);
        match result {
            Ok(group) => groups.push(group),
            Err(record) => excluded.push(record),
        }
    }

    let mut cohort = Cohort::new(groups);
    cohort.header.kind = Some(CohortKind::Simulated);
    cohort.header.model = Some(config.model.clone());
    cohort.header.seed = Some(seed);
    Ok(SimulationOutcome {
        cohort,
        excluded,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::provider::{ProviderError, StubProvider};
    use crate::protocol::cohort::cohort_to_canonical_string;
    use crate::protocol::fixtures::{basic_group, fixture_key};
    use crate::synth::{generate_cohort, SynthConfig};

    fn human_cohort(n: usize, treatment: Treatment) -> Cohort {
        let mut cohort = Cohort::new(
            (0..n)
                .map(|i| basic_group(&format!("g{i:02}"), treatment))
                .collect(),
        );
        cohort.header.kind = Some(CohortKind::Human);
        cohort
    }

    fn stub_config() -> ProviderConfig {
        ProviderConfig::default()
    }

    #[test]
    fn stub_simulation_is_seed_deterministic() {
        let human = human_cohort(4, Treatment::Pseudonymous);
        let provider = StubProvider::new(7);
        let key = fixture_key();
        let a = run_agent_cohort(&human, Treatment::Pseudonymous, &provider, &stub_config(), &key, 7)
            .unwrap();
        let b = run_agent_cohort(&human, Treatment::Pseudonymous, &provider, &stub_config(), &key, 7)
            .unwrap();
        assert!(a.excluded.is_empty());
        assert_eq!(
            cohort_to_canonical_string(&a.cohort),
            cohort_to_canonical_string(&b.cohort)
        );
        assert_eq!(a.cohort.header.kind, Some(CohortKind::Simulated));
        assert_eq!(a.cohort.header.model.as_deref(), Some("stub"));
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let human = human_cohort(99, Treatment::Pseudonymous);
        let provider = StubProvider::new(3);
        let key = fixture_key();
        let serial_config = ProviderConfig {
            max_parallel: 1,
            ..stub_config()
        };
        let parallel_config = ProviderConfig {
            max_parallel: 8,
            ..stub_config()
        };
        let serial =
            run_agent_cohort(&human, Treatment::Pseudonymous, &provider, &serial_config, &key, 11)
                .unwrap();
        let parallel =
            run_agent_cohort(&human, Treatment::Pseudonymous, &provider, &parallel_config, &key, 11)
                .unwrap();
        assert_eq!(
            cohort_to_canonical_string(&serial.cohort),
            cohort_to_canonical_string(&parallel.cohort)
        );
    }

    #[test]
    fn transcripts_pass_through_unchanged() {
        let human = human_cohort(2, Treatment::Identified);
        let provider = StubProvider::new(1);
        let out = run_agent_cohort(
            &human,
            Treatment::Identified,
            &provider,
            &stub_config(),
            &fixture_key(),
            1,
        )
        .unwrap();
        for (sim, src) in out.cohort.groups.iter().zip(&human.groups) {
            assert_eq!(sim.transcript, src.transcript);
            assert!(sim.is_complete());
        }
    }

    #[test]
    fn nd_prompts_contain_no_source_demographics() {
        let human = human_cohort(2, Treatment::Pseudonymous);
        let provider = StubProvider::new(5);
        let out = run_agent_cohort(
            &human,
            Treatment::NoDemographics,
            &provider,
            &stub_config(),
            &fixture_key(),
            5,
        )
        .unwrap();
        assert!(out.excluded.is_empty());
        assert!(!out.traces.is_empty());
        let mut forbidden: Vec<String> = Vec::new();
        for g in &human.groups {
            for m in &g.members {
                forbidden.push(m.profile.display_name.clone());
                forbidden.push(m.profile.pronouns.clone());
                forbidden.push(m.survey.survival_experience.clone());
                forbidden.push(m.survey.leadership_experience.clone());
            }
        }
        for event in &out.traces {
            for token in &forbidden {
                assert!(
                    !event.prompt.contains(token),
                    "prompt for {} at {} leaks {token:?}",
                    event.participant,
                    event.stage
                );
            }
        }
    }

    #[test]
    fn refuses_identity_treatments_on_synthetic_transcripts() {
        let synth = generate_cohort(&SynthConfig {
            n_groups: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        let provider = StubProvider::new(0);
        let key = fixture_key();
        let err = run_agent_cohort(
            &synth,
            Treatment::Pseudonymous,
            &provider,
            &stub_config(),
            &key,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::SyntheticTranscripts { .. }));

        // The no-demographics counterfactual and the forced override run.
        assert!(run_agent_cohort(
            &synth,
            Treatment::NoDemographics,
            &provider,
            &stub_config(),
            &key,
            0
        )
        .is_ok());
        let forced = ProviderConfig {
            force_synthetic_transcripts: true,
            ..stub_config()
        };
        assert!(
            run_agent_cohort(&synth, Treatment::Pseudonymous, &provider, &forced, &key, 0).is_ok()
        );
    }

    /// Fails every request for one group; other groups succeed.
    struct GroupFailingProvider {
        inner: StubProvider,
        failing_group: String,
    }

    impl CompletionProvider for GroupFailingProvider {
        fn name(&self) -> String {
            "group-failing".to_string()
        }

        fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
            if request.meta.group_id == self.failing_group {
                Err(ProviderError::Auth("scripted failure".to_string()))
            } else {
                self.inner.complete(request)
            }
        }
    }

    #[test]
    fn provider_failure_excludes_only_that_group() {
        let human = human_cohort(3, Treatment::Pseudonymous);
        let provider = GroupFailingProvider {
            inner: StubProvider::new(2),
            failing_group: "g01".to_string(),
        };
        let out = run_agent_cohort(
            &human,
            Treatment::Pseudonymous,
            &provider,
            &stub_config(),
            &fixture_key(),
            2,
        )
        .unwrap();
        assert_eq!(out.cohort.groups.len(), 2);
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].group_id, "g01");
    }

    /// Returns garbage for the first nomination request per participant,
    /// then delegates to the stub.
    struct GarbageFirstProvider {
        inner: StubProvider,
        calls: Mutex<std::collections::BTreeMap<String, u32>>,
    }

    impl CompletionProvider for GarbageFirstProvider {
        fn name(&self) -> String {
            "garbage-first".to_string()
        }

        fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
            if request.meta.stage == StageId::SelfNomination {
                let mut calls = self.calls.lock().unwrap();
                let count = calls
                    .entry(request.meta.participant.to_string())
                    .or_insert(0);
                *count += 1;
                if *count == 1 {
                    return Ok("very willing indeed".to_string());
                }
            }
            self.inner.complete(request)
        }
    }

    #[test]
    fn unparseable_reply_triggers_reask_with_reminder() {
        let human = human_cohort(1, Treatment::Pseudonymous);
        let provider = GarbageFirstProvider {
            inner: StubProvider::new(4),
            calls: Mutex::new(Default::default()),
        };
        let out = run_agent_cohort(
            &human,
            Treatment::Pseudonymous,
            &provider,
            &stub_config(),
            &fixture_key(),
            4,
        )
        .unwrap();
        assert!(out.excluded.is_empty());
        let nomination_events: Vec<&StageEvent> = out
            .traces
            .iter()
            .filter(|e| e.stage == StageId::SelfNomination)
            .collect();
        assert_eq!(nomination_events.len(), 4);
        for event in nomination_events {
            assert_eq!(event.reasks, 1);
            assert!(event.prompt.contains("Format reminder"));
            assert_eq!(event.outcome, "ok");
        }
    }

    /// Exceeding the re-ask budget excludes the group, mirroring the
    /// exclusion of incomplete human groups.
    struct AlwaysGarbage;

    impl CompletionProvider for AlwaysGarbage {
        fn name(&self) -> String {
            "always-garbage".to_string()
        }

        fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
            Ok(match request.meta.stage {
                StageId::SelfNomination => "no number here".to_string(),
                _ => "fine".to_string(),
            })
        }
    }

    #[test]
    fn reask_exhaustion_excludes_group() {
        let human = human_cohort(1, Treatment::Pseudonymous);
        let out = run_agent_cohort(
            &human,
            Treatment::Pseudonymous,
            &AlwaysGarbage,
            &stub_config(),
            &fixture_key(),
            0,
        )
        .unwrap();
        assert!(out.cohort.groups.is_empty());
        assert_eq!(out.excluded.len(), 1);
        assert!(out.excluded[0].reason.contains("failed to parse"));
    }

    #[test]
    fn li_on_pseudonymous_transcripts_is_excluded_by_validation() {
        // HP-style source: transcript aliases are animal names; under an
        // identified simulation those aliases no longer resolve.
        let human = human_cohort(1, Treatment::Pseudonymous);
        let provider = StubProvider::new(0);
        let out = run_agent_cohort(
            &human,
            Treatment::Identified,
            &provider,
            &stub_config(),
            &fixture_key(),
            0,
        )
        .unwrap();
        assert!(out.cohort.groups.is_empty());
        assert_eq!(out.excluded.len(), 1);
        assert!(out.excluded[0].reason.contains("speaker_alias"));
    }
}
