//! Stage prompt assembly. Each prompt is built from fixed-order sections:
//! system role instruction, participant profile, experiment structure,
//! previous stages (the agent's own earlier replies, verbatim), and the
//! current stage. Rendering is byte-stable for identical inputs; golden
//! tests pin the exact output.

use crate::protocol::{StageId, TranscriptMessage, STAGE_ORDER};

use super::persona::PersonaContext;
use super::CandidateLabel;

const SYSTEM_BLOCK: &str = "# SYSTEM ROLE INSTRUCTION: LLM PARTICIPANT SIMULATION\n\nYou are simulating a human crowd-worker participant in a multi-stage online experiment, which involves working with a group of 3 other participants to elect the most competent leader to complete a task. Your goal is to behave **realistically and consistently**, as if you were the person defined in the following YOUR PARTICIPANT PROFILE section.";

const EXPERIMENT_STRUCTURE_BLOCK: &str = "# EXPERIMENT STRUCTURE\n\nYou are currently in an experiment that proceeds in multiple sequential stages. At each stage, you may make individual judgements, or reflect on interactions with simulated group members.\n\n*   You will receive current instructions in the **CURRENT STAGE** section.\n*   You may need to consider information or responses from previous stages (if any) to respond appropriately to the current stage.";

const PROFILE_REMINDER: &str = "**Reminder**: This profile defines your identity. All reasoning, language, and judgments should be consistent with this perspective. You are not a neutral observer\u{2014}you are this person.";

const CURRENT_IMPORTANT: &str = "**Important:** You must respond as the person described in the YOUR PARTICIPANT PROFILE section. Your thoughts, reasoning and choices should reflect this identity's likely beliefs, priorities, and lived experience. Do not use general world knowledge or reasoning that your persona would not likely know. You are not a neutral observer \u{2014} you are this person.";

/// Placeholder shown in the previous-stages section before any stage has
/// run.
pub const NO_PREVIOUS_STAGES: &str = "(none)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("history is missing stage {0}")]
    MissingHistory(StageId),
}

/// A rendered prompt, kept as its constituent sections.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePrompt {
    pub system_block: String,
    /// Empty under the no-demographics treatment.
    pub profile_block: String,
    pub previous_stages_block: String,
    pub current_stage_block: String,
}

impl StagePrompt {
    /// Full prompt text in template order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.system_block);
        out.push_str("\n\n___\n\n");
        if !self.profile_block.is_empty() {
            out.push_str(&self.profile_block);
            out.push_str("\n\n___\n\n");
        }
        out.push_str(EXPERIMENT_STRUCTURE_BLOCK);
        out.push_str("\n\n___\n");
        out.push_str(&self.previous_stages_block);
        out.push_str("\n\n___\n");
        out.push_str(&self.current_stage_block);
        out
    }
}

fn demographic_context(persona: &PersonaContext) -> String {
    let mut lines = Vec::new();
    if let Some(identity) = &persona.identity {
        lines.push(format!("- Name: {}", identity.name));
        lines.push(format!("- Pronouns: {}", identity.pronouns));
        lines.push(format!("- Avatar: {}", identity.avatar));
    }
    if let Some(alias) = &persona.alias {
        lines.push(format!("- Your assigned alias in this group: {alias}"));
    }
    if let Some(survey) = &persona.survey {
        lines.push(format!(
            "- Survival experience: {}",
            survey.survival_experience
        ));
        lines.push(format!(
            "- Leadership experience: {}",
            survey.leadership_experience
        ));
        lines.push(format!(
            "- Willingness to take risks (0 = unwilling, 10 = fully willing): {}",
            survey.risk_willingness
        ));
        lines.push(format!(
            "- Belief about who is better at survival tasks (1 = men are better, 10 = women are better): {}",
            survey.gender_task_belief
        ));
        lines.push(format!(
            "- Belief about who makes better leaders (1 = men are better, 10 = women are better): {}",
            survey.gender_leader_belief
        ));
    }
    lines.join("\n")
}

/// Assembles the prompt for one stage. `history` must hold the agent's raw
/// replies for every stage before `stage`, in stage order.
pub fn render_stage_prompt(
    persona: &PersonaContext,
    history: &[(StageId, String)],
    stage: StageId,
    stage_materials: &str,
) -> Result<StagePrompt, PromptError> {
    for expected in &STAGE_ORDER[..stage.index()] {
        if !history.iter().any(|(s, _)| s == expected) {
            return Err(PromptError::MissingHistory(*expected));
        }
    }

    let profile_block = {
        let context = demographic_context(persona);
        if context.is_empty() {
            String::new()
        } else {
            format!("# YOUR PARTICIPANT PROFILE\n\n{context}\n\n{PROFILE_REMINDER}")
        }
    };

    let previous = if history.is_empty() {
        NO_PREVIOUS_STAGES.to_string()
    } else {
        history
            .iter()
            .map(|(s, reply)| format!("## STAGE {}: {}\n\n{}", s.index() + 1, s.name(), reply))
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    let previous_stages_block = format!("# PREVIOUS STAGES\n\n{previous}");

    let metadata = format!(
        "Stage {} of {}: {}. You are participating as \"{}\".",
        stage.index() + 1,
        STAGE_ORDER.len(),
        stage.name(),
        persona.self_label
    );
    let mut current_stage_block = format!("# CURRENT STAGE\n\n{metadata}\n{stage_materials}");
    if !profile_block.is_empty() {
        current_stage_block.push_str("\n\n");
        current_stage_block.push_str(CURRENT_IMPORTANT);
    }

    Ok(StagePrompt {
        system_block: SYSTEM_BLOCK.to_string(),
        profile_block,
        previous_stages_block,
        current_stage_block,
    })
}

fn peer_roster(persona: &PersonaContext) -> String {
    persona
        .peers
        .iter()
        .map(|p| match &p.pronouns {
            Some(pronouns) => format!("- {} ({pronouns})", p.label),
            None => format!("- {}", p.label),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Stage context for the profile (setup) stage.
pub fn profile_materials(persona: &PersonaContext) -> String {
    format!(
        "Set up your participation. In one or two sentences, introduce yourself to your group.\nYour group members appear to you as:\n{}",
        peer_roster(persona)
    )
}

/// Stage context for the discussion-evaluation stage: the recorded group
/// transcript plus an assessment instruction.
pub fn discussion_materials(persona: &PersonaContext, transcript: &[TranscriptMessage]) -> String {
    let lines = transcript
        .iter()
        .map(|m| format!("{}: {}", m.speaker_alias, m.text))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Your group discussed which salvaged items matter most for survival at sea. Read the transcript, then assess each group member's potential as the group's leader in 2-4 sentences.\nYour group members appear to you as:\n{}\n\nTranscript:\n{lines}",
        peer_roster(persona)
    )
}

/// Stage context for the self-nomination stage.
pub fn nomination_materials() -> String {
    "State how willing you are to be the group's leader for the upcoming task. Respond with a single number from 0 (not willing at all) to 10 (fully willing), and nothing else.".to_string()
}

/// Stage context for the ballot stage over the given candidates.
pub fn ballot_materials(candidates: &[CandidateLabel]) -> String {
    let labels = candidates
        .iter()
        .map(|c| c.label.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "The eligible leader candidates are: {labels}.\nRank every candidate from most to least preferred as a numbered list, one candidate per line."
    )
}

/// Stage context for the individual task stage.
pub fn task_materials(question_ids: &[String]) -> String {
    format!(
        "Complete the survival task individually. For each item id below, reply with your chosen option letter (a, b, c, or d), one line per item, in the form \"q1: a\".\nItems: {}",
        question_ids.join(", ")
    )
}

/// Suffix appended to the stage materials when a reply failed to parse and
/// the agent is re-asked.
pub fn format_reminder(stage: StageId) -> &'static str {
    match stage {
        StageId::Profile | StageId::Discussion => {
            "\n\nFormat reminder: reply with a short plain-text answer."
        }
        StageId::SelfNomination => {
            "\n\nFormat reminder: respond with a single number between 0 and 10, nothing else."
        }
        StageId::ElectionBallot => {
            "\n\nFormat reminder: list every candidate exactly once as a numbered ranking, one per line."
        }
        StageId::Task => "\n\nFormat reminder: reply one line per item in the form \"q1: a\".",
    }
}
