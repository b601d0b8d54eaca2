//! Matched LLM-agent cohorts: treatment-conditioned persona construction,
//! stage-wise prompt rendering with forward-propagated responses,
//! provider-agnostic completion requests with retries, strict response
//! parsing, and the bounded-parallel cohort runner.

pub mod parse;
pub mod persona;
pub mod prompt;
pub mod provider;
pub mod runner;
pub mod trace;

pub use parse::{parse_stage_response, CandidateLabel, ParseContext, ParseError, ParsedValue};
pub use persona::{build_persona, PeerView, PersonaContext, PersonaIdentity};
pub use prompt::{render_stage_prompt, StagePrompt};
pub use provider::{
    request_completion, AttemptRecord, CompletionProvider, CompletionRequest, ProviderConfig,
    ProviderError, RequestMeta, RetryPolicy, StubProvider, Vendor,
};
pub use runner::{run_agent_cohort, ExclusionRecord, SimulationOutcome};
pub use trace::{write_trace_events, StageEvent};

use crate::protocol::Treatment;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("treatment {treatment} requires an alias but participant {participant} has none")]
    MissingAlias {
        treatment: Treatment,
        participant: String,
    },
    #[error(
        "cohort has synthetic transcripts; refusing {treatment} simulation without an explicit override"
    )]
    SyntheticTranscripts { treatment: Treatment },
    #[error("cohort header marks this cohort human-only; {treatment} is a simulation-only condition")]
    HumanOnlyCohort { treatment: Treatment },
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}
