//! Provider abstraction: a single text-in/text-out completion contract with
//! per-vendor HTTP adapters behind it, a retry loop with backoff, and a
//! deterministic stub for offline runs and tests.

use std::time::Duration;

use serde_json::{json, Value};

use crate::election::ParticipantId;
use crate::protocol::StageId;
use crate::seed::derive_seed;

use super::parse::CandidateLabel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited by provider")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP {status}: {detail}")]
    Http { status: u16, detail: String },
    #[error("credential problem: {0}")]
    Auth(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("retry policy exhausted after {attempts} attempts; last error: {last}")]
    Exhausted { attempts: u32, last: String },
}

impl ProviderError {
    /// Whether another attempt could plausibly succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::RateLimited | ProviderError::Timeout => {
                true
            }
            ProviderError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }

    /// Short token recorded in traces.
    pub fn kind(&self) -> &'static str {
        match self {
            ProviderError::Transport(_) => "transport",
            ProviderError::RateLimited => "rate_limited",
            ProviderError::Timeout => "timeout",
            ProviderError::Http { .. } => "http",
            ProviderError::Auth(_) => "auth",
            ProviderError::Malformed(_) => "malformed",
            ProviderError::Exhausted { .. } => "exhausted",
        }
    }
}

/// Wire-protocol family for the HTTP adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vendor {
    /// Deterministic offline stub.
    Stub,
    /// OpenAI-style `/chat/completions`.
    OpenAiChat,
    /// Anthropic-style `/v1/messages`.
    AnthropicMessages,
    /// Google-style `models/{model}:generateContent`.
    GoogleGenerateContent,
}

impl Vendor {
    pub fn parse(token: &str) -> Option<Vendor> {
        Some(match token {
            "stub" => Vendor::Stub,
            "openai" => Vendor::OpenAiChat,
            "anthropic" => Vendor::AnthropicMessages,
            "google" => Vendor::GoogleGenerateContent,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Vendor::Stub => "stub",
            Vendor::OpenAiChat => "openai",
            Vendor::AnthropicMessages => "anthropic",
            Vendor::GoogleGenerateContent => "google",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
            backoff_factor: 2.0,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = self.backoff_factor.powi(attempt.saturating_sub(1) as i32);
        self.backoff_base.mul_f64(factor)
    }
}

/// Everything needed to dispatch requests for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub vendor: Vendor,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout: Duration,
    /// Bounded parallelism across groups; at least 1.
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the API key. The secret
    /// itself is never stored.
    pub api_key_env: Option<String>,
    /// Re-asks allowed when a reply fails to parse.
    pub reask_max: u32,
    /// Allow identity-conditioned simulation over synthetic transcripts.
    pub force_synthetic_transcripts: bool,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            vendor: Vendor::Stub,
            endpoint: String::new(),
            model: "stub".to_string(),
            temperature: 1.0,
            max_output_tokens: 1024,
            timeout: Duration::from_secs(60),
            max_parallel: 1,
            retry: RetryPolicy::default(),
            api_key_env: None,
            reask_max: 3,
            force_synthetic_transcripts: false,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), super::AgentError> {
        if self.max_parallel == 0 {
            return Err(super::AgentError::InvalidConfig(
                "max_parallel must be at least 1".into(),
            ));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(super::AgentError::InvalidConfig(
                "temperature must be a non-negative finite number".into(),
            ));
        }
        if self.retry.max_attempts == 0 {
            return Err(super::AgentError::InvalidConfig(
                "retry.max_attempts must be at least 1".into(),
            ));
        }
        if self.vendor != Vendor::Stub && self.endpoint.is_empty() {
            return Err(super::AgentError::InvalidConfig(
                "endpoint is required for HTTP vendors".into(),
            ));
        }
        Ok(())
    }
}

/// Request metadata alongside the prompt text. HTTP adapters ignore it; the
/// stub and trace sink use it.
#[derive(Debug, Clone)]
pub struct RequestMeta<'a> {
    pub group_id: &'a str,
    pub participant: &'a ParticipantId,
    pub stage: StageId,
    pub candidates: Option<&'a [CandidateLabel]>,
    pub question_ids: Option<&'a [String]>,
}

#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub meta: RequestMeta<'a>,
}

/// Single text-in/text-out completion contract. Vendor differences live
/// entirely behind implementations of this trait.
pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

/// One provider attempt as recorded in the trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    /// "ok" or an error kind token.
    pub outcome: String,
}

/// Dispatches a request with retries per the policy. Every attempt is
/// recorded; retryable failures back off and retry, terminal failures and
/// exhaustion return an error.
pub fn request_completion(
    provider: &dyn CompletionProvider,
    request: &CompletionRequest<'_>,
    retry: &RetryPolicy,
) -> (Result<String, ProviderError>, Vec<AttemptRecord>) {
    let mut attempts = Vec::new();
    for attempt in 1..=retry.max_attempts {
        match provider.complete(request) {
            Ok(text) => {
                attempts.push(AttemptRecord {
                    attempt,
                    outcome: "ok".to_string(),
                });
                return (Ok(text), attempts);
            }
            Err(err) => {
                attempts.push(AttemptRecord {
                    attempt,
                    outcome: err.kind().to_string(),
                });
                if err.is_retryable() && attempt < retry.max_attempts {
                    std::thread::sleep(retry.backoff(attempt));
                    continue;
                }
                let terminal = if attempt == retry.max_attempts && err.is_retryable() {
                    ProviderError::Exhausted {
                        attempts: attempt,
                        last: err.to_string(),
                    }
                } else {
                    err
                };
                return (Err(terminal), attempts);
            }
        }
    }
    unreachable!("max_attempts >= 1");
}

/// Deterministic offline provider: replies are derived from the run seed,
/// group, participant, and stage, and always parse. Used for tests,
/// determinism checks, and dry runs.
pub struct StubProvider {
    seed: u64,
}

impl StubProvider {
    pub fn new(seed: u64) -> Self {
        StubProvider { seed }
    }

    fn scoped(&self, meta: &RequestMeta<'_>, scope: &str) -> u64 {
        derive_seed(
            self.seed,
            &format!("stub/{}/{}/{}/{scope}", meta.group_id, meta.participant, meta.stage),
        )
    }
}

impl CompletionProvider for StubProvider {
    fn name(&self) -> String {
        "stub".to_string()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let meta = &request.meta;
        Ok(match meta.stage {
            StageId::Profile => "Hello, I'm ready to work with the group.".to_string(),
            StageId::Discussion => {
                "Each member engaged with the item ranking; I weighed how clearly they reasoned about priorities.".to_string()
            }
            StageId::SelfNomination => {
                let w = (self.scoped(meta, "w") % 101) as f64 / 10.0;
                format!("{w:.1}")
            }
            StageId::ElectionBallot => {
                let candidates = meta.candidates.unwrap_or(&[]);
                let mut order: Vec<&CandidateLabel> = candidates.iter().collect();
                order.sort_by_key(|c| self.scoped(meta, &format!("rank/{}", c.label)));
                order
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{}. {}", i + 1, c.label))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            StageId::Task => {
                let options = ["a", "b", "c", "d"];
                meta.question_ids
                    .unwrap_or(&[])
                    .iter()
                    .map(|id| {
                        let pick = options[(self.scoped(meta, &format!("answer/{id}")) % 4) as usize];
                        format!("{id}: {pick}")
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        })
    }
}

/// HTTPS chat-completion adapter. The request and response shapes differ
/// per vendor; everything else (retries, parsing, tracing) is shared.
pub struct HttpChatProvider {
    vendor: Vendor,
    endpoint: String,
    api_key_env: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        if config.vendor == Vendor::Stub {
            return Err(ProviderError::Malformed(
                "stub vendor does not use the HTTP adapter".to_string(),
            ));
        }
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build();
        Ok(HttpChatProvider {
            vendor: config.vendor,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            api_key_env: config.api_key_env.clone(),
            agent: agent_config.into(),
        })
    }

    fn api_key(&self) -> Result<String, ProviderError> {
        let var = self.api_key_env.as_deref().ok_or_else(|| {
            ProviderError::Auth("no credential environment variable configured".to_string())
        })?;
        std::env::var(var)
            .map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set")))
    }

    fn extract_text(&self, body: &Value) -> Option<String> {
        let text = match self.vendor {
            Vendor::Stub => return None,
            Vendor::OpenAiChat => body
                .pointer("/choices/0/message/content")?
                .as_str()?
                .to_string(),
            Vendor::AnthropicMessages => body.pointer("/content/0/text")?.as_str()?.to_string(),
            Vendor::GoogleGenerateContent => body
                .pointer("/candidates/0/content/parts/0/text")?
                .as_str()?
                .to_string(),
        };
        Some(text)
    }
}

fn map_ureq_error(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::StatusCode(429) => ProviderError::RateLimited,
        ureq::Error::StatusCode(status) => ProviderError::Http {
            status,
            detail: "non-success status".to_string(),
        },
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}

impl CompletionProvider for HttpChatProvider {
    fn name(&self) -> String {
        format!("http:{}", self.vendor.as_str())
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let key = self.api_key()?;
        let (url, payload, headers): (String, Value, Vec<(&str, String)>) = match self.vendor {
            Vendor::Stub => unreachable!("checked in constructor"),
            Vendor::OpenAiChat => (
                format!("{}/chat/completions", self.endpoint),
                json!({
                    "model": request.model,
                    "messages": [{"role": "user", "content": request.prompt}],
                    "temperature": request.temperature,
                    "max_tokens": request.max_output_tokens,
                }),
                vec![("authorization", format!("Bearer {key}"))],
            ),
            Vendor::AnthropicMessages => (
                format!("{}/v1/messages", self.endpoint),
                json!({
                    "model": request.model,
                    "max_tokens": request.max_output_tokens,
                    "temperature": request.temperature,
                    "messages": [{"role": "user", "content": request.prompt}],
                }),
                vec![
                    ("x-api-key", key),
                    ("anthropic-version", "2023-06-01".to_string()),
                ],
            ),
            Vendor::GoogleGenerateContent => (
                format!(
                    "{}/v1beta/models/{}:generateContent?key={key}",
                    self.endpoint, request.model
                ),
                json!({
                    "contents": [{"parts": [{"text": request.prompt}]}],
                    "generationConfig": {
                        "temperature": request.temperature,
                        "maxOutputTokens": request.max_output_tokens,
                    },
                }),
                vec![],
            ),
        };

        let mut call = self.agent.post(&url);
        for (name, value) in headers {
            call = call.header(name, &value);
        }
        let mut response = call.send_json(&payload).map_err(map_ureq_error)?;
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        self.extract_text(&body)
            .ok_or_else(|| ProviderError::Malformed("no completion text in response".to_string()))
    }
}
