//! Treatment-conditioned persona construction. What an agent knows about
//! itself and sees of its peers depends on the identity-visibility
//! condition; the no-demographics counterfactual strips every identity and
//! survey field.

use crate::protocol::{ParticipantRecord, SurveyResponses, Treatment};

use super::AgentError;

/// The agent's own identity fields, present unless the treatment strips
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaIdentity {
    pub name: String,
    pub pronouns: String,
    pub avatar: String,
}

/// How one peer appears to the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerView {
    /// Display name (identified) or alias (pseudonymous-derived).
    pub label: String,
    /// Visible pronouns; only under the identified treatment.
    pub pronouns: Option<String>,
}

/// Everything injected into an agent's prompts for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaContext {
    pub treatment: Treatment,
    /// How the agent itself appears to the group.
    pub self_label: String,
    pub identity: Option<PersonaIdentity>,
    pub survey: Option<SurveyResponses>,
    /// Assigned alias, when the treatment uses one.
    pub alias: Option<String>,
    pub peers: Vec<PeerView>,
}

/// Builds the persona for one member given the rest of the group.
///
/// Identified and pseudonymous personas carry the member's demographics and
/// survey answers; peers appear by name with pronouns (identified) or by
/// alias only (pseudonymous-derived). The no-demographics persona contains
/// nothing but the alias needed to locate itself in the transcript.
pub fn build_persona(
    record: &ParticipantRecord,
    peers: &[&ParticipantRecord],
    treatment: Treatment,
) -> Result<PersonaContext, AgentError> {
    if treatment.is_pseudonymous_derived() && record.pseudonym.is_none() {
        return Err(AgentError::MissingAlias {
            treatment,
            participant: record.id.to_string(),
        });
    }

    // The alias appears in the profile block only when the persona carries
    // identity context; under no-demographics the agent still participates
    // under its alias (via stage metadata) but the profile stays empty.
    let alias = (treatment == Treatment::Pseudonymous)
        .then(|| record.pseudonym.as_ref().map(|p| p.as_str().to_string()))
        .flatten();
    let self_label = record.visible_alias(treatment).to_string();
    let peers = peers
        .iter()
        .map(|p| PeerView {
            label: p.visible_alias(treatment).to_string(),
            pronouns: (treatment == Treatment::Identified)
                .then(|| p.profile.pronouns.clone()),
        })
        .collect();

    let (identity, survey) = match treatment {
        Treatment::NoDemographics => (None, None),
        Treatment::Identified | Treatment::Pseudonymous => (
            Some(PersonaIdentity {
                name: record.profile.display_name.clone(),
                pronouns: record.profile.pronouns.clone(),
                avatar: record.profile.avatar.clone(),
            }),
            Some(record.survey.clone()),
        ),
    };

    Ok(PersonaContext {
        treatment,
        self_label,
        identity,
        survey,
        alias,
        peers,
    })
}
