//! Cohort files: JSON Lines with a schema-version header line followed by
//! one group record per line. Unknown fields are preserved on round-trip,
//! and a canonical serialization (groups sorted by id, keys sorted) backs
//! byte-level determinism checks.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{validate_group, GroupRecord, Treatment, Violation};

/// Version token expected in the header line.
pub const SCHEMA_VERSION: &str = "cohort.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortKind {
    Human,
    Simulated,
    Synthetic,
}

impl CohortKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CohortKind::Human => "human",
            CohortKind::Simulated => "simulated",
            CohortKind::Synthetic => "synthetic",
        }
    }
}

/// First line of a cohort file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortHeader {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CohortKind>,
    /// Provider model token for simulated cohorts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CohortHeader {
    pub fn new() -> Self {
        CohortHeader {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: None,
            model: None,
            seed: None,
            extra: Map::new(),
        }
    }
}

impl Default for CohortHeader {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub header: CohortHeader,
    pub groups: Vec<GroupRecord>,
}

impl Cohort {
    pub fn new(groups: Vec<GroupRecord>) -> Self {
        Cohort {
            header: CohortHeader::new(),
            groups,
        }
    }
}

/// Why a group line was rejected during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDiagnostic {
    /// 1-based line number in the source stream.
    pub line: usize,
    pub group_id: String,
    pub violations: Vec<Violation>,
}

impl fmt::Display for GroupDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} group {}:", self.line, self.group_id)?;
        for v in &self.violations {
            write!(f, " [{v}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("read failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing schema header line")]
    MissingHeader,
    #[error("header parse failure: {0}")]
    HeaderParse(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("{} group(s) rejected; first: {}", .0.len(), .0[0])]
    Rejected(Vec<GroupDiagnostic>),
}

/// Validated groups plus diagnostics for rejected ones.
#[derive(Debug)]
pub struct IngestReport {
    pub cohort: Cohort,
    pub rejected: Vec<GroupDiagnostic>,
}

/// Reads a cohort file, validating every group. Invalid groups are excluded
/// from the returned cohort and reported with their line number, group id,
/// and field paths. Header problems fail the whole ingest.
pub fn ingest_cohort<R: BufRead>(
    reader: R,
    expected_schema: &str,
) -> Result<IngestReport, IngestError> {
    let mut lines = reader.lines();
    let header_line = loop {
        match lines.next() {
            None => return Err(IngestError::MissingHeader),
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let header: CohortHeader = serde_json::from_str(&header_line)
        .map_err(|e| IngestError::HeaderParse(e.to_string()))?;
    if header.schema_version != expected_schema {
        return Err(IngestError::SchemaMismatch {
            expected: expected_schema.to_string(),
            found: header.schema_version,
        });
    }

    let mut groups = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let group: GroupRecord = match serde_json::from_str(&line) {
            Ok(g) => g,
            Err(e) => {
                rejected.push(GroupDiagnostic {
                    line: line_no,
                    group_id: "?".to_string(),
                    violations: vec![Violation {
                        field: "<line>".to_string(),
                        message: format!("invalid JSON: {e}"),
                    }],
                });
                continue;
            }
        };

        let mut violations = validate_group(&group);
        if header.kind == Some(CohortKind::Human) && group.treatment == Treatment::NoDemographics {
            violations.push(Violation {
                field: "treatment".to_string(),
                message: "no_demographics is only valid for simulated cohorts".to_string(),
            });
        }
        if !seen_ids.insert(group.group_id.clone()) {
            violations.push(Violation {
                field: "group_id".to_string(),
                message: format!("duplicate group id {}", group.group_id),
            });
        }

        if violations.is_empty() {
            groups.push(group);
        } else {
            rejected.push(GroupDiagnostic {
                line: line_no,
                group_id: group.group_id.clone(),
                violations,
            });
        }
    }

    Ok(IngestReport {
        cohort: Cohort { header, groups },
        rejected,
    })
}

/// Like [`ingest_cohort`] but fails if any group was rejected.
pub fn ingest_cohort_strict<R: BufRead>(
    reader: R,
    expected_schema: &str,
) -> Result<Cohort, IngestError> {
    let report = ingest_cohort(reader, expected_schema)?;
    if report.rejected.is_empty() {
        Ok(report.cohort)
    } else {
        Err(IngestError::Rejected(report.rejected))
    }
}

/// Writes the cohort in file order: header line, then one group per line.
pub fn write_cohort<W: Write>(cohort: &Cohort, mut writer: W) -> std::io::Result<()> {
    let header = serde_json::to_string(&cohort.header).expect("header serializes");
    writeln!(writer, "{header}")?;
    for group in &cohort.groups {
        let line = serde_json::to_string(group).expect("group serializes");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

/// Canonical serialization: groups sorted by id, object keys in sorted
/// order. Two equal cohorts always produce identical bytes, regardless of
/// the order groups were produced in.
pub fn cohort_to_canonical_string(cohort: &Cohort) -> String {
    let mut sorted = cohort.clone();
    sorted.groups.sort_by(|a, b| a.group_id.cmp(&b.group_id));
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&sorted.header).expect("header serializes"));
    out.push('\n');
    for group in &sorted.groups {
        // Round-trip through Value so maps are emitted with sorted keys.
        let value = serde_json::to_value(group).expect("group serializes");
        out.push_str(&serde_json::to_string(&value).expect("value serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::fixtures::basic_group;

    fn two_group_cohort() -> Cohort {
        Cohort::new(vec![
            basic_group("g1", Treatment::Identified),
            basic_group("g2", Treatment::Identified),
        ])
    }

    #[test]
    fn ingest_well_formed_cohort() {
        let mut buf = Vec::new();
        write_cohort(&two_group_cohort(), &mut buf).unwrap();
        let report = ingest_cohort(buf.as_slice(), SCHEMA_VERSION).unwrap();
        assert_eq!(report.cohort.groups.len(), 2);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn ingest_rejects_group_with_missing_member() {
        let mut cohort = two_group_cohort();
        cohort.groups[1].members.pop();
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let report = ingest_cohort(buf.as_slice(), SCHEMA_VERSION).unwrap();
        assert_eq!(report.cohort.groups.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].group_id, "g2");
        assert_eq!(report.rejected[0].line, 3);
    }

    #[test]
    fn ingest_reports_field_path_for_range_violation() {
        let mut cohort = two_group_cohort();
        cohort.groups[0].members[1].nomination = Some(12.0);
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let report = ingest_cohort(buf.as_slice(), SCHEMA_VERSION).unwrap();
        assert_eq!(report.rejected.len(), 1);
        assert!(report.rejected[0]
            .violations
            .iter()
            .any(|v| v.field == "members[1].nomination"));
    }

    #[test]
    fn ingest_rejects_schema_mismatch() {
        let mut buf = Vec::new();
        write_cohort(&two_group_cohort(), &mut buf).unwrap();
        assert!(matches!(
            ingest_cohort(buf.as_slice(), "cohort.v9"),
            Err(IngestError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn ingest_rejects_nd_on_human_cohort() {
        let mut cohort = Cohort::new(vec![basic_group("g1", Treatment::NoDemographics)]);
        cohort.header.kind = Some(CohortKind::Human);
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let report = ingest_cohort(buf.as_slice(), SCHEMA_VERSION).unwrap();
        assert!(report.rejected[0]
            .violations
            .iter()
            .any(|v| v.field == "treatment"));
    }

    #[test]
    fn round_trip_is_identity() {
        let cohort = two_group_cohort();
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let once = ingest_cohort_strict(buf.as_slice(), SCHEMA_VERSION).unwrap();
        let mut buf2 = Vec::new();
        write_cohort(&once, &mut buf2).unwrap();
        let twice = ingest_cohort_strict(buf2.as_slice(), SCHEMA_VERSION).unwrap();
        assert_eq!(once, twice);
        assert_eq!(buf, buf2);
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let mut cohort = two_group_cohort();
        cohort.groups[0]
            .extra
            .insert("platform_session".to_string(), serde_json::json!("abc-123"));
        cohort.groups[0].members[0]
            .extra
            .insert("attention_checks".to_string(), serde_json::json!(3));
        let mut buf = Vec::new();
        write_cohort(&cohort, &mut buf).unwrap();
        let back = ingest_cohort_strict(buf.as_slice(), SCHEMA_VERSION).unwrap();
        assert_eq!(
            back.groups[0].extra.get("platform_session"),
            Some(&serde_json::json!("abc-123"))
        );
        assert_eq!(
            back.groups[0].members[0].extra.get("attention_checks"),
            Some(&serde_json::json!(3))
        );
    }

    #[test]
    fn canonical_string_sorts_groups() {
        let mut cohort = two_group_cohort();
        cohort.groups.reverse();
        let canonical = cohort_to_canonical_string(&cohort);
        let sorted = cohort_to_canonical_string(&two_group_cohort());
        assert_eq!(canonical, sorted);
    }
}
