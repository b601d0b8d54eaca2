//! Deterministic report output: one CSV file per table (RFC 4180 quoting)
//! plus a JSON manifest recording the cohorts, seeds, and versions that
//! produced them. Identical inputs yield byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tables::{AlignmentReport, GapTable, NominationRow, StageRatioRow};

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("unsupported report format {0:?} (expected \"csv\")")]
    UnsupportedFormat(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Provenance of one cohort that fed a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMeta {
    pub label: String,
    pub n_groups: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub artifact_version: String,
    pub format: String,
    pub alignment_baseline: f64,
    pub cohorts: Vec<CohortMeta>,
}

/// Everything one report run produces.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub alignment: Option<AlignmentReport>,
    pub gap: GapTable,
    pub nomination: Vec<NominationRow>,
    /// Stage-ratio rows per cohort label.
    pub stage_ratio: Vec<(String, Vec<StageRatioRow>)>,
    pub manifest: ReportManifest,
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn alignment_csv(report: &AlignmentReport) -> String {
    let mut out = String::new();
    out.push_str("stratum,n_groups,exact_matches,gender_matches,exact_rate,gender_rate,baseline,p_exact\n");
    for s in [&report.overall, &report.male_leader, &report.non_male_leader] {
        let _ = writeln!(
            out,
            "{}",
            csv_line(&[
                s.label.clone(),
                s.n_groups.to_string(),
                s.exact_matches.to_string(),
                s.gender_matches.to_string(),
                s.exact_rate.to_string(),
                s.gender_rate.to_string(),
                report.baseline.to_string(),
                fmt_opt(s.exact_test.as_ref().map(|t| t.p_value)),
            ])
        );
    }
    out
}

fn gap_csv(table: &GapTable) -> String {
    let mut out = String::new();
    out.push_str("cohort,n_groups,delta_self,delta_peer,delta_total,p_self,p_peer,p_total\n");
    for row in &table.rows {
        let tests = row.tests_vs_reference.as_ref();
        let _ = writeln!(
            out,
            "{}",
            csv_line(&[
                row.cohort.clone(),
                row.n_groups.to_string(),
                row.mean_self.to_string(),
                row.mean_peer.to_string(),
                row.mean_total.to_string(),
                fmt_opt(tests.map(|t| t.self_excl.p_value)),
                fmt_opt(tests.map(|t| t.peer.p_value)),
                fmt_opt(tests.map(|t| t.total.p_value)),
            ])
        );
    }
    out
}

fn nomination_csv(rows: &[NominationRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "cohort,male_n,male_mean,male_sd,non_male_n,non_male_mean,non_male_sd,gap,t,p\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{}",
            csv_line(&[
                r.cohort.clone(),
                r.male_n.to_string(),
                r.male_mean.to_string(),
                r.male_sd.to_string(),
                r.non_male_n.to_string(),
                r.non_male_mean.to_string(),
                r.non_male_sd.to_string(),
                r.gap.to_string(),
                r.test.statistic.to_string(),
                r.test.p_value.to_string(),
            ])
        );
    }
    out
}

fn stage_ratio_csv(sections: &[(String, Vec<StageRatioRow>)]) -> String {
    let mut out = String::new();
    out.push_str("cohort,stage,n_groups,mixed_count,male_only_count,non_male_only_count,mixed_fraction,male_fraction\n");
    for (label, rows) in sections {
        for r in rows {
            let _ = writeln!(
                out,
                "{}",
                csv_line(&[
                    label.clone(),
                    r.stage.as_str().to_string(),
                    r.n_groups.to_string(),
                    r.mixed_count.to_string(),
                    r.male_only_count.to_string(),
                    r.non_male_only_count.to_string(),
                    r.mixed_fraction.to_string(),
                    fmt_opt(r.male_fraction),
                ])
            );
        }
    }
    out
}

/// Writes the report files into `dest` and returns their paths in written
/// order: gap, nomination, stage_ratio, optional alignment, manifest.
pub fn emit_report(
    bundle: &ReportBundle,
    format: &str,
    dest: &Path,
) -> Result<Vec<PathBuf>, EmitError> {
    if format != "csv" {
        return Err(EmitError::UnsupportedFormat(format.to_string()));
    }
    fs::create_dir_all(dest).map_err(|source| EmitError::Write {
        path: dest.to_path_buf(),
        source,
    })?;

    let mut written = Vec::new();
    let mut write = |name: &str, contents: String| -> Result<(), EmitError> {
        let path = dest.join(name);
        fs::write(&path, contents).map_err(|source| EmitError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
        Ok(())
    };

    write("gap.csv", gap_csv(&bundle.gap))?;
    write("nomination.csv", nomination_csv(&bundle.nomination))?;
    write("stage_ratio.csv", stage_ratio_csv(&bundle.stage_ratio))?;
    if let Some(alignment) = &bundle.alignment {
        write("alignment.csv", alignment_csv(alignment))?;
    }
    let manifest =
        serde_json::to_string_pretty(&bundle.manifest).expect("manifest serializes") + "\n";
    write("report_manifest.json", manifest)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::tables::{gap_table, nomination_table, stage_ratio_table};
    use crate::protocol::fixtures::{basic_group, fixture_key};
    use crate::protocol::{run_session, ReplayResponder, Treatment};

    fn bundle() -> ReportBundle {
        let cohort: Vec<_> = (0..2)
            .map(|i| {
                run_session(
                    &basic_group(&format!("g{i}"), Treatment::Identified),
                    &mut ReplayResponder,
                    &fixture_key(),
                    3,
                )
                .unwrap()
            })
            .collect();
        ReportBundle {
            alignment: Some(
                crate::analytics::tables::alignment_report(&cohort, &cohort, 0.25).unwrap(),
            ),
            gap: gap_table(("fixture", &cohort), None).unwrap(),
            nomination: vec![nomination_table("fixture", &cohort).unwrap()],
            stage_ratio: vec![("fixture".to_string(), stage_ratio_table(&cohort).unwrap())],
            manifest: ReportManifest {
                artifact_version: "test".to_string(),
                format: "csv".to_string(),
                alignment_baseline: 0.25,
                cohorts: vec![CohortMeta {
                    label: "fixture".to_string(),
                    n_groups: 2,
                    kind: Some("human".to_string()),
                    model: Some("stub".to_string()),
                    seed: Some(3),
                }],
            },
        }
    }

    #[test]
    fn gap_csv_has_required_header() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&bundle(), "csv", dir.path()).unwrap();
        let gap = std::fs::read_to_string(&files[0]).unwrap();
        assert!(gap.starts_with("cohort,n_groups,delta_self,delta_peer,delta_total"));
    }

    #[test]
    fn emit_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files_a = emit_report(&bundle(), "csv", a.path()).unwrap();
        let files_b = emit_report(&bundle(), "csv", b.path()).unwrap();
        assert_eq!(files_a.len(), files_b.len());
        for (fa, fb) in files_a.iter().zip(&files_b) {
            assert_eq!(
                std::fs::read(fa).unwrap(),
                std::fs::read(fb).unwrap(),
                "{fa:?} vs {fb:?}"
            );
        }
    }

    #[test]
    fn manifest_records_model_token() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&bundle(), "csv", dir.path()).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("report_manifest.json")).unwrap();
        assert!(manifest.contains("\"model\": \"stub\""));
        assert!(manifest.contains("\"seed\": 3"));
    }

    #[test]
    fn rejects_unknown_format() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_report(&bundle(), "parquet", dir.path()),
            Err(EmitError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn csv_quoting_is_rfc4180() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("with,comma"), "\"with,comma\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
