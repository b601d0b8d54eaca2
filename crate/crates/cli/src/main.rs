//! Command-line entry point wiring cohort ingestion, synthetic generation,
//! agent simulation, analysis, and report emission into reproducible runs.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 provider or system
//! error.

mod config;
mod manifest;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use leaderlab_core::agent::provider::HttpChatProvider;
use leaderlab_core::agent::{
    run_agent_cohort, write_trace_events, CompletionProvider, ProviderConfig, RetryPolicy,
    StubProvider, Vendor,
};
use leaderlab_core::analytics::{
    alignment_report, emit_report, gap_table, nomination_table, stage_ratio_table, CohortMeta,
    NominationRow, ReportBundle, ReportManifest, StageRatioRow,
};
use leaderlab_core::protocol::{cohort_to_canonical_string, ingest_cohort, IngestError};
use leaderlab_core::synth::{canonical_task_key, generate_cohort, SynthConfig};
use leaderlab_core::{Cohort, GroupRecord, TaskKey, Treatment, SCHEMA_VERSION};

use config::{load_config, Config, ConfigLayer};
use manifest::{
    config_digest, manifest_path, now_unix_ms, sha256_hex, write_manifest, InputMeta, RunManifest,
};

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "leaderlab",
    version,
    about = "Group leader-election simulator and analytics harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a cohort file, optionally writing its canonical form.
    Ingest(IngestArgs),
    /// Generate a synthetic cohort with controllable bias knobs.
    Synth(SynthArgs),
    /// Simulate a matched agent cohort from a recorded human cohort.
    Simulate(SimulateArgs),
    /// Compare a simulated cohort against its human counterpart.
    Analyze(AnalyzeArgs),
    /// Tabulate a single cohort without a comparison baseline.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Cohort file to read.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Fail (exit 1) if any group is rejected.
    #[arg(long)]
    validate: bool,
    /// Write the accepted groups in canonical form.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Expected schema version token.
    #[arg(long, default_value = SCHEMA_VERSION)]
    schema: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 88)]
    groups: usize,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    max_items: Option<u32>,
    #[arg(long, default_value_t = 5.5)]
    nomination_base: f64,
    #[arg(long, default_value_t = 0.0)]
    male_nomination_shift: f64,
    #[arg(long, default_value_t = 0.0)]
    score_gender_shift: f64,
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Human cohort file to match.
    #[arg(long, value_name = "FILE")]
    cohort: PathBuf,
    /// identified | pseudonymous | no-demographics
    #[arg(long)]
    treatment: String,
    /// stub | openai | anthropic | google
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable NAME holding the API key (never the key itself).
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Re-asks allowed when a reply fails to parse.
    #[arg(long)]
    reasks: Option<u32>,
    /// Task key file; defaults to the canonical synthetic key.
    #[arg(long, value_name = "FILE")]
    key: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Write the per-stage agent trace (JSON Lines).
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Run identity-conditioned treatments over synthetic transcripts.
    #[arg(long)]
    force_synthetic_transcripts: bool,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_name = "FILE")]
    human: PathBuf,
    #[arg(long, value_name = "FILE")]
    sim: PathBuf,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    baseline: Option<f64>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    cohort: PathBuf,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

/// Failures carrying the exit code they map to.
enum AppError {
    /// Bad input, bad flags, invariant violations: exit 1.
    Validation(anyhow::Error),
    /// Provider or system failures: exit 2.
    System(anyhow::Error),
}

fn validation<E: Into<anyhow::Error>>(e: E) -> AppError {
    AppError::Validation(e.into())
}

fn system<E: Into<anyhow::Error>>(e: E) -> AppError {
    AppError::System(e.into())
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(AppError::Validation(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(AppError::System(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn read_cohort(path: &Path, schema: &str) -> Result<(Cohort, InputMeta), AppError> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(system)?;
    let report = ingest_cohort(BufReader::new(bytes.as_slice()), schema).map_err(|e| match e {
        IngestError::Io(_) => system(e),
        other => validation(other),
    })?;
    if !report.rejected.is_empty() {
        let detail = report
            .rejected
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n  ");
        return Err(validation(anyhow!(
            "{} group(s) rejected in {}:\n  {detail}",
            report.rejected.len(),
            path.display()
        )));
    }
    let cohort = report.cohort;
    let meta = input_meta(path, &bytes, &cohort);
    Ok((cohort, meta))
}

fn input_meta(path: &Path, bytes: &[u8], cohort: &Cohort) -> InputMeta {
    InputMeta {
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
        kind: cohort.header.kind.map(|k| k.as_str().to_string()),
        model: cohort.header.model.clone(),
        seed: cohort.header.seed,
        n_groups: cohort.groups.len(),
        group_ids: cohort.groups.iter().map(|g| g.group_id.clone()).collect(),
    }
}

fn write_cohort_canonical(cohort: &Cohort, path: &Path) -> Result<(), AppError> {
    fs::write(path, cohort_to_canonical_string(cohort))
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(system)
}

struct ManifestParts {
    started: u64,
    config: Config,
    inputs: Vec<InputMeta>,
    seeds: Vec<u64>,
    provider_model: Option<String>,
    outputs: Vec<PathBuf>,
}

fn finish_manifest(parts: ManifestParts, at: &Path, is_dir: bool) -> Result<(), AppError> {
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_digest: config_digest(&parts.config, &parts.inputs),
        seeds: parts.seeds,
        provider_model: parts.provider_model,
        inputs: parts.inputs,
        outputs: parts
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        started_unix_ms: parts.started,
        finished_unix_ms: now_unix_ms(),
    };
    write_manifest(&manifest, &manifest_path(at, is_dir)).map_err(system)
}

fn cmd_ingest(args: IngestArgs) -> Result<(), AppError> {
    let started = now_unix_ms();
    let bytes = fs::read(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))
        .map_err(system)?;
    let report = ingest_cohort(BufReader::new(bytes.as_slice()), &args.schema).map_err(|e| {
        match e {
            IngestError::Io(_) => system(e),
            other => validation(other),
        }
    })?;

    println!(
        "accepted {} group(s), rejected {}",
        report.cohort.groups.len(),
        report.rejected.len()
    );
    for diagnostic in &report.rejected {
        eprintln!("rejected: {diagnostic}");
    }
    if args.validate && !report.rejected.is_empty() {
        return Err(validation(anyhow!(
            "{} group(s) failed validation",
            report.rejected.len()
        )));
    }

    if let Some(out) = &args.out {
        write_cohort_canonical(&report.cohort, out)?;
        let config = load_config(ConfigLayer::default(), None).map_err(validation)?;
        let meta = input_meta(&args.input, &bytes, &report.cohort);
        finish_manifest(
            ManifestParts {
                started,
                config,
                inputs: vec![meta],
                seeds: vec![],
                provider_model: None,
                outputs: vec![out.clone()],
            },
            out,
            false,
        )?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), AppError> {
    let started = now_unix_ms();
    let flags = ConfigLayer {
        max_items: args.max_items,
        seed: args.seed,
        ..ConfigLayer::default()
    };
    let config = load_config(flags, args.config.as_deref()).map_err(validation)?;

    let synth_config = SynthConfig {
        n_groups: args.groups,
        max_items: config.max_items,
        nomination_base: args.nomination_base,
        male_nomination_shift: args.male_nomination_shift,
        score_gender_shift: args.score_gender_shift,
        noise_spread: args.noise,
        seed: config.seed,
    };
    let cohort = generate_cohort(&synth_config).map_err(validation)?;
    write_cohort_canonical(&cohort, &args.out)?;
    println!(
        "wrote {} synthetic group(s) to {}",
        cohort.groups.len(),
        args.out.display()
    );
    finish_manifest(
        ManifestParts {
            started,
            config,
            inputs: vec![],
            seeds: vec![synth_config.seed],
            provider_model: None,
            outputs: vec![args.out.clone()],
        },
        &args.out,
        false,
    )
}

fn parse_treatment(token: &str) -> Result<Treatment, AppError> {
    match token {
        "identified" => Ok(Treatment::Identified),
        "pseudonymous" => Ok(Treatment::Pseudonymous),
        "no-demographics" | "no_demographics" => Ok(Treatment::NoDemographics),
        other => Err(validation(anyhow!(
            "unknown treatment {other:?} (expected identified, pseudonymous, or no-demographics)"
        ))),
    }
}

fn build_provider(
    config: &Config,
    provider_config: &ProviderConfig,
) -> Result<Box<dyn CompletionProvider>, AppError> {
    match provider_config.vendor {
        Vendor::Stub => Ok(Box::new(StubProvider::new(config.seed))),
        _ => Ok(Box::new(
            HttpChatProvider::new(provider_config).map_err(system)?,
        )),
    }
}

fn load_task_key(path: Option<&Path>, max_items: u32) -> Result<TaskKey, AppError> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(system)?;
            TaskKey::from_json(&text).map_err(validation)
        }
        None => Ok(canonical_task_key(max_items)),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let started = now_unix_ms();
    let flags = ConfigLayer {
        temperature: args.temperature,
        parallelism: args.parallelism,
        provider: args.provider.clone(),
        model: args.model.clone(),
        endpoint: args.endpoint.clone(),
        api_key_env: args.api_key_env.clone(),
        seed: args.seed,
        retries: args.retries,
        timeout_secs: args.timeout_secs,
        reasks: args.reasks,
        ..ConfigLayer::default()
    };
    let config = load_config(flags, args.config.as_deref()).map_err(validation)?;
    let treatment = parse_treatment(&args.treatment)?;
    let vendor = Vendor::parse(&config.provider).ok_or_else(|| {
        validation(anyhow!(
            "unknown provider {:?} (expected stub, openai, anthropic, or google)",
            config.provider
        ))
    })?;
    if vendor != Vendor::Stub && config.model == "stub" {
        return Err(validation(anyhow!(
            "--model is required for provider {}",
            vendor.as_str()
        )));
    }

    let (human, human_meta) = read_cohort(&args.cohort, SCHEMA_VERSION)?;
    let provider_config = ProviderConfig {
        vendor,
        endpoint: config.endpoint.clone(),
        model: config.model.clone(),
        temperature: config.temperature,
        max_output_tokens: args.max_tokens.unwrap_or(1024),
        timeout: std::time::Duration::from_secs(config.timeout_secs),
        max_parallel: config.parallelism,
        retry: RetryPolicy {
            max_attempts: config.retries,
            ..RetryPolicy::default()
        },
        api_key_env: config.api_key_env.clone(),
        reask_max: config.reasks,
        force_synthetic_transcripts: args.force_synthetic_transcripts,
    };
    let provider = build_provider(&config, &provider_config)?;
    let key = load_task_key(args.key.as_deref(), config.max_items)?;

    let outcome = run_agent_cohort(
        &human,
        treatment,
        provider.as_ref(),
        &provider_config,
        &key,
        config.seed,
    )
    .map_err(|e| match e {
        leaderlab_core::agent::AgentError::Provider(p) => system(p),
        other => validation(other),
    })?;

    for exclusion in &outcome.excluded {
        eprintln!(
            "excluded group {}: {}",
            exclusion.group_id, exclusion.reason
        );
    }
    if outcome.cohort.groups.is_empty() {
        return Err(system(anyhow!(
            "all {} group(s) were excluded; nothing to write",
            outcome.excluded.len()
        )));
    }

    write_cohort_canonical(&outcome.cohort, &args.out)?;
    println!(
        "simulated {} group(s) ({} excluded) -> {}",
        outcome.cohort.groups.len(),
        outcome.excluded.len(),
        args.out.display()
    );

    let mut outputs = vec![args.out.clone()];
    if let Some(trace_path) = &args.trace {
        let mut buffer = Vec::new();
        write_trace_events(&outcome.traces, &mut buffer)
            .context("serializing trace")
            .map_err(system)?;
        fs::write(trace_path, buffer)
            .with_context(|| format!("cannot write {}", trace_path.display()))
            .map_err(system)?;
        outputs.push(trace_path.clone());
    }

    finish_manifest(
        ManifestParts {
            started,
            config: config.clone(),
            inputs: vec![human_meta],
            seeds: vec![config.seed],
            provider_model: Some(config.model.clone()),
            outputs,
        },
        &args.out,
        false,
    )
}

type CohortSections = (Vec<NominationRow>, Vec<(String, Vec<StageRatioRow>)>);

fn single_cohort_sections(
    label: &str,
    groups: &[GroupRecord],
) -> Result<CohortSections, AppError> {
    let nomination = vec![nomination_table(label, groups).map_err(validation)?];
    let ratios = vec![(
        label.to_string(),
        stage_ratio_table(groups).map_err(validation)?,
    )];
    Ok((nomination, ratios))
}

fn cohort_meta(label: &str, cohort: &Cohort) -> CohortMeta {
    CohortMeta {
        label: label.to_string(),
        n_groups: cohort.groups.len(),
        kind: cohort.header.kind.map(|k| k.as_str().to_string()),
        model: cohort.header.model.clone(),
        seed: cohort.header.seed,
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), AppError> {
    let started = now_unix_ms();
    let flags = ConfigLayer {
        alignment_baseline: args.baseline,
        format: args.format.clone(),
        ..ConfigLayer::default()
    };
    let config = load_config(flags, args.config.as_deref()).map_err(validation)?;

    let (human, human_meta) = read_cohort(&args.human, SCHEMA_VERSION)?;
    let (sim, sim_meta) = read_cohort(&args.sim, SCHEMA_VERSION)?;

    let alignment = alignment_report(&human.groups, &sim.groups, config.alignment_baseline)
        .map_err(validation)?;
    let gap = gap_table(("simulated", &sim.groups), Some(("human", &human.groups)))
        .map_err(validation)?;
    let nomination = vec![
        nomination_table("human", &human.groups).map_err(validation)?,
        nomination_table("simulated", &sim.groups).map_err(validation)?,
    ];
    let stage_ratio = vec![
        (
            "human".to_string(),
            stage_ratio_table(&human.groups).map_err(validation)?,
        ),
        (
            "simulated".to_string(),
            stage_ratio_table(&sim.groups).map_err(validation)?,
        ),
    ];

    let bundle = ReportBundle {
        alignment: Some(alignment),
        gap,
        nomination,
        stage_ratio,
        manifest: ReportManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            format: config.format.clone(),
            alignment_baseline: config.alignment_baseline,
            cohorts: vec![cohort_meta("human", &human), cohort_meta("simulated", &sim)],
        },
    };
    let files = emit_report(&bundle, &config.format, &args.out).map_err(validation)?;
    println!(
        "wrote {} report file(s) to {}",
        files.len(),
        args.out.display()
    );

    finish_manifest(
        ManifestParts {
            started,
            config,
            inputs: vec![human_meta, sim_meta],
            seeds: vec![],
            provider_model: sim.header.model.clone(),
            outputs: files,
        },
        &args.out,
        true,
    )
}

fn cmd_report(args: ReportArgs) -> Result<(), AppError> {
    let started = now_unix_ms();
    let flags = ConfigLayer {
        format: args.format.clone(),
        ..ConfigLayer::default()
    };
    let config = load_config(flags, args.config.as_deref()).map_err(validation)?;
    let (cohort, meta) = read_cohort(&args.cohort, SCHEMA_VERSION)?;

    let label = args
        .cohort
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "cohort".to_string());
    let gap = gap_table((&label, &cohort.groups), None).map_err(validation)?;
    let (nomination, stage_ratio) = single_cohort_sections(&label, &cohort.groups)?;

    let bundle = ReportBundle {
        alignment: None,
        gap,
        nomination,
        stage_ratio,
        manifest: ReportManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            format: config.format.clone(),
            alignment_baseline: config.alignment_baseline,
            cohorts: vec![cohort_meta(&label, &cohort)],
        },
    };
    let files = emit_report(&bundle, &config.format, &args.out).map_err(validation)?;
    println!(
        "wrote {} report file(s) to {}",
        files.len(),
        args.out.display()
    );

    finish_manifest(
        ManifestParts {
            started,
            config,
            inputs: vec![meta],
            seeds: vec![],
            provider_model: cohort.header.model.clone(),
            outputs: files,
        },
        &args.out,
        true,
    )
}
