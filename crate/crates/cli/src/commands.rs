use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use valuescope_core::conceptualise::Conceptualisation;
use valuescope_core::config::PipelineStage;
use valuescope_core::detection::AnalysisStages;
use valuescope_core::eval::{
    convert_valueeval as convert, emit_report, render_table, write_dataset, BatchOptions,
    ReportFormat, RunMetadata,
};
use valuescope_core::orchestrator::{
    serve as serve_api, write_atomic, Gateways, Orchestrator, OrchestratorSettings, RefreshOutcome,
};
use valuescope_core::value_spec::to_canonical_json;
use valuescope_core::{
    analyze, conceptualise as generate, deserialize_theory, detect_repo_changes, load_dataset,
    run_batch, sample_subset, serialize_theory, validate_theory,
    ConceptualiseOptions, DocumentSet, LlmGateway, MetricsReport,
};

use crate::run_config::RunConfig;
use crate::{render, usage, GlobalArgs, Switch};

fn gateway(cfg: &RunConfig, stage: PipelineStage) -> anyhow::Result<LlmGateway> {
    LlmGateway::from_config(cfg.backends.get(stage).clone())
        .with_context(|| format!("{stage} backend"))
}

fn write_output(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Args)]
pub struct ConceptualiseArgs {
    /// Id of the theory to generate
    #[arg(long)]
    theory: String,
    /// Directory of foundational documents; defaults to the config's entry for the theory
    #[arg(long, value_name = "DIR")]
    docs: Option<PathBuf>,
    /// Theory file to write; defaults to <theories dir>/<theory>.json
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Skip generation when the documents match the existing file's manifest
    #[arg(long)]
    if_changed: bool,
}

pub async fn conceptualise(global: &GlobalArgs, args: ConceptualiseArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(global)?;
    let docs_dir = match args.docs.or_else(|| cfg.documents.get(&args.theory).cloned()) {
        Some(dir) => dir,
        None => return Err(usage(format!("no --docs given and no documents configured for {:?}", args.theory))),
    };
    let out = args
        .out
        .unwrap_or_else(|| cfg.theories_dir.join(format!("{}.json", args.theory)));

    let docs = DocumentSet::load_dir(&docs_dir)
        .with_context(|| format!("loading documents from {}", docs_dir.display()))?;
    let previous = if out.is_file() {
        match valuescope_core::orchestrator::load_theory_file(&out) {
            Ok(theory) => Some(theory),
            Err(e) => {
                tracing::warn!(path = %out.display(), error = %e, "existing theory unreadable, regenerating");
                None
            }
        }
    } else {
        None
    };
    let changes = detect_repo_changes(previous.as_ref().map_or(&[][..], |t| &t.source_manifest), &docs);
    if let Some(prev) = &previous {
        if args.if_changed && changes.is_empty() {
            println!("{} v{} is up to date with {}; nothing to do", prev.theory_id, prev.version, docs_dir.display());
            return Ok(());
        }
    }

    let mut options = ConceptualiseOptions::new(&args.theory);
    options.fallback_name = previous.as_ref().map(|t| t.name.clone());
    let gw = gateway(&cfg, PipelineStage::Conceptualise)?;
    let Conceptualisation { mut theory, exchanges } =
        generate(&docs, &cfg.templates.conceptualise, &gw, &options).await?;
    theory.version = previous.as_ref().map_or(1, |t| t.version + 1);
    write_output(&out, serialize_theory(&theory).as_bytes())?;

    let c = gw.config();
    println!(
        "wrote {} ({} v{}, {} values from {} documents)",
        out.display(),
        theory.theory_id,
        theory.version,
        theory.values.len(),
        docs.len()
    );
    if previous.is_some() {
        println!(
            "changes: {} added, {} modified, {} removed",
            changes.added.len(),
            changes.modified.len(),
            changes.removed.len()
        );
    }
    println!(
        "run: conceptualise={} ({}) temperature={} seed={} calls={}",
        c.model_name,
        c.flavor.as_str(),
        c.temperature,
        c.seed,
        exchanges.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// File holding the text to analyse
    #[arg(conflicts_with = "text")]
    file: Option<PathBuf>,
    /// Text to analyse, given inline
    #[arg(long)]
    text: Option<String>,
    /// Theory file or id of a theory in the theories directory
    #[arg(long)]
    theory: String,
    /// Run the intensity rating stage
    #[arg(long, value_enum, default_value = "on")]
    rate: Switch,
    /// Write the analysis report as JSON to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table
    #[arg(long)]
    json: bool,
}

pub async fn detect(global: &GlobalArgs, args: DetectArgs) -> anyhow::Result<()> {
    let (text_id, raw) = match (&args.file, &args.text) {
        (Some(path), _) => {
            let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let id = path.file_stem().map_or("text".into(), |s| s.to_string_lossy().into_owned());
            (id, raw)
        }
        (None, Some(text)) => ("inline".to_string(), text.clone()),
        (None, None) => return Err(usage("give a text file or --text")),
    };
    let text = raw.trim();
    if text.is_empty() {
        return Err(usage("input text is empty"));
    }

    let cfg = RunConfig::resolve(global)?;
    let theory = cfg.load_theory(&args.theory)?;
    let detect_gw = gateway(&cfg, PipelineStage::Detect)?;
    let rate_gw = match args.rate {
        Switch::On => Some(gateway(&cfg, PipelineStage::Rate)?),
        Switch::Off => None,
    };
    let stages = AnalysisStages {
        templates: &cfg.templates,
        detect: &detect_gw,
        rate: rate_gw.as_ref(),
    };
    let report = analyze(&text_id, text, &theory, &stages).await?.report;
    let json = to_canonical_json(&report);
    if let Some(out) = &args.out {
        write_output(out, json.as_bytes())?;
    }
    if args.json {
        print!("{json}");
    } else {
        print!("{}", render::analysis(&report, &theory));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Canonical TSV dataset
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Theory file or id of a theory in the theories directory
    #[arg(long)]
    theory: String,
    /// Evaluate a seeded random subset of this many rows
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Abort when more than this fraction of samples fail
    #[arg(long)]
    max_failure_rate: Option<f64>,
    /// Metrics report (JSON); the table is written next to it with a .txt extension
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub async fn evaluate(global: &GlobalArgs, args: EvaluateArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(global)?;
    let max_failure_rate = args.max_failure_rate.unwrap_or(cfg.max_failure_rate);
    if !(0.0..=1.0).contains(&max_failure_rate) {
        return Err(usage(format!("--max-failure-rate {max_failure_rate} outside [0, 1]")));
    }
    let theory = cfg.load_theory(&args.theory)?;
    let dataset = load_dataset(&args.dataset, &theory)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    for w in &dataset.warnings {
        eprintln!("warning: {w}");
    }
    for r in &dataset.rejected {
        eprintln!("warning: line {} rejected: {}", r.line, r.reason);
    }
    if dataset.samples.is_empty() {
        bail!("{} has no usable rows", args.dataset.display());
    }

    let sample_seed = args.sample_seed.unwrap_or(cfg.sample_seed);
    let samples = match args.sample_size.or(cfg.sample_size) {
        Some(n) => sample_subset(&dataset.samples, n, sample_seed).map_err(|e| usage(e.to_string()))?,
        None => dataset.samples.clone(),
    };

    let gw = gateway(&cfg, PipelineStage::Detect)?;
    let options = BatchOptions {
        parallelism: cfg.parallelism,
        max_failure_rate,
    };
    let outcome = run_batch(&samples, &theory, &cfg.templates.detect, &gw, options).await?;
    let c = gw.config();
    let meta = RunMetadata {
        model: c.model_name.clone(),
        flavor: c.flavor,
        temperature: c.temperature,
        seed: c.seed,
        theory_id: theory.theory_id.clone(),
        theory_version: theory.version,
        dataset: args.dataset.display().to_string(),
        dataset_size: dataset.samples.len(),
        sample_size: samples.len(),
        sample_seed,
        parallelism: cfg.parallelism,
    };
    let report = MetricsReport::from_batch(&samples, &outcome, meta)?;
    for f in &report.failed {
        eprintln!("warning: sample {} failed: {}", f.text_id, f.error);
    }

    if let Some(out) = &args.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        emit_report(&report, ReportFormat::Json, out).with_context(|| format!("writing {}", out.display()))?;
        let table = out.with_extension("txt");
        emit_report(&report, ReportFormat::Table, &table)
            .with_context(|| format!("writing {}", table.display()))?;
    }
    print!("{}", render_table(std::slice::from_ref(&report)));
    let m = &report.run_metadata;
    println!(
        "\nrun: model={} ({}) temperature={} seed={} theory={} v{} dataset={} sample={}/{} sample_seed={} evaluated={} failed={}",
        m.model,
        m.flavor.as_str(),
        m.temperature,
        m.seed,
        m.theory_id,
        m.theory_version,
        m.dataset,
        m.sample_size,
        m.dataset_size,
        m.sample_seed,
        report.evaluated,
        report.failed.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to bind, e.g. 127.0.0.1:8080
    #[arg(long)]
    listen: Option<String>,
    /// With --docs: register a document directory for this theory id
    #[arg(long, requires = "docs")]
    theory: Option<String>,
    #[arg(long, value_name = "DIR", requires = "theory")]
    docs: Option<PathBuf>,
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {}
        _ = terminate => {}
    }
    eprintln!("shutting down; waiting for running analyses");
}

pub async fn serve(global: &GlobalArgs, args: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::resolve(global)?;
    if let (Some(id), Some(dir)) = (args.theory, args.docs) {
        cfg.documents.insert(id, dir);
    }
    let listen = args.listen.unwrap_or_else(|| cfg.listen.clone());
    let gateways = Gateways::from_configs(&cfg.backends)?;
    let settings = OrchestratorSettings {
        theories_dir: cfg.theories_dir.clone(),
        results_dir: cfg.results_dir.clone(),
        documents: cfg.documents.clone(),
        templates: cfg.templates.clone(),
        parallelism: cfg.service_parallelism,
    };
    let orchestrator = Orchestrator::new(settings, gateways)
        .with_context(|| format!("opening theory store {}", cfg.theories_dir.display()))?;

    match cfg.poll_interval {
        Some(interval) => {
            orchestrator.spawn_monitor(interval);
        }
        None => {
            let o = orchestrator.clone();
            tokio::spawn(async move {
                for id in o.theory_ids_with_documents() {
                    match o.refresh_specs(&id).await {
                        Ok(RefreshOutcome::NoChange { .. }) => {}
                        Ok(outcome) => tracing::info!(?outcome, "theory regenerated at startup"),
                        Err(e) => tracing::warn!(theory_id = %id, error = %e, "startup refresh failed"),
                    }
                }
            });
        }
    }

    let listener = tokio::net::TcpListener::bind(&listen)
        .await
        .with_context(|| format!("binding {listen}"))?;
    let addr = listener.local_addr()?;
    eprintln!(
        "listening on http://{addr} ({} theories, results in {})",
        orchestrator.store().list().len(),
        cfg.results_dir.display()
    );
    serve_api(orchestrator, listener, shutdown_signal()).await?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// sentences.tsv with Text-ID, Sentence-ID and Text columns
    #[arg(long, value_name = "FILE")]
    sentences: PathBuf,
    /// labels.tsv with attained and constrained score columns
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Theory whose value ids name the output columns
    #[arg(long)]
    theory: String,
    /// Output TSV; stdout when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn convert_valueeval(global: &GlobalArgs, args: ConvertArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(global)?;
    let theory = cfg.load_theory(&args.theory)?;
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let conversion = convert(&read(&args.sentences)?, &read(&args.labels)?, &theory)?;
    for w in &conversion.warnings {
        eprintln!("warning: {w}");
    }
    let tsv = write_dataset(&conversion.samples, &theory);
    match &args.out {
        Some(out) => {
            write_output(out, tsv.as_bytes())?;
            eprintln!("wrote {} rows to {}", conversion.samples.len(), out.display());
        }
        None => print!("{tsv}"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Theory file to check
    file: PathBuf,
}

pub fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let theory = deserialize_theory(&text).with_context(|| format!("parsing {}", args.file.display()))?;
    let report = validate_theory(&theory);
    for issue in &report.issues {
        println!("{:?} at {}: {}", issue.severity, issue.path, issue.message);
    }
    if !report.ok {
        bail!("{} is not a valid theory", args.file.display());
    }
    println!(
        "{}: {} v{} with {} values is valid",
        args.file.display(),
        theory.theory_id,
        theory.version,
        theory.values.len()
    );
    Ok(())
}
