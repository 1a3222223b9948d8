use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use adc_cli::config::{ExpandRequest, ProjectConfig};
use adc_cli::curation::{align_rows, manifest_classes, merge_mode, run_method, MethodParams};
use adc_cli::pipeline::{self, write_if_changed, Layout};
use adc_cli::{explain, run_pipeline, PipelineError};
use adc_core::collector::Manifest;
use adc_core::curator::{knn_relabel, merge_filters, CoresSign, CurationReport};
use adc_core::embedstore::EmbeddingMatrix;
use adc_core::evalkit::{delta_worst_accuracy, detection_prf, DetectionOutcome};
use adc_core::lineio;
use adc_core::subsetter::{build_clean_subset, build_longtail_subset, longtail_counts, split_dataset, SplitConfig};
use adc_core::taxonomy::{generate_queries, TaxonomySpec};
use adc_core::votes::{
    aggregate_votes, estimate_noise_interval, export_filter_bundles, import_filter_selections, read_votes,
    AggregationPolicy, BundleFile, Verdict, DEFAULT_GROUP_SIZE, DEFAULT_MAX_VOTES, DEFAULT_MIN_SELECT,
    DEFAULT_TASKS_PER_BUNDLE,
};

#[derive(Parser)]
#[command(name = "adc", version, about = "Build, curate and evaluate web-collected image datasets")]
struct Cli {
    /// Project config; supplies defaults for every command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a taxonomy, optionally expanding attributes through a prompt client.
    Design(DesignArgs),
    /// Query a search backend and download candidates into a content store.
    Collect(CollectArgs),
    /// Flag likely label errors, or merge existing reports.
    Curate(CurateArgs),
    /// Annotation bundles and vote aggregation.
    #[command(subcommand)]
    Votes(VotesCommand),
    /// Derived datasets.
    #[command(subcommand)]
    Subset(SubsetCommand),
    /// Detection metrics and worst-case accuracy.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Embedding container checks.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Summarize an artifact file and check its integrity.
    Explain { path: PathBuf },
    /// Run every configured pipeline stage.
    Run,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CLASS:ATTRIBUTE:MIN:MAX, repeatable.
    #[arg(long)]
    expand: Vec<String>,
    /// Replay prompt exchanges from a log instead of calling the live client.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Append live exchanges to a log.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Write the (expanded) taxonomy here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CollectArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    /// mock, local or http.
    #[arg(long)]
    backend: Option<String>,
    /// Corpus root for the local backend.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (manifest and content store).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct CurateArgs {
    #[command(subcommand)]
    merge: Option<CurateCommand>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    probs: Option<PathBuf>,
    /// simifeat, knn, cl, cores or conf.
    #[arg(long)]
    method: Option<String>,
    /// Neighbor count for simifeat or knn.
    #[arg(long)]
    k: Option<usize>,
    /// Percentage flagged by conf.
    #[arg(long)]
    percent: Option<f64>,
    #[arg(long, value_enum)]
    cores_sign: Option<SignArg>,
    /// Class count; defaults to the largest manifest label plus one.
    #[arg(long)]
    classes: Option<usize>,
    /// Also suggest labels for flagged samples from this many neighbors.
    #[arg(long)]
    relabel_k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    FlagAbove,
    FlagBelow,
}

#[derive(Subcommand)]
enum CurateCommand {
    /// Combine reports over the same samples.
    Merge {
        #[arg(long, default_value = "union")]
        mode: String,
        #[arg(required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VotesCommand {
    /// Export filtering groups for annotators.
    ExportFilter {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
        group_size: usize,
        #[arg(long, default_value_t = DEFAULT_MIN_SELECT)]
        min_select: usize,
        #[arg(long, default_value_t = DEFAULT_TASKS_PER_BUNDLE)]
        tasks_per_bundle: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mark selected samples as clean candidates.
    ImportFilter {
        #[arg(long)]
        bundles: PathBuf,
        #[arg(long)]
        selections: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Defaults to rewriting the input manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate votes and estimate the noise-rate interval.
    Aggregate {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long, value_enum, default_value = "majority")]
        policy: PolicyArg,
        #[arg(long, default_value_t = DEFAULT_MAX_VOTES)]
        max_votes: usize,
        /// Per-sample verdicts, one JSON line each.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Majority,
    Strict,
}

#[derive(Subcommand)]
enum SubsetCommand {
    /// Exponential long-tail subset with imbalance ratio rho.
    Longtail {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        rho: f64,
        /// Head class size; defaults to the largest available class.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop samples flagged by the given reports.
    Clean {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "union")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train, eval and test splits.
    Split {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        eval: usize,
        #[arg(long)]
        test: usize,
        #[arg(long)]
        tiny: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_stratify: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Precision, recall and F1 of a report against true labels.
    Detect {
        #[arg(long)]
        report: PathBuf,
        /// JSON lines `{"sample_id": ..., "label": ...}`.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worst-case accuracy over class reweightings within KL radius delta.
    Dro {
        /// JSON lines `{"class": ..., "accuracy": ...}`.
        #[arg(long)]
        acc: PathBuf,
        /// A non-negative number or `inf`.
        #[arg(long)]
        delta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Check an embedding container and, optionally, its alignment with a manifest.
    Verify {
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: Option<ProjectConfig>,
}

impl Ctx {
    fn layout(&self) -> Option<Layout> {
        self.cfg.as_ref().map(|c| Layout { root: c.out_dir.clone() })
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.cfg.as_ref().map(|c| c.seed)).unwrap_or(0)
    }

    fn manifest_path(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.layout().map(|l| l.manifest())).context("no manifest given (--manifest or --config)")
    }

    fn config(&self) -> ProjectConfig {
        self.cfg.clone().unwrap_or_default()
    }
}

/// Writes JSON to `out`, or to stdout when no path is given.
fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => {
            write_if_changed(p, text.as_bytes())?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_expand(s: &str) -> Result<ExpandRequest> {
    let parts: Vec<&str> = s.split(':').collect();
    ensure!(parts.len() == 4, "--expand takes CLASS:ATTRIBUTE:MIN:MAX, got {s:?}");
    Ok(ExpandRequest {
        class: parts[0].into(),
        attribute: parts[1].into(),
        min: parts[2].parse().context("MIN")?,
        max: parts[3].parse().context("MAX")?,
    })
}

fn design(ctx: &Ctx, a: DesignArgs) -> Result<()> {
    let mut cfg = ctx.config();
    if let Some(s) = a.spec {
        cfg.spec = Some(s);
    }
    if !a.expand.is_empty() {
        cfg.design.expand = a.expand.iter().map(|s| parse_expand(s)).collect::<Result<_>>()?;
    }
    cfg.design.replay = a.replay.or(cfg.design.replay);
    cfg.design.record = a.record.or(cfg.design.record);
    let path = cfg.spec.clone().context("no taxonomy given (--spec or --config)")?;
    let mut spec = TaxonomySpec::load_valid(&path)?;
    if !cfg.design.expand.is_empty() {
        let client: Box<dyn adc_core::prompt::PromptClient> = match (&cfg.design.replay, &cfg.design.record) {
            (Some(r), _) => Box::new(adc_core::prompt::ReplayClient::load(r)?),
            (None, Some(log)) => Box::new(adc_core::prompt::RecordingClient::new(
                adc_core::prompt::HttpPromptClient::from_env()?,
                log.clone(),
            )),
            (None, None) => Box::new(adc_core::prompt::HttpPromptClient::from_env()?),
        };
        pipeline::apply_expansions(&mut spec, &cfg, client.as_ref())?;
    }
    let queries = generate_queries(&spec)?;
    log::info!("{} classes, {} subclasses, {} queries", spec.classes.len(), spec.subclass_count(), queries.len());
    if let Some(out) = a.out {
        write_if_changed(&out, spec.to_toml_string().as_bytes())?;
    }
    Ok(())
}

fn collect(ctx: &Ctx, a: CollectArgs) -> Result<()> {
    let mut cfg = ctx.config();
    cfg.spec = a.spec.or(cfg.spec);
    cfg.collect.backend = a.backend.unwrap_or(cfg.collect.backend);
    cfg.collect.corpus = a.corpus.or(cfg.collect.corpus);
    cfg.collect.limit = a.limit.unwrap_or(cfg.collect.limit);
    cfg.collect.workers = a.workers.unwrap_or(cfg.collect.workers);
    if let Some(out) = a.out {
        cfg.out_dir = out;
    }
    cfg.validate()?;
    let spec = TaxonomySpec::load_valid(cfg.spec.as_deref().expect("validated"))?;
    let c = pipeline::collect_into(&cfg, &spec, &Layout { root: cfg.out_dir.clone() })?;
    log::info!(
        "{} queries, {} new records, {} fetched, {} broken; dedup kept {} of {}",
        c.queries,
        c.fetch.new_records,
        c.fetch.fetched,
        c.fetch.broken,
        c.dedup.retained,
        c.dedup.checked
    );
    Ok(())
}

fn curate(ctx: &Ctx, a: CurateArgs) -> Result<()> {
    if let Some(CurateCommand::Merge { mode, reports, out }) = a.merge {
        let loaded: Vec<CurationReport> = reports
            .iter()
            .map(|p| CurationReport::load(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?;
        let (merged, stats) = merge_filters(&loaded, merge_mode(&mode)?)?;
        write_if_changed(&out, merged.to_text().as_bytes())?;
        log::info!("{} of {} samples flagged ({:.2}%)", stats.combined, stats.total, 100.0 * stats.combined_fraction);
        return Ok(());
    }
    let cfg = ctx.config();
    let manifest = Manifest::load(&ctx.manifest_path(a.manifest)?)?;
    let method = a.method.context("--method is required")?;
    let out = a.out.context("--out is required")?;
    let embeddings = a.embeddings.or(cfg.curate.embeddings.clone());
    let probs = a.probs.or(cfg.curate.probs.clone());
    let classes = a.classes.unwrap_or_else(|| manifest_classes(&manifest));
    let params = MethodParams {
        simifeat_k: a.k.unwrap_or(cfg.curate.simifeat_k),
        knn_k: a.k.unwrap_or(cfg.curate.knn_k),
        conf_percent: a.percent.unwrap_or(cfg.curate.conf_percent),
        cores_sign: match a.cores_sign {
            Some(SignArg::FlagBelow) => CoresSign::FlagBelow,
            _ => CoresSign::FlagAbove,
        },
    };
    let mut report = run_method(&method, &manifest, classes, embeddings.as_deref(), probs.as_deref(), &params, ctx.seed(None))?;
    if let Some(k) = a.relabel_k {
        let path = embeddings.context("--relabel-k needs --embeddings")?;
        let m = EmbeddingMatrix::read(&path)?;
        let (rows, labels) = align_rows(&manifest, m.row_ids())?;
        let m = m.select(&rows);
        report = knn_relabel(&m, &labels, &report, k)?;
    }
    let s = report.summary();
    log::info!("{}: {} of {} flagged ({:.2}%)", report.method, s.flagged, s.total, 100.0 * s.flagged_fraction);
    write_if_changed(&out, report.to_text().as_bytes())?;
    Ok(())
}

fn votes(ctx: &Ctx, cmd: VotesCommand) -> Result<()> {
    match cmd {
        VotesCommand::ExportFilter { manifest, group_size, min_select, tasks_per_bundle, seed, out } => {
            ensure!(group_size >= 1 && tasks_per_bundle >= 1, "group size and tasks per bundle must be at least 1");
            ensure!(min_select <= group_size, "min select {min_select} exceeds group size {group_size}");
            let m = Manifest::load(&ctx.manifest_path(manifest)?)?;
            let bundles = export_filter_bundles(&m, group_size, min_select, tasks_per_bundle, ctx.seed(seed));
            log::info!("exported {} groups", bundles.groups.len());
            write_if_changed(&out, bundles.to_text().as_bytes())?;
        }
        VotesCommand::ImportFilter { bundles, selections, manifest, out } => {
            let path = ctx.manifest_path(manifest)?;
            let mut m = Manifest::load(&path)?;
            let b = BundleFile::parse(&fs::read_to_string(&bundles)?)?;
            let report = import_filter_selections(&b, &fs::read_to_string(&selections)?, &mut m)?;
            for (gid, why) in &report.rejected {
                log::warn!("group {gid} rejected: {why}");
            }
            log::info!("{} groups accepted, {} samples marked", report.accepted_groups, report.marked);
            write_if_changed(out.as_deref().unwrap_or(&path), m.to_text().as_bytes())?;
        }
        VotesCommand::Aggregate { votes, policy, max_votes, verdicts, out } => {
            let records = read_votes(&votes, max_votes)?;
            let policy = match policy {
                PolicyArg::Majority => AggregationPolicy::Majority,
                PolicyArg::Strict => AggregationPolicy::Strict,
            };
            let agg = aggregate_votes(&records, policy, max_votes)?;
            let interval = estimate_noise_interval(&agg.table)?;
            if let Some(path) = verdicts {
                let mut text = String::new();
                for (id, v) in &agg.verdicts {
                    text.push_str(&lineio::to_line(&json!({ "sample_id": id, "clean": *v == Verdict::Clean }))?);
                }
                write_if_changed(&path, text.as_bytes())?;
            }
            emit(
                &json!({
                    "policy": agg.policy,
                    "records": agg.verdicts.len(),
                    "clean": agg.clean_count(),
                    "clean_fraction": agg.clean_fraction(),
                    "patterns": agg.table,
                    "noise_interval": interval,
                }),
                out.as_deref(),
            )?;
        }
    }
    Ok(())
}

fn subset(ctx: &Ctx, cmd: SubsetCommand) -> Result<()> {
    match cmd {
        SubsetCommand::Longtail { manifest, rho, n_max, seed, out } => {
            let m = Manifest::load(&ctx.manifest_path(manifest)?)?;
            let mut per_class = std::collections::BTreeMap::<usize, usize>::new();
            for r in m.records().iter().filter(|r| r.status == adc_core::FetchStatus::Fetched) {
                *per_class.entry(r.webly_label).or_default() += 1;
            }
            let n_max = n_max.unwrap_or_else(|| per_class.values().copied().max().unwrap_or(0));
            let dist = longtail_counts(n_max, per_class.len(), rho)?;
            let lt = build_longtail_subset(&m, &dist, ctx.seed(seed))?;
            log::info!("long-tail profile {:?}, {} samples", dist.counts, dist.total());
            write_if_changed(&out, lt.to_text().as_bytes())?;
        }
        SubsetCommand::Clean { manifest, reports, mode, out } => {
            let m = Manifest::load(&ctx.manifest_path(manifest)?)?;
            let loaded: Vec<CurationReport> = reports
                .iter()
                .map(|p| CurationReport::load(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<_>>()?;
            let (clean, stats) = build_clean_subset(&m, &loaded, merge_mode(&mode)?)?;
            log::info!("retained {} of {} ({:.2}%)", stats.retained, stats.input, 100.0 * stats.retained_fraction);
            write_if_changed(&out, clean.to_text().as_bytes())?;
        }
        SubsetCommand::Split { manifest, eval, test, tiny, seed, no_stratify, out } => {
            let m = Manifest::load(&ctx.manifest_path(manifest)?)?;
            let cfg = SplitConfig { eval_size: eval, test_size: test, seed: ctx.seed(seed), stratify: !no_stratify, tiny };
            let s = split_dataset(&m, &cfg)?;
            write_if_changed(&out, s.to_text().as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct TruthLine {
    sample_id: String,
    label: usize,
}

#[derive(Deserialize, Serialize)]
struct AccuracyLine {
    class: usize,
    accuracy: f64,
}

fn eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Detect { report, truth, out } => {
            let report = CurationReport::load(&report)?;
            let text = fs::read_to_string(&truth)?;
            let mut labels = std::collections::HashMap::new();
            for (lineno, line) in lineio::numbered_lines(&text) {
                let t: TruthLine = lineio::from_line(line, lineno)?;
                labels.insert(t.sample_id, t.label);
            }
            let mut corrupted = Vec::with_capacity(report.len());
            for e in &report.entries {
                let truth = labels.get(&e.sample_id).with_context(|| format!("no true label for {}", e.sample_id))?;
                corrupted.push(*truth != e.label);
            }
            let prf = detection_prf(&DetectionOutcome::new(report.flags(), corrupted)?);
            emit(&json!(prf), out.as_deref())?;
        }
        EvalCommand::Dro { acc, delta, out } => {
            let delta: f64 = match delta.as_str() {
                "inf" | "infinity" => f64::INFINITY,
                d => d.parse().with_context(|| format!("bad delta {d:?}"))?,
            };
            let text = fs::read_to_string(&acc)?;
            let mut lines: Vec<AccuracyLine> = Vec::new();
            for (lineno, line) in lineio::numbered_lines(&text) {
                lines.push(lineio::from_line(line, lineno)?);
            }
            lines.sort_by_key(|l| l.class);
            for (i, l) in lines.iter().enumerate() {
                ensure!(l.class == i, "accuracy file must list classes 0..K exactly once");
            }
            let accs: Vec<f64> = lines.iter().map(|l| l.accuracy).collect();
            let dw = delta_worst_accuracy(&accs, delta)?;
            emit(&json!({ "delta": if delta.is_finite() { json!(delta) } else { json!("inf") }, "result": dw }), out.as_deref())?;
        }
    }
    Ok(())
}

fn embed(ctx: &Ctx, cmd: EmbedCommand) -> Result<()> {
    let EmbedCommand::Verify { embeddings, manifest } = cmd;
    let path = embeddings
        .or_else(|| ctx.cfg.as_ref().and_then(|c| c.curate.embeddings.clone()))
        .context("no embeddings given (--embeddings or --config)")?;
    println!("{}", explain(&path)?);
    if let Some(mp) = manifest.or_else(|| ctx.layout().map(|l| l.manifest()).filter(|p| p.exists())) {
        let m = Manifest::load(&mp)?;
        let e = EmbeddingMatrix::read(&path)?;
        let (rows, _) = align_rows(&m, e.row_ids())?;
        let fetched = m.counts().fetched;
        println!("aligned with manifest: {} of {} rows fetched; {} fetched samples in manifest", rows.len(), e.n_rows(), fetched);
        if rows.len() < fetched {
            log::warn!("{} fetched samples have no embedding", fetched - rows.len());
        }
    }
    Ok(())
}

fn run(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg.as_ref().context("run needs --config")?;
    match run_pipeline(cfg) {
        Ok(report) => {
            for s in &report.stages {
                log::info!("{}: {:?} ({:.2}s)", s.stage, s.status, s.seconds);
            }
            if report.is_noop() {
                log::info!("nothing to do; all outputs are up to date");
            }
            Ok(())
        }
        Err(PipelineError::Stage { stage, source, .. }) => bail!("stage {stage} failed: {source:#}"),
        Err(e) => Err(e.into()),
    }
}

fn init_logging(verbose: u8, cfg: Option<&ProjectConfig>) {
    let base = cfg.map(|c| c.log_level.as_str()).unwrap_or("info");
    let level = match verbose {
        0 => base.parse().unwrap_or(log::LevelFilter::Info),
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_env("ADC_LOG").format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.config.as_deref().map(ProjectConfig::load).transpose() {
        Ok(c) => c,
        Err(e) => {
            init_logging(cli.verbose, None);
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    init_logging(cli.verbose, cfg.as_ref());
    let ctx = Ctx { cfg };
    let result = match cli.command {
        Command::Design(a) => design(&ctx, a),
        Command::Collect(a) => collect(&ctx, a),
        Command::Curate(a) => curate(&ctx, a),
        Command::Votes(c) => votes(&ctx, c),
        Command::Subset(c) => subset(&ctx, c),
        Command::Eval(c) => eval(c),
        Command::Embed(c) => embed(&ctx, c),
        Command::Explain { path } => explain(&path).map(|s| println!("{s}")),
        Command::Run => run(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
