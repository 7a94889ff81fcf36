//! `ruleke`: mine rules, augment edits, generate and evaluate the
//! multi-hop editing benchmark.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
//! Progress goes to stderr; results go to files or stdout.

mod config;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ruleke_core::benchmark::{self, DatasetStats, ScenarioCounts};
use ruleke_core::encoder::PrecomputedEncoder;
use ruleke_core::eval::{self, BatchSize, ExperimentConfig, Prediction};
use ruleke_core::kg::load_knowledge_base;
use ruleke_core::memory::{load_edits, write_edits};
use ruleke_core::miner::{mine_rules, MinerConfig};
use ruleke_core::rules::load_rules;
use ruleke_core::tracking::{augment, CountingOracle};
use ruleke_core::{
    fixtures, GeneratorConfig, HashedNgramEncoder, KbOracle, KnowledgeBase, RelationEncoder, RuleSet, TemplateTable,
};

use config::{resolve_seed, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "ruleke", version, about = "Rule-based knowledge editing toolkit")]
struct Cli {
    /// TOML file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    /// No progress output on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a triples file and write it back in canonical order.
    Ingest(IngestArgs),
    /// Mine length-2 chain rules from a knowledge base.
    Mine(MineArgs),
    /// Extend an edits file with the edits implied by rules.
    Augment(AugmentArgs),
    /// Generate a counterfactual multi-hop benchmark.
    GenBench(GenBenchArgs),
    /// Evaluate the solver on a benchmark, with or without augmentation.
    Eval(EvalArgs),
    /// Accuracy and memory growth across activation thresholds.
    Sweep(SweepArgs),
    /// Summaries of a dataset or knowledge base.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct KbArgs {
    /// Triples file (subject, relation, object; tab-separated). Defaults to the bundled world.
    #[arg(long, value_name = "PATH")]
    kb: Option<PathBuf>,
    /// Alias file for --kb.
    #[arg(long, value_name = "PATH")]
    aliases: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RulesArg {
    /// Rule file. Defaults to the bundled rule set.
    #[arg(long, value_name = "PATH")]
    rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EditingArgs {
    /// Activation threshold on support-scaled similarity.
    #[arg(long)]
    delta: Option<f64>,
    /// Retrieval threshold on relation similarity.
    #[arg(long)]
    theta: Option<f64>,
    /// Feed derived edits back into augmentation until nothing new appears.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    fixpoint: Option<bool>,
    /// Precomputed relation vectors (relation<TAB>v1,v2,...); other relations fall back to hashing.
    #[arg(long, value_name = "PATH")]
    vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[command(flatten)]
    rules: RulesArg,
    /// Add every fact derivable by the rules before writing.
    #[arg(long)]
    materialize: bool,
    /// Canonical triples output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Canonical alias output.
    #[arg(long, value_name = "PATH")]
    aliases_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[arg(long)]
    min_support_count: Option<usize>,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Rule file output (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Edits file (JSON lines).
    #[arg(long, value_name = "PATH")]
    edits: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    #[command(flatten)]
    rules: RulesArg,
    #[command(flatten)]
    editing: EditingArgs,
    /// Augmented edits output (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Augmentation statistics as JSON (default: stdout when --out is given).
    #[arg(long, value_name = "PATH")]
    stats: Option<PathBuf>,
    /// Derived facts with their rules and traces, as JSON lines.
    #[arg(long, value_name = "PATH")]
    derived: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenBenchArgs {
    #[command(flatten)]
    kb: KbArgs,
    #[command(flatten)]
    rules: RulesArg,
    /// Relation template table (relation, domain type, range type, cloze).
    #[arg(long, value_name = "PATH")]
    templates: Option<PathBuf>,
    /// Instances per scenario: `no,left,right,both` or `left=10,both=5`.
    #[arg(long)]
    counts: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_hops: Option<usize>,
    /// Keep Right-Edit instances whose back tracking has several candidates.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    allow_ambiguous: Option<bool>,
    /// Attempts per instance before giving up.
    #[arg(long, default_value_t = 20_000)]
    retry_budget: usize,
    /// Dataset output (JSON lines; default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Per-scenario, per-hop count table.
    #[arg(long, value_name = "PATH")]
    stats_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset file written by gen-bench.
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    #[command(flatten)]
    rules: RulesArg,
    #[command(flatten)]
    editing: EditingArgs,
    /// Instances sharing one edit memory: a positive integer or `all`.
    #[arg(long)]
    batch: Option<BatchSize>,
    /// Augment each batch's memory before solving.
    #[arg(long, conflicts_with = "compare")]
    augment: bool,
    /// Report both the plain and the augmented run.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON output (default: stdout).
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// One CSV row per run.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Per-instance predictions as JSON lines.
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
    /// Include wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    record_time: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    #[command(flatten)]
    kb: KbArgs,
    #[command(flatten)]
    rules: RulesArg,
    #[command(flatten)]
    editing: EditingArgs,
    /// Comma-separated activation thresholds.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    batch: Option<BatchSize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output (default: stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Dataset to summarise; without it the knowledge base is summarised.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    kb: KbArgs,
}

/// Errors that should exit with status 1 rather than 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

const DEFAULT_DELTAS: [f64; 4] = [0.4, 0.6, 0.8, 1.0];

struct Ctx {
    file: FileConfig,
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: fmt::Arguments<'_>) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn kb(&self, args: &KbArgs) -> anyhow::Result<KnowledgeBase> {
        let triples = args.kb.as_ref().or(self.file.kb.as_ref());
        let aliases = args.aliases.as_ref().or(self.file.aliases.as_ref());
        let kb = match triples {
            Some(p) => load_knowledge_base(p, aliases.map(PathBuf::as_path))?,
            None if aliases.is_some() => return Err(usage("--aliases needs --kb")),
            None => fixtures::world(),
        };
        self.progress(format_args!(
            "knowledge base: {} facts, {} entities, {} relations",
            kb.len(),
            kb.entities().len(),
            kb.relations().count()
        ));
        Ok(kb)
    }

    fn rules(&self, arg: &RulesArg) -> anyhow::Result<RuleSet> {
        let rules = match arg.rules.as_ref().or(self.file.rules.as_ref()) {
            Some(p) => load_rules(p)?,
            None => fixtures::builtin_rules(),
        };
        self.progress(format_args!("rules: {}", rules.len()));
        Ok(rules)
    }

    fn encoder(&self, args: &EditingArgs) -> anyhow::Result<Arc<dyn RelationEncoder>> {
        let hashed: Arc<dyn RelationEncoder> = Arc::new(HashedNgramEncoder::default());
        Ok(match args.vectors.as_ref().or(self.file.vectors.as_ref()) {
            Some(p) => Arc::new(PrecomputedEncoder::load(p, Some(hashed))?),
            None => hashed,
        })
    }

    fn threshold(&self, name: &str, flag: Option<f64>, file: Option<f64>, default: f64) -> anyhow::Result<f64> {
        let v = flag.or(file).unwrap_or(default);
        if !v.is_finite() {
            return Err(usage(format!("--{name} must be a finite number")));
        }
        Ok(v)
    }

    fn delta(&self, args: &EditingArgs) -> anyhow::Result<f64> {
        self.threshold("delta", args.delta, self.file.delta, 0.8)
    }

    fn theta(&self, args: &EditingArgs) -> anyhow::Result<f64> {
        self.threshold("theta", args.theta, self.file.theta, 0.7)
    }

    fn fixpoint(&self, args: &EditingArgs) -> bool {
        args.fixpoint.or(self.file.fixpoint).unwrap_or(false)
    }

    fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        let env = std::env::var("RULEKE_SEED").ok();
        resolve_seed(flag, self.file.seed, env.as_deref()).map_err(|e| usage(format!("{e:#}")))
    }

    fn batch(&self, flag: Option<BatchSize>) -> anyhow::Result<BatchSize> {
        match (flag, &self.file.batch) {
            (Some(b), _) => Ok(b),
            (None, Some(s)) => s.parse().map_err(|e| usage(format!("config batch: {e}"))),
            (None, None) => Ok(BatchSize::Fixed(1)),
        }
    }
}

/// Writes to `path`, or to stdout when it is `None`.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).context("writing to stdout")
        }
    }
}

fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

fn write_jsonl<T: Serialize>(w: &mut dyn Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        writeln!(w)?;
    }
    Ok(())
}

fn ingest(ctx: &Ctx, args: &IngestArgs) -> anyhow::Result<()> {
    let mut kb = ctx.kb(&args.kb)?;
    if args.materialize {
        let rules = ctx.rules(&args.rules)?;
        kb = kb.materialize(&rules, 16);
        ctx.progress(format_args!("materialized: {} facts", kb.len()));
    }
    if let Some(p) = &args.aliases_out {
        emit(Some(p), |w| kb.aliases().write_to(w))?;
    }
    #[derive(Serialize)]
    struct Summary {
        facts: usize,
        entities: usize,
        relations: usize,
        aliased_entities: usize,
    }
    let summary = Summary {
        facts: kb.len(),
        entities: kb.entities().len(),
        relations: kb.relations().count(),
        aliased_entities: kb.aliases().len(),
    };
    match &args.out {
        Some(p) => {
            emit(Some(p), |w| kb.write_triples(w))?;
            emit(None, |w| write_json(w, &summary))
        }
        None => emit(None, |w| kb.write_triples(w)),
    }
}

fn mine(ctx: &Ctx, args: &MineArgs) -> anyhow::Result<()> {
    let kb = ctx.kb(&args.kb)?;
    let defaults = MinerConfig::default();
    let cfg = MinerConfig {
        min_support_count: args
            .min_support_count
            .or(ctx.file.min_support_count)
            .unwrap_or(defaults.min_support_count),
        min_confidence: args
            .min_confidence
            .or(ctx.file.min_confidence)
            .unwrap_or(defaults.min_confidence),
    };
    if !(0.0..=1.0).contains(&cfg.min_confidence) {
        return Err(usage("--min-confidence must be in [0, 1]"));
    }
    let rules = mine_rules(&kb, &cfg);
    ctx.progress(format_args!("mined {} rules", rules.len()));
    emit(args.out.as_deref(), |w| rules.write_to(w))
}

fn run_augment(ctx: &Ctx, args: &AugmentArgs) -> anyhow::Result<()> {
    let kb = ctx.kb(&args.kb)?;
    let rules = ctx.rules(&args.rules)?;
    let edits = load_edits(&args.edits)?;
    let cfg = ruleke_core::AugmentConfig {
        delta: ctx.delta(&args.editing)?,
        theta: ctx.theta(&args.editing)?,
        fixpoint: ctx.fixpoint(&args.editing),
        ..Default::default()
    };
    let oracle = CountingOracle::new(KbOracle::new(&kb, &rules));
    let aug = augment(&edits, &rules, &oracle, ctx.encoder(&args.editing)?, kb.alias_table(), &cfg);
    ctx.progress(format_args!(
        "{} edits -> {} ({} derived, {} oracle calls)",
        aug.stats.original_edits,
        aug.stats.total_edits,
        aug.stats.derived_edits,
        oracle.total()
    ));
    emit(args.out.as_deref(), |w| write_edits(w, aug.memory.edits()))?;
    if let Some(p) = &args.derived {
        emit(Some(p), |w| write_jsonl(w, &aug.derived))?;
    }
    match (&args.stats, &args.out) {
        (Some(p), _) => emit(Some(p), |w| write_json(w, &aug.stats)),
        (None, Some(_)) => emit(None, |w| write_json(w, &aug.stats)),
        (None, None) => Ok(()),
    }
}

fn gen_bench(ctx: &Ctx, args: &GenBenchArgs) -> anyhow::Result<()> {
    let counts = match args.counts.as_ref().or(ctx.file.counts.as_ref()) {
        Some(s) => s.parse::<ScenarioCounts>().map_err(|e| usage(format!("--counts: {e}")))?,
        None => GeneratorConfig::default().counts,
    };
    let max_hops = args.max_hops.or(ctx.file.max_hops).unwrap_or(4);
    if max_hops < 2 {
        return Err(usage("--max-hops must be at least 2"));
    }
    let cfg = GeneratorConfig {
        counts,
        seed: ctx.seed(args.seed)?,
        max_hops,
        allow_ambiguous: args.allow_ambiguous.or(ctx.file.allow_ambiguous).unwrap_or(false),
        retry_budget: args.retry_budget,
    };
    let kb = ctx.kb(&args.kb)?;
    let rules = ctx.rules(&args.rules)?;
    let templates = match args.templates.as_ref().or(ctx.file.templates.as_ref()) {
        Some(p) => TemplateTable::load(p)?,
        None => TemplateTable::builtin(),
    };
    let data = benchmark::generate_dataset(&kb, &rules, &templates, &cfg);
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    ctx.progress(format_args!(
        "generated {} instances (seed {})",
        data.instances.len(),
        cfg.seed
    ));
    emit(args.out.as_deref(), |w| benchmark::write_dataset(w, &data.instances))?;
    if let Some(p) = &args.stats_out {
        let table = DatasetStats::of(&data.instances).to_table();
        emit(Some(p), |w| w.write_all(table.as_bytes()))?;
    }
    if data.instances.len() < cfg.counts.total() {
        bail!(
            "only {} of {} requested instances could be generated",
            data.instances.len(),
            cfg.counts.total()
        );
    }
    Ok(())
}

fn run_eval(ctx: &Ctx, args: &EvalArgs) -> anyhow::Result<()> {
    let base = ExperimentConfig {
        batch: ctx.batch(args.batch)?,
        delta: ctx.delta(&args.editing)?,
        theta: ctx.theta(&args.editing)?,
        augmented: args.augment,
        fixpoint: ctx.fixpoint(&args.editing),
        seed: ctx.seed(args.seed)?,
        record_time: args.record_time,
    };
    let dataset = benchmark::load_dataset(&args.dataset)?;
    let kb = ctx.kb(&args.kb)?;
    let rules = ctx.rules(&args.rules)?;
    let encoder = ctx.encoder(&args.editing)?;
    let settings: Vec<bool> = if args.compare { vec![false, true] } else { vec![args.augment] };
    let mut reports = Vec::new();
    let mut predictions: Vec<PredictionRow> = Vec::new();
    for augmented in settings {
        let cfg = ExperimentConfig { augmented, ..base };
        let (report, preds) = eval::run_experiment(&dataset, &kb, &rules, encoder.clone(), &cfg);
        ctx.progress(format_args!(
            "batch {} augmented={augmented}: accuracy {:.4}, memory growth {:.3}",
            cfg.batch, report.overall_accuracy, report.memory_growth_ratio
        ));
        predictions.extend(preds.into_iter().map(|prediction| PredictionRow { augmented, prediction }));
        reports.push(report);
    }
    if let Some(p) = &args.predictions {
        emit(Some(p), |w| write_jsonl(w, &predictions))?;
    }
    if let Some(p) = &args.csv {
        let csv = eval::reports_to_csv(&reports);
        emit(Some(p), |w| w.write_all(csv.as_bytes()))?;
    }
    emit(args.report.as_deref(), |w| write_json(w, &reports))
}

#[derive(Serialize)]
struct PredictionRow {
    augmented: bool,
    #[serde(flatten)]
    prediction: Prediction,
}

fn sweep(ctx: &Ctx, args: &SweepArgs) -> anyhow::Result<()> {
    let deltas = args
        .deltas
        .clone()
        .or_else(|| ctx.file.deltas.clone())
        .unwrap_or_else(|| DEFAULT_DELTAS.to_vec());
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
        return Err(usage("--deltas needs at least one finite value"));
    }
    if args.editing.delta.is_some() {
        return Err(usage("sweep takes --deltas, not --delta"));
    }
    let cfg = ExperimentConfig {
        batch: ctx.batch(args.batch)?,
        theta: ctx.theta(&args.editing)?,
        fixpoint: ctx.fixpoint(&args.editing),
        seed: ctx.seed(args.seed)?,
        ..Default::default()
    };
    let dataset = benchmark::load_dataset(&args.dataset)?;
    let kb = ctx.kb(&args.kb)?;
    let rules = ctx.rules(&args.rules)?;
    let rows = eval::sweep_delta(&dataset, &kb, &rules, ctx.encoder(&args.editing)?, &deltas, &cfg);
    for r in &rows {
        ctx.progress(format_args!(
            "delta {}: accuracy {:.4} (baseline {:.4}), growth {:.3}",
            r.delta, r.accuracy, r.baseline_accuracy, r.growth_ratio
        ));
    }
    let csv = eval::sweep_to_csv(&rows);
    emit(args.out.as_deref(), |w| w.write_all(csv.as_bytes()))
}

fn stats(ctx: &Ctx, args: &StatsArgs) -> anyhow::Result<()> {
    if let Some(p) = &args.dataset {
        let data = benchmark::load_dataset(p)?;
        let table = DatasetStats::of(&data).to_table();
        return emit(None, |w| w.write_all(table.as_bytes()));
    }
    let kb = ctx.kb(&args.kb)?;
    emit(None, |w| {
        writeln!(w, "relation\tfacts\tsubjects\tobjects")?;
        let mut rels: Vec<_> = kb.relations().cloned().collect();
        rels.sort();
        for r in rels {
            let pairs = kb.pairs(&r);
            writeln!(
                w,
                "{r}\t{}\t{}\t{}",
                pairs.len(),
                kb.domain_of(&r).len(),
                kb.range_of(&r).len()
            )?;
        }
        Ok(())
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
            .context("configuring the thread pool")?;
    }
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { file, quiet: cli.quiet };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Mine(a) => mine(&ctx, a),
        Command::Augment(a) => run_augment(&ctx, a),
        Command::GenBench(a) => gen_bench(&ctx, a),
        Command::Eval(a) => run_eval(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
