use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde_json::{json, Value};

use bashgen_core::bash_ast::{self, fill_ast, templatize, PlaceholderKind, TypedValue};
use bashgen_core::dataset_io::{self, read_records, record_stats, stats, DatasetRecord, ReadMode, Source};
use bashgen_core::generator::{generate_corpus, CorpusLimits, GeneratedCommand};
use bashgen_core::llm_bridge::{HttpTransport, LlmClient, LlmConfig, ReplayTransport, Transport};
use bashgen_core::metrics::{read_predictions, read_references, score_files};
use bashgen_core::nl_prep::extract_values;
use bashgen_core::scaler::{profile_of, scale_commands, DistributionProfile, DEFAULT_EPSILON};
use bashgen_core::syntax_kb::{self, import_manpage, load_specs, render_specs, KnowledgeBase};
use bashgen_core::validator::{
    builtin_fixtures, instantiate_ast, load_fixtures, run_batch, validity_rate, Backend, SafetyPolicy,
    SandboxConfig,
};

use crate::io::{read_commands, read_text, write_jsonl, RECORD_SCHEMA};
use crate::manifest::RunManifest;
use crate::{Cli, Cmd, Format};

pub const EXEC_ENV: &str = "BASHGEN_ALLOW_EXEC";

struct Ctx {
    subcommand: String,
    seed: u64,
    jobs: usize,
    format: Format,
    args: Vec<String>,
    overrides: BTreeMap<String, String>,
}

impl Ctx {
    fn manifest(&self, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
        let m = RunManifest {
            subcommand: self.subcommand.clone(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            seed: self.seed,
            args: self.args.clone(),
            config_overrides: self.overrides.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        for out in outputs {
            m.write_beside(out)?;
        }
        Ok(())
    }

    fn report(&self, text: &str, value: Value) -> Result<()> {
        let mut out = std::io::stdout().lock();
        match self.format {
            Format::Text => writeln!(out, "{text}")?,
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?,
        }
        Ok(())
    }
}

pub fn run(cli: Cli, args: Vec<String>, overrides: BTreeMap<String, String>) -> Result<()> {
    let subcommand = args
        .iter()
        .find(|a| {
            use clap::CommandFactory;
            Cli::command().find_subcommand(a.as_str()).is_some()
        })
        .cloned()
        .unwrap_or_default();
    let ctx = Ctx {
        subcommand,
        seed: cli.seed,
        jobs: cli.jobs.max(1),
        format: cli.format,
        args,
        overrides,
    };
    match cli.command {
        Cmd::Generate(a) => generate(&ctx, a),
        Cmd::Validate(a) => validate(&ctx, a),
        Cmd::Scale(a) => scale(&ctx, a),
        Cmd::Backtranslate(a) => backtranslate(&ctx, a),
        Cmd::LlmPipeline(a) => llm_pipeline(&ctx, a),
        Cmd::Split(a) => split(&ctx, a),
        Cmd::Score(a) => score(&ctx, a),
        Cmd::Stats(a) => show_stats(&ctx, a),
        Cmd::Templatize(a) => templatize_cmd(&ctx, a),
        Cmd::Fill(a) => fill(&ctx, a),
        Cmd::ImportMan(a) => import_man(&ctx, a),
    }
}

fn knowledge_base(specs: Option<&Path>) -> Result<KnowledgeBase> {
    Ok(match specs {
        Some(p) => KnowledgeBase::new(load_specs(p)?),
        None => KnowledgeBase::new(syntax_kb::builtin().specs().to_vec()),
    })
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Spec file or directory of spec files; the shipped specs by default.
    #[arg(long)]
    specs: Option<PathBuf>,
    /// Maximum templates per utility.
    #[arg(long)]
    limit: Option<usize>,
    /// Maximum head templates per piped pair.
    #[arg(long)]
    pipe_head_limit: Option<usize>,
    /// Maximum tail templates per piped pair.
    #[arg(long)]
    pipe_tail_limit: Option<usize>,
    /// Skip piped templates.
    #[arg(long)]
    no_piped: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> Result<()> {
    let kb = knowledge_base(a.specs.as_deref())?;
    let limits = CorpusLimits {
        per_utility: a.limit,
        pipe_head: a.pipe_head_limit.or(a.limit),
        pipe_tail: a.pipe_tail_limit.or(a.limit),
        piped: !a.no_piped,
    };
    let corpus = generate_corpus(kb.specs(), limits, ctx.seed)?;
    let records: Vec<_> = corpus.iter().map(GeneratedCommand::to_record).collect();
    write_jsonl(a.out.as_deref(), &records)?;
    if let Some(out) = &a.out {
        let inputs: Vec<&Path> = a.specs.iter().map(PathBuf::as_path).collect();
        ctx.manifest(&inputs, &[out])?;
        eprintln!("wrote {} templates to {}", records.len(), out.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Templates from `generate`, or commands (plain text or JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fixture file with workspace contents and argument values.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Spec files used to parse templates.
    #[arg(long)]
    specs: Option<PathBuf>,
    /// Run commands in a subprocess. Requires BASHGEN_ALLOW_EXEC=1.
    #[arg(long)]
    exec: bool,
    /// Per-command timeout in seconds.
    #[arg(long, default_value_t = 0.5)]
    timeout: f64,
    /// Directory for throwaway workspaces.
    #[arg(long)]
    scratch: Option<PathBuf>,
    /// Network utility allowed to run anyway.
    #[arg(long)]
    allow_network: Vec<String>,
}

fn validate(ctx: &Ctx, a: ValidateArgs) -> Result<()> {
    if a.exec && std::env::var(EXEC_ENV).as_deref() != Ok("1") {
        bail!(
            "refusing to execute generated commands: --exec runs arbitrary shell code; \
             set {EXEC_ENV}=1 to confirm, or drop --exec for a parse-only dry run"
        );
    }
    let (manifest, fixtures) = match &a.fixtures {
        Some(p) => load_fixtures(p)?,
        None => builtin_fixtures(),
    };
    let kb = knowledge_base(a.specs.as_deref())?;
    let mut commands = Vec::new();
    for line in read_commands(&a.input)? {
        if line.is_template {
            let ast = bash_ast::parse_with(&line.text, &kb).with_context(|| format!("template {:?}", line.text))?;
            commands.push(instantiate_ast(&ast, &fixtures)?);
        } else {
            commands.push(line.text);
        }
    }
    let config = SandboxConfig {
        manifest,
        scratch_root: a.scratch.clone(),
        timeout: Duration::from_secs_f64(a.timeout),
        backend: if a.exec { Backend::Subprocess } else { Backend::DryRun },
        allow_exec: a.exec,
        jobs: ctx.jobs,
        policy: SafetyPolicy {
            allow_network: a.allow_network.clone(),
            ..SafetyPolicy::default()
        },
        ..SandboxConfig::default()
    };
    let results = run_batch(&commands, &config)?;
    write_jsonl(a.out.as_deref(), &results)?;
    if let Some(out) = &a.out {
        ctx.manifest(&[&a.input], &[out])?;
    }
    let report = validity_rate(&results);
    let mut text = format!(
        "valid {}/{} ({:.1}%)",
        report.overall.valid,
        report.overall.total,
        100.0 * report.overall.fraction()
    );
    for (u, r) in &report.per_utility {
        text.push_str(&format!("\n  {u:<12} {}/{} ({:.1}%)", r.valid, r.total, 100.0 * r.fraction()));
    }
    if a.out.is_some() || ctx.format == Format::Json {
        ctx.report(&text, serde_json::to_value(&report)?)?;
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ScaleArgs {
    /// Commands, validation results (only valid ones are kept) or records.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target profile; the original NL2Bash proportions by default.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

fn scale(ctx: &Ctx, a: ScaleArgs) -> Result<()> {
    let profile = match &a.profile {
        Some(p) => DistributionProfile::load(p)?,
        None => DistributionProfile::nl2bash(),
    };
    let pool: Vec<String> = read_commands(&a.input)?.into_iter().map(|c| c.text).collect();
    let pool_len = pool.len();
    let kept = scale_commands(pool, &profile, a.epsilon, ctx.seed)?;
    let rows: Vec<Value> = kept.iter().map(|c| json!({ "cmd": c })).collect();
    write_jsonl(a.out.as_deref(), &rows)?;
    if let Some(out) = &a.out {
        ctx.manifest(&[&a.input], &[out])?;
        let asts: Vec<_> = kept.iter().filter_map(|c| bash_ast::parse(c).ok()).collect();
        let realized = profile_of(&asts);
        let mut text = format!("kept {} of {}", kept.len(), pool_len);
        for (u, t) in &profile.proportions {
            let r = realized.proportions.get(u).copied().unwrap_or(0.0);
            text.push_str(&format!("\n  {u:<12} target {:.2}% realized {:.2}%", 100.0 * t, 100.0 * r));
        }
        ctx.report(&text, json!({ "kept": kept.len(), "pool": pool_len, "realized": realized }))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct LlmOptions {
    /// TOML file with endpoint, model, token_env, temperatures and retry settings.
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// Answer from a previous audit log instead of the network.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Append every exchange to this file.
    #[arg(long)]
    audit: Option<PathBuf>,
}

impl LlmOptions {
    fn client(&self, jobs: usize) -> Result<LlmClient> {
        let mut config = match &self.llm_config {
            Some(p) => toml::from_str::<LlmConfig>(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
            None => LlmConfig::default(),
        };
        if self.llm_config.is_none() || jobs > 1 {
            config.concurrency = config.concurrency.max(jobs);
        }
        let transport: Box<dyn Transport> = match &self.replay {
            Some(p) => Box::new(ReplayTransport::from_audit_log(p).with_context(|| format!("reading {}", p.display()))?),
            None => {
                if std::env::var(&config.token_env).is_err() {
                    bail!("no API token: set ${} or pass --replay", config.token_env);
                }
                Box::new(HttpTransport::from_env(&config).map_err(|e| anyhow!(e))?)
            }
        };
        let client = LlmClient::new(config, transport)?;
        Ok(match &self.audit {
            Some(p) => client.with_audit_file(p)?,
            None => client,
        })
    }
}

#[derive(Args, Debug)]
pub struct LlmArgs {
    /// Commands to describe (plain text or JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmOptions,
}

fn backtranslate(ctx: &Ctx, a: LlmArgs) -> Result<()> {
    let client = a.llm.client(ctx.jobs)?;
    let cmds: Vec<String> = read_commands(&a.input)?.into_iter().map(|c| c.text).collect();
    let mut records = Vec::new();
    for (cmd, nl) in cmds.iter().zip(client.backtranslate_all(&cmds)) {
        match nl {
            Ok(nl) => records.push(DatasetRecord {
                nl,
                cmd: cmd.clone(),
                source: Source::Llm,
                valid: None,
            }),
            Err(e @ bashgen_core::llm_bridge::LlmError::Auth(_)) => return Err(e.into()),
            Err(e) => tracing::warn!(cmd, "skipped: {e}"),
        }
    }
    write_jsonl(a.out.as_deref(), &records)?;
    if let Some(out) = &a.out {
        ctx.manifest(&[&a.input], &[out])?;
        eprintln!("translated {} of {} commands", records.len(), cmds.len());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct LlmPipelineArgs {
    /// Number of generation requests.
    #[arg(short = 'n', long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    llm: LlmOptions,
}

fn llm_pipeline(ctx: &Ctx, a: LlmPipelineArgs) -> Result<()> {
    let client = a.llm.client(ctx.jobs)?;
    let records = client.pipeline(a.count, Some(&a.out))?;
    let inputs: Vec<&Path> = a.llm.replay.iter().map(PathBuf::as_path).collect();
    ctx.manifest(&inputs, &[&a.out])?;
    ctx.report(
        &format!("{} records from {} requests", records.len(), a.count),
        json!({ "records": records.len(), "requests": a.count }),
    )
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Share of records that go to the training set.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    Ok(read_records(path, ReadMode::Strict)
        .with_context(|| format!("reading {}; expected {RECORD_SCHEMA}", path.display()))?
        .records)
}

fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let records = read_dataset(&a.input)?;
    let (train, test) = dataset_io::split(&records, a.fraction, ctx.seed)?;
    dataset_io::write_records(&a.train, &train)?;
    dataset_io::write_records(&a.test, &test)?;
    ctx.manifest(&[&a.input], &[&a.train, &a.test])?;
    ctx.report(
        &format!("train {} / test {}", train.len(), test.len()),
        json!({ "train": train.len(), "test": test.len() }),
    )
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Reference records: {"nl", "cmd"} per line.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Predictions: {"nl", "candidates": [{"cmd", "confidence"}]} per line,
    /// or plain dataset records (one candidate at confidence 1).
    #[arg(long)]
    pred: PathBuf,
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<()> {
    let references = read_references(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
    let predictions = match read_predictions(&a.pred) {
        Ok(p) => p,
        Err(_) => read_references(&a.pred)
            .with_context(|| format!("reading {}", a.pred.display()))?
            .into_iter()
            .map(|r| bashgen_core::metrics::PredictionRecord {
                nl: r.nl,
                candidates: vec![bashgen_core::metrics::Candidate {
                    cmd: r.cmd,
                    confidence: 1.0,
                }],
            })
            .collect(),
    };
    let report = score_files(&predictions, &references)?;
    ctx.report(
        &format!("accuracy {:.2}% over {} pairs", report.accuracy, report.pairs),
        json!({ "accuracy": report.accuracy, "pairs": report.pairs }),
    )
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Dataset records or commands.
    #[arg(long = "in")]
    input: PathBuf,
}

fn show_stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let s = match read_records(&a.input, ReadMode::Strict) {
        Ok(r) => record_stats(&r.records),
        Err(_) => {
            let cmds: Vec<String> = read_commands(&a.input)?.into_iter().map(|c| c.text).collect();
            stats(cmds.iter().map(String::as_str))
        }
    };
    let mut text = format!(
        "total {}\npiped {}\nunpiped {}\nunparsed {}\nutilities {}",
        s.total, s.piped, s.unpiped, s.unparsed, s.distinct_utilities
    );
    let mut heads: Vec<_> = s.heads.iter().collect();
    heads.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    for (u, n) in heads.iter().take(10) {
        text.push_str(&format!("\n  {u:<12} {n:>7} ({:.2}%)", 100.0 * **n as f64 / s.total.max(1) as f64));
    }
    ctx.report(&text, serde_json::to_value(&s)?)
}

#[derive(Args, Debug)]
pub struct TemplatizeArgs {
    /// Commands to templatize.
    commands: Vec<String>,
    /// JSONL whose "cmd" fields are templatized in place, or plain commands.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn templatize_cmd(ctx: &Ctx, a: TemplatizeArgs) -> Result<()> {
    let Some(input) = &a.input else {
        if a.commands.is_empty() {
            bail!("give commands as arguments or --in FILE");
        }
        for c in &a.commands {
            println!("{}", templatize(&bash_ast::parse(c)?).render());
        }
        return Ok(());
    };
    let text = read_text(input)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut value: Value = if line.trim_start().starts_with('{') {
            serde_json::from_str(line).with_context(|| format!("{}:{}", input.display(), i + 1))?
        } else {
            json!({ "cmd": line.trim() })
        };
        let Some(cmd) = value.get("cmd").and_then(Value::as_str) else {
            bail!("{}:{}: no \"cmd\" field", input.display(), i + 1);
        };
        match bash_ast::parse(cmd) {
            Ok(ast) => {
                value["cmd"] = Value::String(templatize(&ast).render());
                rows.push(value);
            }
            Err(e) => tracing::warn!(line = i + 1, "skipping unparseable command: {e}"),
        }
    }
    write_jsonl(a.out.as_deref(), &rows)?;
    if let Some(out) = &a.out {
        ctx.manifest(&[input], &[out])?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FillArgs {
    /// Templatized command, e.g. "tar -cjf _FILE _PATH".
    #[arg(long)]
    template: String,
    /// Sentence to extract parameter values from.
    #[arg(long)]
    nl: Option<String>,
    /// Explicit value as KIND=LITERAL, e.g. FILE=backup.bz2.
    #[arg(long = "value")]
    values: Vec<String>,
}

fn fill(ctx: &Ctx, a: FillArgs) -> Result<()> {
    let ast = bash_ast::parse(&a.template)?;
    let mut values = Vec::new();
    for v in &a.values {
        let (kind, literal) = v.split_once('=').ok_or_else(|| anyhow!("expected KIND=LITERAL, got {v:?}"))?;
        let kind = PlaceholderKind::from_name(kind.trim_start_matches('_'))
            .ok_or_else(|| anyhow!("unknown placeholder kind {kind:?}"))?;
        values.push(TypedValue {
            kind,
            literal: literal.to_string(),
        });
    }
    if let Some(nl) = &a.nl {
        values.extend(extract_values(nl));
    }
    let filled = fill_ast(&ast, &values);
    ctx.report(&filled.command, json!({ "command": filled.command, "unfilled": filled.unfilled }))?;
    if filled.unfilled > 0 && ctx.format == Format::Text {
        eprintln!("{} placeholder(s) left unfilled", filled.unfilled);
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ImportManArgs {
    /// Utility name.
    #[arg(long)]
    utility: String,
    /// Plain-text man page, or - for stdin.
    #[arg(long)]
    man: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn import_man(ctx: &Ctx, a: ImportManArgs) -> Result<()> {
    let imported = import_manpage(&read_text(&a.man)?, &a.utility)?;
    for note in &imported.notes {
        eprintln!("note: {note}");
    }
    if imported.needs_review {
        eprintln!("some flag argument types were guessed; review before use");
    }
    let text = render_specs(std::slice::from_ref(&imported.spec));
    match &a.out {
        Some(out) => {
            std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
            ctx.manifest(&[&a.man], &[out])?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
