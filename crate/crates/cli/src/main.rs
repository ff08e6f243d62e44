mod commands;
mod io;
mod manifest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bashgen", version, about = "Build, validate and score natural-language-to-Bash datasets")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads where a stage can use them.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// TOML file whose keys mirror long flag names; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Enumerate command templates from utility specs.
    Generate(commands::GenerateArgs),
    /// Instantiate templates with fixtures and check that they run.
    Validate(commands::ValidateArgs),
    /// Subsample commands to match a utility distribution.
    Scale(commands::ScaleArgs),
    /// Describe commands in English through a chat-completion endpoint.
    Backtranslate(commands::LlmArgs),
    /// Generate commands with an LLM, dedup, parse-filter and back-translate.
    LlmPipeline(commands::LlmPipelineArgs),
    /// Seeded train/test split of a dataset.
    Split(commands::SplitArgs),
    /// Score predictions against references with the NLC2CMD metric.
    Score(commands::ScoreArgs),
    /// Corpus statistics.
    Stats(commands::StatsArgs),
    /// Replace parameters with typed placeholders.
    Templatize(commands::TemplatizeArgs),
    /// Fill a template's placeholders from values or an English sentence.
    Fill(commands::FillArgs),
    /// Draft a utility spec from a man page.
    ImportMan(commands::ImportManArgs),
}

/// Splice config-file values into argv as flags the user did not pass.
fn apply_config(argv: Vec<String>) -> Result<(Vec<String>, BTreeMap<String, String>)> {
    let config_path = argv.iter().enumerate().find_map(|(i, a)| {
        a.strip_prefix("--config=")
            .map(str::to_string)
            .or_else(|| (a == "--config").then(|| argv.get(i + 1).cloned()).flatten())
    });
    let Some(path) = config_path else {
        return Ok((argv, BTreeMap::new()));
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {path}"))?;

    let cli = Cli::command();
    let Some(sub_pos) = argv.iter().position(|a| cli.find_subcommand(a).is_some()) else {
        return Ok((argv, BTreeMap::new()));
    };
    let sub = cli.find_subcommand(&argv[sub_pos]).unwrap();

    let mut entries: Vec<(String, toml::Value)> = Vec::new();
    for (key, value) in table {
        match value {
            toml::Value::Table(section) if cli.find_subcommand(&key).is_some() => {
                if key == sub.get_name() {
                    entries.extend(section);
                }
            }
            other => entries.push((key, other)),
        }
    }

    let mut injected = Vec::new();
    let mut overrides = BTreeMap::new();
    for (key, value) in entries {
        let flag = key.replace('_', "-");
        if flag == "config" {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cli.get_arguments())
            .find(|a| a.get_long() == Some(flag.as_str()));
        let Some(arg) = arg else {
            let known_elsewhere = cli
                .get_subcommands()
                .any(|s| s.get_arguments().any(|a| a.get_long() == Some(flag.as_str())));
            if known_elsewhere {
                continue;
            }
            bail!("unknown config key {key:?}");
        };
        let long = format!("--{flag}");
        if argv.iter().any(|a| a == &long || a.starts_with(&format!("{long}="))) {
            continue;
        }
        let scalars = match &value {
            toml::Value::Array(items) => items.clone(),
            v => vec![v.clone()],
        };
        let takes_value = arg.get_action().takes_values();
        for v in scalars {
            let text = match v {
                toml::Value::String(s) => s,
                toml::Value::Boolean(b) if !takes_value => {
                    if b {
                        injected.push(long.clone());
                    }
                    continue;
                }
                other => other.to_string(),
            };
            if !takes_value {
                bail!("config key {key:?} is a switch and needs true or false");
            }
            injected.push(long.clone());
            injected.push(text.clone());
            overrides.insert(key.clone(), text);
        }
    }
    let mut out = argv;
    out.splice(sub_pos + 1..sub_pos + 1, injected);
    Ok((out, overrides))
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let argv: Vec<String> = std::env::args().collect();
    let result = apply_config(argv.clone()).and_then(|(args, overrides)| {
        let cli = Cli::parse_from(&args);
        commands::run(cli, argv[1..].to_vec(), overrides)
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
