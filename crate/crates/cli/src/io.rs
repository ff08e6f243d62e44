use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const RECORD_SCHEMA: &str =
    "one JSON object per line: {\"nl\": string, \"cmd\": string, \"source\": \"original\"|\"generated\"|\"llm\", \"valid\": bool?}";
pub const COMMAND_SCHEMA: &str =
    "one command per line, either plain text or a JSON object with a \"cmd\", \"command\" or \"template\" field";

/// A command-bearing input line.
pub struct CommandLine {
    pub text: String,
    /// True when the text came from a generator template.
    pub is_template: bool,
}

/// Read commands from plain-text or JSONL input. Validation results with a
/// non-valid verdict are skipped.
pub fn read_commands(path: &Path) -> Result<Vec<CommandLine>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !trimmed.starts_with('{') {
            out.push(CommandLine {
                text: trimmed.to_string(),
                is_template: false,
            });
            continue;
        }
        let value: Value = serde_json::from_str(trimmed)
            .with_context(|| format!("{}:{}: invalid JSON; expected {COMMAND_SCHEMA}", path.display(), i + 1))?;
        if value.get("verdict").and_then(Value::as_str).is_some_and(|v| v != "valid") {
            continue;
        }
        let field = |name: &str| value.get(name).and_then(Value::as_str).map(str::to_string);
        let (text, is_template) = match (field("cmd").or_else(|| field("command")), field("template")) {
            (Some(c), _) => (c, false),
            (None, Some(t)) => (t, true),
            (None, None) => bail!("{}:{}: no command field; expected {COMMAND_SCHEMA}", path.display(), i + 1),
        };
        out.push(CommandLine { text, is_template });
    }
    Ok(out)
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_jsonl<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    let mut w = open_output(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        return Ok(io::read_to_string(io::stdin())?);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
