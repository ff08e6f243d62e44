//! Paired NL/command datasets: line-delimited JSON records, statistics and
//! seeded train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bash_ast::{parse, UtilityNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Generated,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub nl: String,
    pub cmd: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Layout(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// The first malformed line aborts the read.
    #[default]
    Strict,
    /// Malformed lines are skipped and reported.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: Vec<FormatError>,
}

fn check_record(r: &DatasetRecord) -> Result<(), String> {
    if r.nl.trim().is_empty() {
        return Err("empty nl".into());
    }
    if r.cmd.trim().is_empty() {
        return Err("empty cmd".into());
    }
    Ok(())
}

/// Read any line-delimited JSON type. Blank lines are ignored.
pub fn read_jsonl_from<T: DeserializeOwned>(
    reader: impl BufRead,
    mode: ReadMode,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<ReadOutcome<T>, DatasetError> {
    let mut out = ReadOutcome {
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<T>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| check(&r).map(|_| r));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => {
                let err = FormatError { line: i + 1, message };
                match mode {
                    ReadMode::Strict => return Err(err.into()),
                    ReadMode::Lenient => out.skipped.push(err),
                }
            }
        }
    }
    Ok(out)
}

pub fn write_jsonl_to<T: Serialize>(mut writer: impl Write, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, mode: ReadMode) -> Result<ReadOutcome<T>, DatasetError> {
    read_jsonl_from(BufReader::new(File::open(path)?), mode, |_| Ok(()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    write_jsonl_to(BufWriter::new(File::create(path)?), items)
}

pub fn read_records_from(reader: impl BufRead, mode: ReadMode) -> Result<ReadOutcome<DatasetRecord>, DatasetError> {
    read_jsonl_from(reader, mode, check_record)
}

pub fn read_records(path: &Path, mode: ReadMode) -> Result<ReadOutcome<DatasetRecord>, DatasetError> {
    read_records_from(BufReader::new(File::open(path)?), mode)
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> io::Result<()> {
    write_jsonl(path, records)
}

/// Convert the NL2Bash layout: one file of sentences and one of commands,
/// paired by line number.
pub fn read_nl2bash(nl_path: &Path, cmd_path: &Path, source: Source) -> Result<Vec<DatasetRecord>, DatasetError> {
    let nl = fs::read_to_string(nl_path)?;
    let cmd = fs::read_to_string(cmd_path)?;
    let (nl, cmd): (Vec<&str>, Vec<&str>) = (nl.lines().collect(), cmd.lines().collect());
    if nl.len() != cmd.len() {
        return Err(DatasetError::Layout(format!(
            "{} sentences but {} commands",
            nl.len(),
            cmd.len()
        )));
    }
    nl.into_iter()
        .zip(cmd)
        .enumerate()
        .map(|(i, (n, c))| {
            let record = DatasetRecord {
                nl: n.trim().to_string(),
                cmd: c.trim().to_string(),
                source,
                valid: None,
            };
            check_record(&record).map_err(|message| FormatError { line: i + 1, message })?;
            Ok(record)
        })
        .collect()
}

pub fn write_nl2bash(nl_path: &Path, cmd_path: &Path, records: &[DatasetRecord]) -> io::Result<()> {
    let mut nl = BufWriter::new(File::create(nl_path)?);
    let mut cmd = BufWriter::new(File::create(cmd_path)?);
    for r in records {
        writeln!(nl, "{}", r.nl)?;
        writeln!(cmd, "{}", r.cmd)?;
    }
    nl.flush()?;
    cmd.flush()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub piped: usize,
    pub unpiped: usize,
    /// Commands the parser rejects; still counted as piped or unpiped.
    pub unparsed: usize,
    pub distinct_utilities: usize,
    /// Commands containing each utility, nested bodies included.
    pub utilities: BTreeMap<String, usize>,
    /// Commands by their first utility.
    pub heads: BTreeMap<String, usize>,
    /// Utility occurrences by number of flags attached.
    pub flag_counts: BTreeMap<usize, usize>,
    /// Commands by number of pipes.
    pub pipe_counts: BTreeMap<usize, usize>,
}

fn walk<'a>(node: &'a UtilityNode, f: &mut impl FnMut(&'a UtilityNode)) {
    f(node);
    for nested in node.nested() {
        walk(nested, f);
    }
}

pub fn stats<'a>(commands: impl IntoIterator<Item = &'a str>) -> DatasetStats {
    let mut s = DatasetStats::default();
    for cmd in commands {
        s.total += 1;
        let Ok(ast) = parse(cmd) else {
            s.unparsed += 1;
            if cmd.contains('|') {
                s.piped += 1;
            } else {
                s.unpiped += 1;
            }
            continue;
        };
        let pipes = ast.pipe_count();
        if pipes > 0 {
            s.piped += 1;
        } else {
            s.unpiped += 1;
        }
        *s.pipe_counts.entry(pipes).or_default() += 1;
        *s.heads.entry(ast.head_utility().to_string()).or_default() += 1;
        let mut seen = BTreeSet::new();
        for stage in &ast.stages {
            walk(stage, &mut |node| {
                seen.insert(node.name.clone());
                *s.flag_counts.entry(node.flags().count()).or_default() += 1;
            });
        }
        for u in seen {
            *s.utilities.entry(u).or_default() += 1;
        }
    }
    s.distinct_utilities = s.utilities.len();
    s
}

pub fn record_stats(records: &[DatasetRecord]) -> DatasetStats {
    stats(records.iter().map(|r| r.cmd.as_str()))
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("split fraction must be strictly between 0 and 1, got {0}")]
pub struct SplitError(pub f64);

/// Seeded shuffle, then the first `floor(n * fraction)` records go to train.
pub fn split<T: Clone>(records: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError(fraction));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (records.len() as f64 * fraction).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}
