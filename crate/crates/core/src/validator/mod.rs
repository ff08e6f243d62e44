//! Instantiate templates with fixture values and execute them in a
//! throwaway workspace to decide whether they are valid commands.

mod safety;
mod sandbox;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bash_ast::{parse, BashAst};
use crate::generator::GeneratedCommand;
use crate::syntax_kb::GenArgKind;

pub use safety::SafetyPolicy;
pub use sandbox::run_batch;

const BUILTIN_FIXTURES: &str = include_str!("../../data/fixtures.toml");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("fixture path {0:?} must be relative and stay inside the workspace")]
    UnsafePath(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no fixture value for argument kind {0:?}")]
pub struct MissingFixture(pub GenArgKind);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub path: String,
    #[serde(default)]
    pub content: String,
}

/// Files and directories created in every fresh workspace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    #[serde(default)]
    pub dirs: Vec<String>,
    #[serde(default)]
    pub files: Vec<FixtureFile>,
}

impl WorkspaceManifest {
    /// Create the manifest's tree under `root`.
    pub fn provision(&self, root: &Path) -> io::Result<()> {
        for dir in &self.dirs {
            fs::create_dir_all(root.join(dir))?;
        }
        for file in &self.files {
            let path = root.join(&file.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, &file.content)?;
        }
        Ok(())
    }
}

/// Concrete values substituted for each generation-side argument kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTable {
    #[serde(default)]
    pub values: BTreeMap<GenArgKind, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureDoc {
    #[serde(default)]
    dirs: Vec<String>,
    #[serde(default)]
    files: Vec<FixtureFile>,
    #[serde(default)]
    values: BTreeMap<GenArgKind, Vec<String>>,
}

/// Parse a fixture file into its workspace manifest and value table.
pub fn parse_fixtures(text: &str) -> Result<(WorkspaceManifest, FixtureTable), FixtureError> {
    let doc: FixtureDoc = toml::from_str(text)?;
    let paths = doc.dirs.iter().chain(doc.files.iter().map(|f| &f.path));
    for p in paths {
        let path = Path::new(p);
        if path.is_absolute() || path.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(FixtureError::UnsafePath(p.clone()));
        }
    }
    Ok((
        WorkspaceManifest {
            dirs: doc.dirs,
            files: doc.files,
        },
        FixtureTable { values: doc.values },
    ))
}

pub fn load_fixtures(path: &Path) -> Result<(WorkspaceManifest, FixtureTable), FixtureError> {
    parse_fixtures(&fs::read_to_string(path)?)
}

/// The fixture set shipped with the crate.
pub fn builtin_fixtures() -> (WorkspaceManifest, FixtureTable) {
    parse_fixtures(BUILTIN_FIXTURES).expect("builtin fixtures are valid")
}

/// Replace every `[Kind]` slot with a fixture value, cycling through the
/// values of each kind independently.
pub fn instantiate_ast(template: &BashAst, fixtures: &FixtureTable) -> Result<String, MissingFixture> {
    let mut ast = template.clone();
    let mut counters: BTreeMap<GenArgKind, usize> = BTreeMap::new();
    let mut missing = None;
    for stage in &mut ast.stages {
        stage.params_mut(&mut |p| {
            if missing.is_some() {
                return;
            }
            let Some(kind) = GenArgKind::from_placeholder(&p.literal) else {
                return;
            };
            match fixtures.values.get(&kind).filter(|v| !v.is_empty()) {
                Some(values) => {
                    let n = counters.entry(kind).or_insert(0);
                    p.literal = values[*n % values.len()].clone();
                    *n += 1;
                }
                None => missing = Some(kind),
            }
        });
    }
    match missing {
        Some(kind) => Err(MissingFixture(kind)),
        None => Ok(ast.render()),
    }
}

pub fn instantiate(template: &GeneratedCommand, fixtures: &FixtureTable) -> Result<String, MissingFixture> {
    instantiate_ast(&template.template, fixtures)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Subprocess,
    /// Never execute; a command is valid iff it parses.
    DryRun,
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub manifest: WorkspaceManifest,
    /// Where per-command workspaces are created; the system temp dir if unset.
    pub scratch_root: Option<PathBuf>,
    pub timeout: Duration,
    /// The complete environment handed to commands.
    pub env: Vec<(String, String)>,
    pub backend: Backend,
    /// Subprocess execution is refused unless this is set.
    pub allow_exec: bool,
    pub jobs: usize,
    pub policy: SafetyPolicy,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            manifest: builtin_fixtures().0,
            scratch_root: None,
            timeout: Duration::from_millis(500),
            env: vec![
                ("PATH".into(), "/usr/local/bin:/usr/bin:/bin".into()),
                ("LC_ALL".into(), "C".into()),
            ],
            backend: Backend::Subprocess,
            allow_exec: false,
            jobs: 1,
            policy: SafetyPolicy::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("cannot set up workspace: {0}")]
    Setup(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Code(i32),
    Timeout,
    SpawnFail,
    /// Blocked before execution by the safety policy or the exec gate.
    Refused,
}

impl Serialize for ExitStatus {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExitStatus::Code(c) => s.serialize_i32(*c),
            ExitStatus::Timeout => s.serialize_str("TIMEOUT"),
            ExitStatus::SpawnFail => s.serialize_str("SPAWN_FAIL"),
            ExitStatus::Refused => s.serialize_str("REFUSED"),
        }
    }
}

impl<'de> Deserialize<'de> for ExitStatus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Code(i32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Code(c) => Ok(ExitStatus::Code(c)),
            Raw::Name(n) => match n.as_str() {
                "TIMEOUT" => Ok(ExitStatus::Timeout),
                "SPAWN_FAIL" => Ok(ExitStatus::SpawnFail),
                "REFUSED" => Ok(ExitStatus::Refused),
                other => Err(serde::de::Error::custom(format!("unknown exit status {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub command: String,
    pub exit_status: ExitStatus,
    /// Seconds.
    pub wall_time: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ValidationResult {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Rate {
    pub valid: usize,
    pub total: usize,
}

impl Rate {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.valid as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidityReport {
    pub per_utility: BTreeMap<String, Rate>,
    pub overall: Rate,
}

/// Valid fraction per head utility and overall. Unparseable commands are
/// grouped under `<unparsed>`.
pub fn validity_rate(results: &[ValidationResult]) -> ValidityReport {
    let mut report = ValidityReport::default();
    for r in results {
        let key = parse(&r.command)
            .map(|a| a.head_utility().to_string())
            .unwrap_or_else(|_| "<unparsed>".to_string());
        for rate in [report.per_utility.entry(key).or_default(), &mut report.overall] {
            rate.total += 1;
            rate.valid += usize::from(r.is_valid());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: &[(GenArgKind, &[&str])]) -> FixtureTable {
        FixtureTable {
            values: pairs
                .iter()
                .map(|(k, v)| (*k, v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }

    #[test]
    fn builtin_fixtures_cover_every_kind() {
        let (manifest, fixtures) = builtin_fixtures();
        for kind in GenArgKind::ALL {
            assert!(fixtures.values.get(&kind).is_some_and(|v| !v.is_empty()), "{kind:?}");
        }
        assert!(manifest.files.iter().any(|f| f.path == "temp.txt"));
        assert!(manifest.dirs.iter().any(|d| d == "abc"));
    }

    #[test]
    fn instantiate_cycles_per_kind() {
        let ast = parse("cp [File] [File] [File] [Directory]").unwrap();
        let t = table(&[
            (GenArgKind::File, &["a.txt", "b.txt"]),
            (GenArgKind::Directory, &["abc"]),
        ]);
        assert_eq!(instantiate_ast(&ast, &t).unwrap(), "cp a.txt b.txt a.txt abc");
    }

    #[test]
    fn instantiate_reports_missing_kind() {
        let ast = parse("ls [Directory]").unwrap();
        let t = table(&[(GenArgKind::File, &["a.txt"])]);
        assert_eq!(instantiate_ast(&ast, &t), Err(MissingFixture(GenArgKind::Directory)));
    }

    #[test]
    fn rejects_escaping_fixture_paths() {
        assert!(matches!(parse_fixtures("dirs = [\"../x\"]"), Err(FixtureError::UnsafePath(_))));
        assert!(matches!(
            parse_fixtures("[[files]]\npath = \"/etc/x\""),
            Err(FixtureError::UnsafePath(_))
        ));
    }

    #[test]
    fn exit_status_json_forms() {
        let r = ValidationResult {
            command: "ls".into(),
            exit_status: ExitStatus::Timeout,
            wall_time: 0.5,
            verdict: Verdict::Invalid,
            reason: None,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"TIMEOUT\""));
        assert_eq!(serde_json::from_str::<ValidationResult>(&json).unwrap(), r);
        let code: ExitStatus = serde_json::from_str("2").unwrap();
        assert_eq!(code, ExitStatus::Code(2));
    }

    #[test]
    fn validity_rate_groups_by_head() {
        let mk = |cmd: &str, ok: bool| ValidationResult {
            command: cmd.into(),
            exit_status: ExitStatus::Code(if ok { 0 } else { 1 }),
            wall_time: 0.0,
            verdict: if ok { Verdict::Valid } else { Verdict::Invalid },
            reason: None,
        };
        let report = validity_rate(&[mk("ls", true), mk("ls -l | wc", false), mk("cat a", true)]);
        assert_eq!(report.per_utility["ls"], Rate { valid: 1, total: 2 });
        assert_eq!(report.overall, Rate { valid: 2, total: 3 });
        assert!((report.overall.fraction() - 2.0 / 3.0).abs() < 1e-12);
    }
}
