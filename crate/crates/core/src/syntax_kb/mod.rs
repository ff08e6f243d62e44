//! Per-utility syntax templates: which flags exist, what argument each flag
//! takes, and the positional argument slots that follow.
//!
//! Specs live in TOML files with one `[[utility]]` table per utility:
//!
//! ```toml
//! [[utility]]
//! name = "tar"
//! template = ["UTILITY", "FLAGS", "Path"]
//! flags = [{ token = "-c" }, { token = "-j" }, { token = "-f", arg = "File" }]
//! pipe_successors = []
//! ```
//!
//! `template` entries are `UTILITY`, `FLAGS`, or a [`GenArgKind`] name.

mod manpage;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bash_ast::{FlagArity, FlagLookup, PlaceholderKind};

pub use manpage::{import_manpage, ImportError, ImportedSpec};

/// Argument types used on the generation side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GenArgKind {
    File,
    Directory,
    Path,
    Quantity,
    Pattern,
    FormattedString,
    Separator,
    Permission,
    Size,
    Timespan,
    Datetime,
    User,
    Group,
    Extension,
    String,
}

impl GenArgKind {
    pub const ALL: [GenArgKind; 15] = [
        GenArgKind::File,
        GenArgKind::Directory,
        GenArgKind::Path,
        GenArgKind::Quantity,
        GenArgKind::Pattern,
        GenArgKind::FormattedString,
        GenArgKind::Separator,
        GenArgKind::Permission,
        GenArgKind::Size,
        GenArgKind::Timespan,
        GenArgKind::Datetime,
        GenArgKind::User,
        GenArgKind::Group,
        GenArgKind::Extension,
        GenArgKind::String,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GenArgKind::File => "File",
            GenArgKind::Directory => "Directory",
            GenArgKind::Path => "Path",
            GenArgKind::Quantity => "Quantity",
            GenArgKind::Pattern => "Pattern",
            GenArgKind::FormattedString => "FormattedString",
            GenArgKind::Separator => "Separator",
            GenArgKind::Permission => "Permission",
            GenArgKind::Size => "Size",
            GenArgKind::Timespan => "Timespan",
            GenArgKind::Datetime => "Datetime",
            GenArgKind::User => "User",
            GenArgKind::Group => "Group",
            GenArgKind::Extension => "Extension",
            GenArgKind::String => "String",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Template placeholder form, e.g. `[File]`.
    pub fn placeholder(self) -> String {
        format!("[{}]", self.name())
    }

    pub fn from_placeholder(token: &str) -> Option<Self> {
        token
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .and_then(Self::from_name)
    }

    pub fn to_parser_kind(self) -> PlaceholderKind {
        to_parser_kind(self)
    }
}

impl fmt::Display for GenArgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Each generator kind maps onto exactly one parser placeholder.
pub fn to_parser_kind(kind: GenArgKind) -> PlaceholderKind {
    match kind {
        GenArgKind::File => PlaceholderKind::File,
        GenArgKind::Directory => PlaceholderKind::Directory,
        GenArgKind::Path => PlaceholderKind::Path,
        GenArgKind::Quantity => PlaceholderKind::Number,
        GenArgKind::Permission => PlaceholderKind::Permission,
        GenArgKind::Size => PlaceholderKind::Size,
        GenArgKind::Timespan => PlaceholderKind::Timespan,
        GenArgKind::Datetime => PlaceholderKind::Datetime,
        GenArgKind::Pattern
        | GenArgKind::FormattedString
        | GenArgKind::Separator
        | GenArgKind::User
        | GenArgKind::Group
        | GenArgKind::Extension
        | GenArgKind::String => PlaceholderKind::Regex,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Utility,
    Flags,
    Arg(GenArgKind),
}

impl Slot {
    pub fn as_str(&self) -> &'static str {
        match self {
            Slot::Utility => "UTILITY",
            Slot::Flags => "FLAGS",
            Slot::Arg(kind) => kind.name(),
        }
    }

    fn parse(s: &str) -> Option<Slot> {
        match s {
            "UTILITY" => Some(Slot::Utility),
            "FLAGS" => Some(Slot::Flags),
            other => GenArgKind::from_name(other).map(Slot::Arg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlagSpec {
    pub token: String,
    pub arg: Option<GenArgKind>,
}

impl FlagSpec {
    pub fn new(token: impl Into<String>, arg: Option<GenArgKind>) -> Self {
        Self {
            token: token.into(),
            arg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilitySpec {
    pub name: String,
    pub template: Vec<Slot>,
    pub flags: Vec<FlagSpec>,
    pub pipe_successors: Vec<String>,
}

impl UtilitySpec {
    pub fn flag(&self, token: &str) -> Option<&FlagSpec> {
        self.flags.iter().find(|f| f.token == token)
    }

    /// Positional argument kinds in template order.
    pub fn positional(&self) -> impl Iterator<Item = GenArgKind> + '_ {
        self.template.iter().filter_map(|s| match s {
            Slot::Arg(kind) => Some(*kind),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}{}: {field}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct SchemaError {
    pub origin: String,
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    utility: Vec<RawUtility>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    name: toml::Spanned<String>,
    #[serde(default)]
    template: Vec<String>,
    #[serde(default)]
    flags: Vec<RawFlag>,
    #[serde(default)]
    pipe_successors: Vec<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawFlag {
    token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arg: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse spec-file text. `origin` names the source in diagnostics.
pub fn parse_specs(text: &str, origin: &str) -> Result<Vec<UtilitySpec>, SchemaError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| SchemaError {
        origin: origin.to_string(),
        line: e.span().map(|s| line_of(text, s.start)),
        field: "document".into(),
        message: e.message().to_string(),
    })?;

    let mut specs = Vec::with_capacity(raw.utility.len());
    for entry in raw.utility {
        let line = Some(line_of(text, entry.name.span().start));
        let err = |field: &str, message: String| SchemaError {
            origin: origin.to_string(),
            line,
            field: field.to_string(),
            message,
        };
        let name = entry.name.into_inner();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(err("name", format!("invalid utility name {name:?}")));
        }

        let mut template = Vec::with_capacity(entry.template.len());
        for (i, slot) in entry.template.iter().enumerate() {
            let parsed = Slot::parse(slot)
                .ok_or_else(|| err("template", format!("{name}: unknown slot {slot:?}")))?;
            match parsed {
                Slot::Utility if i != 0 => {
                    return Err(err("template", format!("{name}: UTILITY must be the first slot")))
                }
                Slot::Flags if template.contains(&Slot::Flags) => {
                    return Err(err("template", format!("{name}: FLAGS appears twice")))
                }
                _ => {}
            }
            template.push(parsed);
        }
        if !template.is_empty() && template[0] != Slot::Utility {
            return Err(err("template", format!("{name}: first slot must be UTILITY")));
        }

        let mut seen = HashSet::new();
        let mut flags = Vec::with_capacity(entry.flags.len());
        for flag in entry.flags {
            if !flag.token.starts_with('-') || flag.token.len() < 2 {
                return Err(err(
                    "flags",
                    format!("{name}: flag {:?} must begin with '-'", flag.token),
                ));
            }
            if !seen.insert(flag.token.clone()) {
                return Err(err("flags", format!("{name}: duplicate flag {}", flag.token)));
            }
            let arg = match flag.arg.as_deref() {
                None => None,
                Some(a) => Some(GenArgKind::from_name(a).ok_or_else(|| {
                    err(
                        "flags",
                        format!("{name}: flag {} has unknown argument kind {a:?}", flag.token),
                    )
                })?),
            };
            flags.push(FlagSpec::new(flag.token, arg));
        }

        specs.push(UtilitySpec {
            name,
            template,
            flags,
            pipe_successors: entry.pipe_successors,
        });
    }
    check_unique(&specs, origin)?;
    Ok(specs)
}

fn check_unique(specs: &[UtilitySpec], origin: &str) -> Result<(), SchemaError> {
    let mut seen = HashSet::new();
    for spec in specs {
        if !seen.insert(spec.name.as_str()) {
            return Err(SchemaError {
                origin: origin.to_string(),
                line: None,
                field: "name".into(),
                message: format!("duplicate utility {:?}", spec.name),
            });
        }
    }
    Ok(())
}

/// Load specs from a file, or from every `*.toml` file in a directory
/// (sorted by file name).
pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<UtilitySpec>, SchemaError> {
    let path = path.as_ref();
    let io_err = |p: &Path, e: std::io::Error| SchemaError {
        origin: p.display().to_string(),
        line: None,
        field: "file".into(),
        message: e.to_string(),
    };
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    let mut all = Vec::new();
    for file in &files {
        let text = std::fs::read_to_string(file).map_err(|e| io_err(file, e))?;
        all.extend(parse_specs(&text, &file.display().to_string())?);
    }
    check_unique(&all, &path.display().to_string())?;
    Ok(all)
}

/// Serialize specs back to the spec-file format.
pub fn render_specs(specs: &[UtilitySpec]) -> String {
    #[derive(Serialize)]
    struct OutFile<'a> {
        utility: Vec<OutUtility<'a>>,
    }
    #[derive(Serialize)]
    struct OutUtility<'a> {
        name: &'a str,
        template: Vec<&'static str>,
        flags: Vec<RawFlag>,
        pipe_successors: &'a [String],
    }
    let out = OutFile {
        utility: specs
            .iter()
            .map(|s| OutUtility {
                name: &s.name,
                template: s.template.iter().map(Slot::as_str).collect(),
                flags: s
                    .flags
                    .iter()
                    .map(|f| RawFlag {
                        token: f.token.clone(),
                        arg: f.arg.map(|a| a.name().to_string()),
                    })
                    .collect(),
                pipe_successors: &s.pipe_successors,
            })
            .collect(),
    };
    toml::to_string(&out).expect("spec serialization cannot fail")
}

/// Indexed collection of utility specs; implements [`FlagLookup`] for the
/// parser.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    specs: Vec<UtilitySpec>,
    index: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new(specs: Vec<UtilitySpec>) -> Self {
        let index = specs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        Self { specs, index }
    }

    pub fn get(&self, utility: &str) -> Option<&UtilitySpec> {
        self.index.get(utility).map(|&i| &self.specs[i])
    }

    pub fn specs(&self) -> &[UtilitySpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

impl FlagLookup for KnowledgeBase {
    fn flag_arity(&self, utility: &str, flag: &str) -> FlagArity {
        match self.get(utility).and_then(|s| s.flag(flag)) {
            None => FlagArity::Unknown,
            Some(FlagSpec { arg: None, .. }) => FlagArity::NoArg,
            Some(FlagSpec { arg: Some(kind), .. }) => FlagArity::Takes(kind.to_parser_kind()),
        }
    }

    fn positional_kind(&self, utility: &str, index: usize) -> Option<PlaceholderKind> {
        self.get(utility)?
            .positional()
            .nth(index)
            .map(GenArgKind::to_parser_kind)
    }
}

pub const BUILTIN_SPECS: &str = include_str!("../../data/specs.toml");

/// The curated specs shipped with the crate.
pub fn builtin() -> &'static KnowledgeBase {
    static KB: LazyLock<KnowledgeBase> = LazyLock::new(|| {
        KnowledgeBase::new(parse_specs(BUILTIN_SPECS, "builtin specs.toml").expect("bundled specs are valid"))
    });
    &KB
}
