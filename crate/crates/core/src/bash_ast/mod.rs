//! Typed ASTs for single-line Bash commands.
//!
//! A command is a pipeline of [`UtilityNode`]s. Each node keeps its flags,
//! parameters, nested `-exec`/`$(...)` bodies and redirects in source order so
//! rendering reproduces the original token sequence. Parameters carry a
//! [`PlaceholderKind`] assigned at parse time; [`templatize`] swaps literals
//! for `_KIND` tokens and [`fill`] puts concrete values back.

mod categorize;
mod lexer;
mod parser;
mod template;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use categorize::{categorize, ParamContext};
pub use parser::{parse, parse_with, FlagArity, FlagLookup, NoLookup};
pub use template::{fill, fill_ast, templatize, vocabulary, EmptyCorpus, Filled, TypedValue};

/// Parameter categories used by the command-side tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PlaceholderKind {
    Number,
    Path,
    File,
    Directory,
    Datetime,
    Permission,
    Timespan,
    Size,
    Regex,
}

impl PlaceholderKind {
    pub const ALL: [PlaceholderKind; 9] = [
        PlaceholderKind::Number,
        PlaceholderKind::Path,
        PlaceholderKind::File,
        PlaceholderKind::Directory,
        PlaceholderKind::Datetime,
        PlaceholderKind::Permission,
        PlaceholderKind::Timespan,
        PlaceholderKind::Size,
        PlaceholderKind::Regex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlaceholderKind::Number => "NUMBER",
            PlaceholderKind::Path => "PATH",
            PlaceholderKind::File => "FILE",
            PlaceholderKind::Directory => "DIRECTORY",
            PlaceholderKind::Datetime => "DATETIME",
            PlaceholderKind::Permission => "PERMISSION",
            PlaceholderKind::Timespan => "TIMESPAN",
            PlaceholderKind::Size => "SIZE",
            PlaceholderKind::Regex => "REGEX",
        }
    }

    /// The placeholder token written into templates, e.g. `_PATH`.
    pub fn token(self) -> &'static str {
        match self {
            PlaceholderKind::Number => "_NUMBER",
            PlaceholderKind::Path => "_PATH",
            PlaceholderKind::File => "_FILE",
            PlaceholderKind::Directory => "_DIRECTORY",
            PlaceholderKind::Datetime => "_DATETIME",
            PlaceholderKind::Permission => "_PERMISSION",
            PlaceholderKind::Timespan => "_TIMESPAN",
            PlaceholderKind::Size => "_SIZE",
            PlaceholderKind::Regex => "_REGEX",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.token() == token)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let name = name.trim_start_matches('_');
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for PlaceholderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unbalanced {quote} quote starting at byte {offset}")]
    UnbalancedQuote { quote: char, offset: usize },
    #[error("pipe stage {stage} has no utility token")]
    MissingUtility { stage: usize },
    #[error("unsupported shell syntax {token:?} at byte {offset}")]
    Unsupported { token: String, offset: usize },
    #[error("{flag} body is missing its ';' or '+' terminator")]
    UnterminatedExec { flag: String },
    #[error("unclosed $( substitution")]
    UnclosedSubstitution,
    #[error("nesting deeper than one level is not supported")]
    TooDeep,
    #[error("redirect {op:?} has no target")]
    MissingRedirectTarget { op: String },
    #[error("command must be a single line")]
    MultiLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamNode {
    pub literal: String,
    pub category: PlaceholderKind,
}

impl ParamNode {
    pub fn new(literal: impl Into<String>, category: PlaceholderKind) -> Self {
        Self {
            literal: literal.into(),
            category,
        }
    }

    /// True when the literal is still a `_KIND` placeholder token.
    pub fn is_placeholder(&self) -> bool {
        PlaceholderKind::from_token(&self.literal).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagArg {
    Value(ParamNode),
    /// Body of `-exec`/`-ok` style flags, closed by `;` (any quoting) or `+`.
    Command {
        body: Box<UtilityNode>,
        terminator: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagNode {
    pub token: String,
    pub arg: Option<FlagArg>,
}

impl FlagNode {
    pub fn bare(token: impl Into<String>) -> Self {
        Self {
            token: token.into(),
            arg: None,
        }
    }

    pub fn value(&self) -> Option<&ParamNode> {
        match &self.arg {
            Some(FlagArg::Value(p)) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arg {
    Flag(FlagNode),
    Param(ParamNode),
    /// `$(...)` command substitution in parameter position.
    Substitution(UtilityNode),
    Redirect { op: String, target: ParamNode },
    /// Tokens kept as-is and never templatized: `{}` and `--`.
    Verbatim(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityNode {
    pub name: String,
    pub args: Vec<Arg>,
}

impl UtilityNode {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn flags(&self) -> impl Iterator<Item = &FlagNode> {
        self.args.iter().filter_map(|a| match a {
            Arg::Flag(f) => Some(f),
            _ => None,
        })
    }

    /// Positional parameters, excluding flag arguments and redirect targets.
    pub fn params(&self) -> impl Iterator<Item = &ParamNode> {
        self.args.iter().filter_map(|a| match a {
            Arg::Param(p) => Some(p),
            _ => None,
        })
    }

    /// Nested utilities from `-exec` bodies and `$(...)` substitutions.
    pub fn nested(&self) -> impl Iterator<Item = &UtilityNode> {
        self.args.iter().filter_map(|a| match a {
            Arg::Flag(FlagNode {
                arg: Some(FlagArg::Command { body, .. }),
                ..
            }) => Some(body.as_ref()),
            Arg::Substitution(body) => Some(body),
            _ => None,
        })
    }

    pub fn flag_tokens(&self) -> impl Iterator<Item = &str> {
        self.flags().map(|f| f.token.as_str())
    }

    /// Every parameter node in render order, including flag values,
    /// redirect targets and nested bodies.
    pub fn all_params(&self) -> Vec<&ParamNode> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(p));
        out
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a ParamNode)) {
        for arg in &self.args {
            match arg {
                Arg::Flag(flag) => match &flag.arg {
                    Some(FlagArg::Value(p)) => f(p),
                    Some(FlagArg::Command { body, .. }) => body.visit_params(f),
                    None => {}
                },
                Arg::Param(p) => f(p),
                Arg::Substitution(body) => body.visit_params(f),
                Arg::Redirect { target, .. } => f(target),
                Arg::Verbatim(_) => {}
            }
        }
    }

    pub(crate) fn params_mut(&mut self, f: &mut dyn FnMut(&mut ParamNode)) {
        for arg in &mut self.args {
            match arg {
                Arg::Flag(flag) => match &mut flag.arg {
                    Some(FlagArg::Value(p)) => f(p),
                    Some(FlagArg::Command { body, .. }) => body.params_mut(f),
                    None => {}
                },
                Arg::Param(p) => f(p),
                Arg::Substitution(body) => body.params_mut(f),
                Arg::Redirect { target, .. } => f(target),
                Arg::Verbatim(_) => {}
            }
        }
    }

    /// Tokens as they appear when rendered, minus substitution brackets.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = vec![self.name.as_str()];
        for arg in &self.args {
            match arg {
                Arg::Flag(flag) => {
                    out.push(&flag.token);
                    match &flag.arg {
                        Some(FlagArg::Value(p)) => out.push(&p.literal),
                        Some(FlagArg::Command { body, terminator }) => {
                            out.extend(body.tokens());
                            out.push(terminator);
                        }
                        None => {}
                    }
                }
                Arg::Param(p) => out.push(&p.literal),
                Arg::Substitution(body) => out.extend(body.tokens()),
                Arg::Redirect { op, target } => {
                    out.push(op);
                    out.push(&target.literal);
                }
                Arg::Verbatim(v) => out.push(v),
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = self.name.clone();
        for arg in &self.args {
            out.push(' ');
            match arg {
                Arg::Flag(flag) => {
                    out.push_str(&flag.token);
                    match &flag.arg {
                        Some(FlagArg::Value(p)) => {
                            out.push(' ');
                            out.push_str(&p.literal);
                        }
                        Some(FlagArg::Command { body, terminator }) => {
                            out.push(' ');
                            out.push_str(&body.render());
                            out.push(' ');
                            out.push_str(terminator);
                        }
                        None => {}
                    }
                }
                Arg::Param(p) => out.push_str(&p.literal),
                Arg::Substitution(body) => {
                    out.push_str("$(");
                    out.push_str(&body.render());
                    out.push(')');
                }
                Arg::Redirect { op, target } => {
                    out.push_str(op);
                    out.push(' ');
                    out.push_str(&target.literal);
                }
                Arg::Verbatim(v) => out.push_str(v),
            }
        }
        out
    }
}

/// A parsed command: one [`UtilityNode`] per pipe stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BashAst {
    pub stages: Vec<UtilityNode>,
    pub raw: String,
}

impl BashAst {
    pub fn render(&self) -> String {
        self.stages
            .iter()
            .map(UtilityNode::render)
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Equality of the parsed structure, ignoring the original source text.
    pub fn same_structure(&self, other: &BashAst) -> bool {
        self.stages == other.stages
    }

    pub fn head_utility(&self) -> &str {
        &self.stages[0].name
    }

    pub fn pipe_count(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn utilities(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().map(|s| s.name.as_str())
    }

    pub fn all_params(&self) -> Vec<&ParamNode> {
        self.stages.iter().flat_map(|s| s.all_params()).collect()
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.stages.iter().flat_map(|s| s.tokens()).collect()
    }
}

impl fmt::Display for BashAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
