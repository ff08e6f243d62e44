use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BashAst, PlaceholderKind};

/// A concrete value tagged with the placeholder kind it may fill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedValue {
    pub kind: PlaceholderKind,
    pub literal: String,
}

impl TypedValue {
    pub fn new(kind: PlaceholderKind, literal: impl Into<String>) -> Self {
        Self {
            kind,
            literal: literal.into(),
        }
    }
}

/// Replace every parameter literal with its `_KIND` token.
pub fn templatize(ast: &BashAst) -> BashAst {
    let mut out = ast.clone();
    for stage in &mut out.stages {
        stage.params_mut(&mut |p| p.literal = p.category.token().to_string());
    }
    out.raw = out.render();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filled {
    pub ast: BashAst,
    pub command: String,
    /// Placeholders left in place because no value of their kind remained.
    pub unfilled: usize,
}

/// Fill `_KIND` placeholders left to right, each with the first unused value
/// of the same kind. Placeholders with no matching value stay as they are.
pub fn fill_ast(template: &BashAst, values: &[TypedValue]) -> Filled {
    let mut used = vec![false; values.len()];
    let mut unfilled = 0;
    let mut ast = template.clone();
    for stage in &mut ast.stages {
        stage.params_mut(&mut |p| {
            if !p.is_placeholder() {
                return;
            }
            let slot = values
                .iter()
                .enumerate()
                .find(|(i, v)| !used[*i] && v.kind == p.category);
            match slot {
                Some((i, v)) => {
                    used[i] = true;
                    p.literal = shell_quote(&v.literal);
                }
                None => unfilled += 1,
            }
        });
    }
    let command = ast.render();
    ast.raw = command.clone();
    Filled {
        ast,
        command,
        unfilled,
    }
}

/// String form of [`fill_ast`]: the rendered command and the number of
/// placeholders that remain.
pub fn fill(template: &BashAst, values: &[TypedValue]) -> (String, usize) {
    let filled = fill_ast(template, values);
    (filled.command, filled.unfilled)
}

fn shell_quote(value: &str) -> String {
    let already_quoted = value.len() >= 2
        && ((value.starts_with('\'') && value.ends_with('\''))
            || (value.starts_with('"') && value.ends_with('"')));
    let needs = value.is_empty()
        || value
            .chars()
            .any(|c| c.is_whitespace() || "|&;<>()$`\\\"'".contains(c));
    if already_quoted || !needs {
        value.to_string()
    } else {
        format!("'{}'", value.replace('\'', r"'\''"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("vocabulary of an empty corpus")]
pub struct EmptyCorpus;

/// Distinct tokens over a corpus, optionally after templatization.
pub fn vocabulary(corpus: &[BashAst], templatized: bool) -> Result<BTreeSet<String>, EmptyCorpus> {
    if corpus.is_empty() {
        return Err(EmptyCorpus);
    }
    let mut vocab = BTreeSet::new();
    for ast in corpus {
        if templatized {
            vocab.extend(templatize(ast).tokens().into_iter().map(str::to_string));
        } else {
            vocab.extend(ast.tokens().into_iter().map(str::to_string));
        }
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bash_ast::parse;
    use PlaceholderKind::*;

    #[test]
    fn templatize_examples() {
        let tar = parse("tar -cjf backup.bz2 mydir").unwrap();
        assert_eq!(templatize(&tar).render(), "tar -cjf _FILE _PATH");
        assert_eq!(templatize(&parse("ls").unwrap()).render(), "ls");
    }

    #[test]
    fn templatize_is_idempotent_and_keeps_structure() {
        let ast = parse("find /tmp -name '*.log' -mtime +7 -exec rm {} \\; | wc -l").unwrap();
        let once = templatize(&ast);
        assert_eq!(once, templatize(&once));
        assert_eq!(
            once.render(),
            "find _PATH -name _REGEX -mtime _TIMESPAN -exec rm {} \\; | wc -l"
        );
        let flags = |a: &BashAst| -> Vec<String> {
            a.stages
                .iter()
                .flat_map(|s| s.flag_tokens().map(str::to_string).collect::<Vec<_>>())
                .collect()
        };
        assert_eq!(flags(&ast), flags(&once));
        assert_eq!(
            ast.utilities().collect::<Vec<_>>(),
            once.utilities().collect::<Vec<_>>()
        );
    }

    #[test]
    fn partial_fill_leaves_placeholder() {
        let template = parse("find _PATH -inum _NUMBER -exec rm {} ;").unwrap();
        let (cmd, left) = fill(&template, &[TypedValue::new(Path, ".")]);
        assert_eq!(cmd, "find . -inum _NUMBER -exec rm {} ;");
        assert_eq!(left, 1);
    }

    #[test]
    fn full_fill() {
        let template = parse("cd _DIRECTORY").unwrap();
        assert_eq!(
            fill(&template, &[TypedValue::new(Directory, "abc")]),
            ("cd abc".to_string(), 0)
        );
        assert_eq!(fill(&parse("ls").unwrap(), &[]), ("ls".to_string(), 0));
    }

    #[test]
    fn values_consumed_in_order_by_kind() {
        let template = parse("diff _FILE _FILE").unwrap();
        let values = [
            TypedValue::new(Path, "/x"),
            TypedValue::new(File, "a.txt"),
            TypedValue::new(File, "b.txt"),
        ];
        assert_eq!(fill(&template, &values).0, "diff a.txt b.txt");
    }

    #[test]
    fn values_with_spaces_are_quoted() {
        let template = parse("grep _REGEX _FILE").unwrap();
        let (cmd, _) = fill(
            &template,
            &[
                TypedValue::new(Regex, "hello world"),
                TypedValue::new(File, "a.txt"),
            ],
        );
        assert_eq!(cmd, "grep 'hello world' a.txt");
        assert!(parse(&cmd).is_ok());
    }

    #[test]
    fn fill_then_templatize_recovers_template() {
        let template = parse("tar -cjf _FILE _PATH").unwrap();
        let filled = fill_ast(
            &template,
            &[TypedValue::new(File, "x.bz2"), TypedValue::new(Path, "dir")],
        );
        assert_eq!(filled.unfilled, 0);
        assert!(templatize(&filled.ast).same_structure(&template));
    }

    #[test]
    fn vocabulary_examples() {
        let corpus = vec![parse("ls /a").unwrap(), parse("ls /b").unwrap()];
        let raw = vocabulary(&corpus, false).unwrap();
        assert_eq!(
            raw.into_iter().collect::<Vec<_>>(),
            vec!["/a", "/b", "ls"]
        );
        let templ = vocabulary(&corpus, true).unwrap();
        assert_eq!(templ.into_iter().collect::<Vec<_>>(), vec!["_PATH", "ls"]);
        assert_eq!(vocabulary(&[], false), Err(EmptyCorpus));
    }
}
