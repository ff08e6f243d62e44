//! Draft [`UtilitySpec`]s from plain-text manual pages.
//!
//! Recognizes GNU-style option lines (`-f, --file=ARCHIVE  text`) and
//! find-style ones (`-name pattern`). Argument kinds come from the argument
//! word, then from keywords in the description. Anything that falls back to
//! `String` marks the result for review.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{FlagSpec, GenArgKind, Slot, UtilitySpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImportError {
    #[error("no flag definitions found in manual page for {utility}")]
    NoFlags { utility: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedSpec {
    pub spec: UtilitySpec,
    pub needs_review: bool,
    pub notes: Vec<String>,
}

static SECTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i)\s{0,3}(OPTIONS|DESCRIPTION|SYNOPSIS|EXPRESSION|TESTS|ACTIONS)\s*$").unwrap());
static ANY_HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z][A-Z ]+$").unwrap());
static OPTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s{0,12}(--?[A-Za-z0-9?@][\w-]*)").unwrap());
static DESC_SPLIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s{2,}|\t").unwrap());

/// Keyword table for argument words and descriptions, checked in order.
const KEYWORDS: &[(&[&str], GenArgKind)] = &[
    (&["directory", "dir"], GenArgKind::Directory),
    (&["file", "archive", "filename"], GenArgKind::File),
    (&["path"], GenArgKind::Path),
    (&["pattern", "regex", "regexp", "glob", "expression"], GenArgKind::Pattern),
    (&["format", "fmt"], GenArgKind::FormattedString),
    (&["delim", "delimiter", "separator", "sep", "char"], GenArgKind::Separator),
    (&["mode", "perm", "permission", "permissions"], GenArgKind::Permission),
    (&["size", "bytes"], GenArgKind::Size),
    (&["time", "duration", "seconds", "minutes", "days"], GenArgKind::Timespan),
    (&["date", "datetime", "stamp"], GenArgKind::Datetime),
    (&["user", "owner", "uname"], GenArgKind::User),
    (&["group", "gname"], GenArgKind::Group),
    (&["ext", "extension", "suffix"], GenArgKind::Extension),
    (&["num", "number", "n", "count", "lines", "level", "levels", "depth"], GenArgKind::Quantity),
];

fn keyword_kind(word: &str) -> Option<GenArgKind> {
    let lower = word.to_ascii_lowercase();
    KEYWORDS
        .iter()
        .find(|(words, _)| words.contains(&lower.as_str()))
        .map(|(_, kind)| *kind)
}

fn description_kind(text: &str) -> Option<GenArgKind> {
    let words: Vec<String> = text
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect();
    KEYWORDS
        .iter()
        .find(|(keys, _)| keys.iter().any(|k| k.len() > 1 && words.iter().any(|w| w == k)))
        .map(|(_, kind)| *kind)
}

struct OptionLine {
    token: String,
    arg_word: Option<String>,
    optional_arg: bool,
    description: String,
}

/// Split `-f, --file=ARCHIVE   use archive file` into its forms and text.
fn parse_option_line(line: &str) -> Option<OptionLine> {
    OPTION_LINE.find(line)?;
    let trimmed = line.trim_start();
    let (head, description) = match DESC_SPLIT.find(trimmed) {
        Some(m) => (&trimmed[..m.start()], trimmed[m.end()..].trim().to_string()),
        None => (trimmed, String::new()),
    };

    let mut token = None::<String>;
    let mut arg_word = None;
    let mut optional_arg = false;
    for form in head.split(", ") {
        let form = form.trim();
        if !form.starts_with('-') {
            continue;
        }
        let (flag, rest) = match form.find(['=', ' ', '[']) {
            Some(i) => (&form[..i], &form[i..]),
            None => (form, ""),
        };
        if flag.len() < 2 {
            continue;
        }
        let rest = rest.trim_start_matches([' ', '=']);
        if rest.starts_with('[') {
            optional_arg = true;
        }
        let word: String = rest
            .trim_start_matches(['[', '=', '<'])
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
            .collect();
        // "-empty File is empty ..." is prose on the same line, not an argument
        let prose = rest.trim().contains(' ') && !word.chars().all(|c| c.is_ascii_uppercase() || c == '_');
        if !word.is_empty() && arg_word.is_none() && !prose {
            arg_word = Some(word);
        }
        // prefer the first short form, then the first long one
        let is_short = !flag.starts_with("--");
        match &token {
            None => token = Some(flag.to_string()),
            Some(t) if t.starts_with("--") && is_short => token = Some(flag.to_string()),
            _ => {}
        }
    }
    Some(OptionLine {
        token: token?,
        arg_word,
        optional_arg,
        description,
    })
}

/// Build a draft spec from a manual page.
pub fn import_manpage(text: &str, utility: &str) -> Result<ImportedSpec, ImportError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut notes = Vec::new();
    let mut needs_review = false;

    let has_section = lines.iter().any(|l| SECTION.is_match(l));
    if !has_section {
        notes.push("no OPTIONS/DESCRIPTION section header; scanned whole text".to_string());
        needs_review = true;
    }

    let mut section = String::new();
    let mut synopsis = Vec::new();
    let mut flags: Vec<FlagSpec> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(cap) = SECTION.captures(line) {
            section = cap[1].to_ascii_uppercase();
            i += 1;
            continue;
        }
        if ANY_HEADER.is_match(line.trim_end()) && !line.starts_with(' ') {
            section = line.trim().to_string();
            i += 1;
            continue;
        }
        if section == "SYNOPSIS" {
            synopsis.push(line.trim());
            i += 1;
            continue;
        }
        let in_scope = !has_section
            || matches!(section.as_str(), "OPTIONS" | "DESCRIPTION" | "EXPRESSION" | "TESTS" | "ACTIONS");
        if !in_scope {
            i += 1;
            continue;
        }
        let Some(mut opt) = parse_option_line(line) else {
            i += 1;
            continue;
        };
        // continuation lines are indented deeper than the option itself
        let indent = line.len() - line.trim_start().len();
        i += 1;
        while i < lines.len() {
            let next = lines[i];
            let next_indent = next.len() - next.trim_start().len();
            if next.trim().is_empty() || next_indent <= indent || OPTION_LINE.is_match(next) && next_indent <= indent + 1 {
                break;
            }
            if !opt.description.is_empty() {
                opt.description.push(' ');
            }
            opt.description.push_str(next.trim());
            i += 1;
        }

        if flags.iter().any(|f| f.token == opt.token) {
            continue;
        }
        let arg = if opt.optional_arg {
            notes.push(format!("{}: optional argument dropped", opt.token));
            None
        } else if let Some(word) = &opt.arg_word {
            let kind = keyword_kind(word).or_else(|| description_kind(&opt.description));
            Some(kind.unwrap_or_else(|| {
                needs_review = true;
                notes.push(format!("{}: could not classify argument {word:?}", opt.token));
                GenArgKind::String
            }))
        } else {
            None
        };
        flags.push(FlagSpec::new(opt.token, arg));
    }

    if flags.is_empty() {
        return Err(ImportError::NoFlags {
            utility: utility.to_string(),
        });
    }

    let mut template = vec![Slot::Utility, Slot::Flags];
    if let Some(line) = synopsis.iter().find(|l| l.starts_with(utility)) {
        for word in line[utility.len()..].split_whitespace() {
            let word = word.trim_matches(|c: char| "[]<>.".contains(c));
            if word.is_empty() || word.starts_with('-') || word.eq_ignore_ascii_case("option") || word.eq_ignore_ascii_case("options") {
                continue;
            }
            if word.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
                match keyword_kind(word) {
                    Some(kind) => template.push(Slot::Arg(kind)),
                    None => notes.push(format!("synopsis word {word:?} not mapped")),
                }
            }
        }
    } else {
        notes.push("no synopsis line; positional slots left empty".to_string());
    }

    Ok(ImportedSpec {
        spec: UtilitySpec {
            name: utility.to_string(),
            template,
            flags,
            pipe_successors: Vec::new(),
        },
        needs_review,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursive_flag_without_argument() {
        let text = "OPTIONS\n  -r, --recursive\n         copy directories recursively\n";
        let imported = import_manpage(text, "cp").unwrap();
        assert_eq!(imported.spec.flags, vec![FlagSpec::new("-r", None)]);
        assert!(!imported.needs_review);
    }

    #[test]
    fn file_keyword_sets_kind() {
        let text = "OPTIONS\n  -f FILE  use archive FILE\n";
        let imported = import_manpage(text, "tar").unwrap();
        assert_eq!(
            imported.spec.flags,
            vec![FlagSpec::new("-f", Some(GenArgKind::File))]
        );
    }

    #[test]
    fn no_dash_lines_is_an_error() {
        let text = "DESCRIPTION\n  This tool does things.\n";
        assert_eq!(
            import_manpage(text, "thing"),
            Err(ImportError::NoFlags {
                utility: "thing".into()
            })
        );
    }

    #[test]
    fn gnu_page_with_synopsis() {
        let text = "\
NAME
       du - estimate file space usage

SYNOPSIS
       du [OPTION]... [FILE]...

DESCRIPTION
       Summarize disk usage of the set of FILEs.

       -a, --all
              write counts for all files, not just directories

       -B, --block-size=SIZE
              scale sizes by SIZE before printing them

       -d, --max-depth=N
              print the total for a directory only if it is N or fewer levels

       --time-style=STYLE
              show times using STYLE, which can be: full-iso, long-iso, iso

       --color[=WHEN]
              colorize the output
";
        let imported = import_manpage(text, "du").unwrap();
        let flags = &imported.spec.flags;
        assert_eq!(flags[0], FlagSpec::new("-a", None));
        assert_eq!(flags[1], FlagSpec::new("-B", Some(GenArgKind::Size)));
        assert_eq!(flags[2], FlagSpec::new("-d", Some(GenArgKind::Quantity)));
        // STYLE has no keyword and the description names none either
        assert_eq!(flags[3], FlagSpec::new("--time-style", Some(GenArgKind::String)));
        assert_eq!(flags[4], FlagSpec::new("--color", None));
        assert!(imported.needs_review);
        assert_eq!(
            imported.spec.template,
            vec![Slot::Utility, Slot::Flags, Slot::Arg(GenArgKind::File)]
        );
    }

    #[test]
    fn find_style_lowercase_arguments() {
        let text = "\
TESTS
       -name pattern
              Base of file name matches shell pattern pattern.

       -empty File is empty and is either a regular file or a directory.

       -user uname
              File is owned by user uname.

       -wibble thing
              Does something odd.
";
        let imported = import_manpage(text, "find").unwrap();
        let flags = &imported.spec.flags;
        assert_eq!(flags[0], FlagSpec::new("-name", Some(GenArgKind::Pattern)));
        assert_eq!(flags[1], FlagSpec::new("-empty", None));
        assert_eq!(flags[2], FlagSpec::new("-user", Some(GenArgKind::User)));
        assert_eq!(flags[3], FlagSpec::new("-wibble", Some(GenArgKind::String)));
        assert!(imported.needs_review);
    }
}
