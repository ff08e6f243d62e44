//! English-side preprocessing: stop-word removal, lowercasing and a small
//! rule-based lemmatizer, plus parameter extraction for post-processing.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::bash_ast::{categorize, ParamContext, PlaceholderKind, TypedValue};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.txt");

static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]*)"|'([^']*)'"#).unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]+(\.[0-9]+)?$").unwrap());
static FILENAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z0-9_\-*]*[A-Za-z0-9_\-*]\.[A-Za-z][A-Za-z0-9]{0,5}$").unwrap());

const EDGE_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\'', '`', '[', ']', '{', '}'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlRecord {
    pub raw: String,
    pub tokens: Vec<String>,
    pub extracted: Vec<(PlaceholderKind, String)>,
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    stop: HashSet<String>,
    exceptions: HashMap<String, String>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::from_lists(STOPWORDS, LEMMA_EXCEPTIONS)
    }
}

fn entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl Preprocessor {
    /// Build from stop-list and exception-list text, one entry per line.
    pub fn from_lists(stopwords: &str, exceptions: &str) -> Self {
        let stop = entries(stopwords).map(str::to_lowercase).collect();
        let exceptions = entries(exceptions)
            .map(|l| {
                let mut parts = l.split_whitespace();
                let word = parts.next().unwrap_or_default().to_lowercase();
                let lemma = parts.next().map_or_else(|| word.clone(), str::to_lowercase);
                (word, lemma)
            })
            .collect();
        Self { stop, exceptions }
    }

    pub fn from_files(stopwords: &Path, exceptions: &Path) -> io::Result<Self> {
        Ok(Self::from_lists(&fs::read_to_string(stopwords)?, &fs::read_to_string(exceptions)?))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stop.contains(word)
    }

    /// Lemmatize until the word stops changing.
    pub fn lemma(&self, word: &str) -> String {
        let mut current = word.to_string();
        loop {
            let next = self.lemma_step(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }

    fn lemma_step(&self, w: &str) -> String {
        if let Some(l) = self.exceptions.get(w) {
            return l.clone();
        }
        if !w.chars().all(|c| c.is_ascii_lowercase()) || w.len() < 4 {
            return w.to_string();
        }
        if let Some(stem) = w.strip_suffix("ies") {
            return format!("{stem}y");
        }
        if let Some(stem) = w.strip_suffix("es") {
            if ["ss", "sh", "ch", "x", "zz"].iter().any(|s| stem.ends_with(s)) {
                return stem.to_string();
            }
        }
        if w.ends_with('s') && !["ss", "us", "is"].iter().any(|s| w.ends_with(s)) {
            return w[..w.len() - 1].to_string();
        }
        if let Some(stem) = w.strip_suffix("ied") {
            return format!("{stem}y");
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = w.strip_suffix(suffix) {
                if stem.len() >= 3 && stem.chars().any(|c| "aeiouy".contains(c)) {
                    return undouble(stem);
                }
            }
        }
        w.to_string()
    }

    pub fn preprocess(&self, sentence: &str) -> Vec<String> {
        sentence
            .split_whitespace()
            .map(|t| t.trim_matches(EDGE_PUNCT).to_lowercase())
            .filter(|t| !t.is_empty() && !self.is_stopword(t))
            .map(|t| self.lemma(&t))
            .filter(|t| !t.is_empty() && !self.is_stopword(t))
            .collect()
    }

    pub fn record(&self, sentence: &str) -> NlRecord {
        NlRecord {
            raw: sentence.to_string(),
            tokens: self.preprocess(sentence),
            extracted: extract_params(sentence),
        }
    }
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !b"lsz".contains(&b[n - 1]) && !b"aeiou".contains(&b[n - 1]) {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

static DEFAULT: LazyLock<Preprocessor> = LazyLock::new(Preprocessor::default);

/// Preprocess with the shipped stop list and lemma exceptions.
pub fn preprocess(sentence: &str) -> Vec<String> {
    DEFAULT.preprocess(sentence)
}

/// Typed parameter values mentioned in a sentence, in order of appearance:
/// quoted strings first claim their span, then numbers, path-like and
/// filename-like words.
pub fn extract_params(sentence: &str) -> Vec<(PlaceholderKind, String)> {
    let ctx = ParamContext::default();
    let mut found: Vec<(usize, PlaceholderKind, String)> = Vec::new();
    let mut covered = Vec::new();
    for cap in QUOTED.captures_iter(sentence) {
        let whole = cap.get(0).unwrap();
        let inner = cap.get(1).or_else(|| cap.get(2)).unwrap().as_str();
        covered.push(whole.range());
        if !inner.is_empty() {
            found.push((whole.start(), categorize(inner, &ctx), inner.to_string()));
        }
    }
    let mut offset = 0;
    for word in sentence.split_whitespace() {
        let start = offset + sentence[offset..].find(word).unwrap();
        offset = start + word.len();
        if covered.iter().any(|r| r.contains(&start) || r.contains(&(offset - 1))) {
            continue;
        }
        let token = word.trim_end_matches(['.', ',', ';', ':', '!', '?', ')']).trim_start_matches('(');
        if token.is_empty() {
            continue;
        }
        let kind = if NUMBER.is_match(token) {
            Some(PlaceholderKind::Number)
        } else if token.contains('/') || token.starts_with('~') || FILENAME.is_match(token) {
            Some(categorize(token, &ctx))
        } else {
            None
        };
        if let Some(kind) = kind {
            found.push((start, kind, token.to_string()));
        }
    }
    found.sort_by_key(|(pos, ..)| *pos);
    found.into_iter().map(|(_, k, l)| (k, l)).collect()
}

/// [`extract_params`] in the form `fill` consumes.
pub fn extract_values(sentence: &str) -> Vec<TypedValue> {
    extract_params(sentence)
        .into_iter()
        .map(|(kind, literal)| TypedValue { kind, literal })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use PlaceholderKind as K;

    #[test]
    fn preprocess_examples() {
        assert_eq!(preprocess("find the word foo in file bar"), ["find", "word", "foo", "file", "bar"]);
        assert_eq!(preprocess("Files"), ["file"]);
        assert!(preprocess("").is_empty());
    }

    #[test]
    fn lemma_rules() {
        let p = Preprocessor::default();
        for (w, l) in [
            ("directories", "directory"),
            ("matches", "match"),
            ("processes", "process"),
            ("changes", "change"),
            ("running", "run"),
            ("listing", "list"),
            ("compressed", "compress"),
            ("modified", "modify"),
            ("deleted", "delete"),
            ("status", "status"),
            ("string", "string"),
            ("less", "less"),
        ] {
            assert_eq!(p.lemma(w), l, "{w}");
        }
    }

    #[test]
    fn custom_lists() {
        let p = Preprocessor::from_lists("find\n", "files files\n");
        assert_eq!(p.preprocess("Find the files"), ["the", "files"]);
    }

    #[test]
    fn extract_examples() {
        assert_eq!(
            extract_params(r#"search in "bar" for "foo""#),
            [(K::Regex, "bar".to_string()), (K::Regex, "foo".to_string())]
        );
        assert_eq!(extract_params("compress /home/user into a bz2 file"), [(K::Path, "/home/user".to_string())]);
        assert!(extract_params("remove all files in the current directory with a specific inode number").is_empty());
    }

    #[test]
    fn extract_numbers_and_files_in_order() {
        assert_eq!(
            extract_params("show the first 10 lines of notes.txt."),
            [(K::Number, "10".to_string()), (K::File, "notes.txt".to_string())]
        );
        assert_eq!(extract_params("list '*.log' files"), [(K::Regex, "*.log".to_string())]);
    }
}
