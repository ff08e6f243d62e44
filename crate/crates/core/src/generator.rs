//! Template synthesis from [`UtilitySpec`]s: every flag subset of size 0–3
//! per utility, and single-pipe joins of two independently generated sets.

use std::collections::HashSet;
use std::hash::Hash;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bash_ast::{parse_with, Arg, BashAst, FlagArg, FlagLookup, FlagNode, ParamNode, ParseError, UtilityNode};
use crate::syntax_kb::{GenArgKind, Slot, UtilitySpec};

pub const MAX_FLAGS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("utility {utility} has no syntax template")]
    NoTemplate { utility: String },
    #[error("{tail} is not an allowed pipe successor of {head}")]
    Pipe { head: String, tail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub utilities: Vec<String>,
    /// Flag subset chosen for each utility, in stage order.
    pub flags: Vec<Vec<String>>,
    pub pipe_partner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCommand {
    pub id: String,
    pub template: BashAst,
    pub provenance: Provenance,
}

impl GeneratedCommand {
    fn new(template: BashAst, provenance: Provenance) -> Self {
        let id = template_id(&template.raw);
        Self {
            id,
            template,
            provenance,
        }
    }

    pub fn rendered(&self) -> &str {
        &self.template.raw
    }

    pub fn to_record(&self) -> TemplateRecord {
        TemplateRecord {
            id: self.id.clone(),
            template: self.template.raw.clone(),
            utilities: self.provenance.utilities.clone(),
            flags: self.provenance.flags.clone(),
            pipe_partner: self.provenance.pipe_partner.clone(),
        }
    }

    pub fn from_record(record: TemplateRecord, lookup: &dyn FlagLookup) -> Result<Self, ParseError> {
        let template = parse_with(&record.template, lookup)?;
        Ok(Self {
            id: record.id,
            template,
            provenance: Provenance {
                utilities: record.utilities,
                flags: record.flags,
                pipe_partner: record.pipe_partner,
            },
        })
    }
}

/// Line-delimited form of a [`GeneratedCommand`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: String,
    pub template: String,
    pub utilities: Vec<String>,
    pub flags: Vec<Vec<String>>,
    #[serde(default)]
    pub pipe_partner: Option<String>,
}

/// Stable id: first 16 bytes of the SHA-256 of the rendered template.
pub fn template_id(rendered: &str) -> String {
    let digest = Sha256::digest(rendered.as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-utility seed so head and tail sets are drawn independently.
pub(crate) fn derive_seed(seed: u64, utility: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{utility}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// All flag-index subsets of size 0..=3, by size then lexicographically.
fn flag_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for size in 1..=MAX_FLAGS.min(n) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            // advance to the next combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

fn placeholder(kind: GenArgKind) -> ParamNode {
    ParamNode::new(kind.placeholder(), kind.to_parser_kind())
}

fn build_node(spec: &UtilitySpec, flags: &[&crate::syntax_kb::FlagSpec]) -> UtilityNode {
    let mut node = UtilityNode::new(spec.name.clone());
    let flag_args = || {
        flags.iter().map(|f| {
            Arg::Flag(FlagNode {
                token: f.token.clone(),
                arg: f.arg.map(|kind| FlagArg::Value(placeholder(kind))),
            })
        })
    };
    let has_flag_slot = spec.template.contains(&Slot::Flags);
    for slot in &spec.template {
        match slot {
            Slot::Utility => {
                if !has_flag_slot {
                    node.args.extend(flag_args());
                }
            }
            Slot::Flags => node.args.extend(flag_args()),
            Slot::Arg(kind) => node.args.push(Arg::Param(placeholder(*kind))),
        }
    }
    node
}

/// Templates for one utility with 0–3 flags each. With `limit` below the
/// total, a seeded uniform sample without replacement is kept, still in
/// enumeration order.
pub fn generate_unpiped(
    spec: &UtilitySpec,
    limit: Option<usize>,
    seed: u64,
) -> Result<Vec<GeneratedCommand>, GenerateError> {
    if spec.template.is_empty() {
        return Err(GenerateError::NoTemplate {
            utility: spec.name.clone(),
        });
    }
    let mut sorted: Vec<&crate::syntax_kb::FlagSpec> = spec.flags.iter().collect();
    sorted.sort_by(|a, b| a.token.cmp(&b.token));

    let subsets = flag_subsets(sorted.len());
    let chosen: Vec<usize> = match limit {
        Some(limit) if limit < subsets.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &spec.name));
            let mut picked = index::sample(&mut rng, subsets.len(), limit).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..subsets.len()).collect(),
    };

    Ok(chosen
        .into_iter()
        .map(|i| {
            let flags: Vec<_> = subsets[i].iter().map(|&j| sorted[j]).collect();
            let node = build_node(spec, &flags);
            let raw = node.render();
            GeneratedCommand::new(
                BashAst {
                    stages: vec![node],
                    raw,
                },
                Provenance {
                    utilities: vec![spec.name.clone()],
                    flags: vec![flags.iter().map(|f| f.token.clone()).collect()],
                    pipe_partner: None,
                },
            )
        })
        .collect())
}

/// Cross product of head and tail templates joined by one pipe.
pub fn generate_piped(
    head: &UtilitySpec,
    tail: &UtilitySpec,
    head_limit: Option<usize>,
    tail_limit: Option<usize>,
    seed: u64,
) -> Result<Vec<GeneratedCommand>, GenerateError> {
    if !head.pipe_successors.iter().any(|s| s == &tail.name) {
        return Err(GenerateError::Pipe {
            head: head.name.clone(),
            tail: tail.name.clone(),
        });
    }
    let heads = generate_unpiped(head, head_limit, seed)?;
    let tails = generate_unpiped(tail, tail_limit, seed)?;
    let mut out = Vec::with_capacity(heads.len() * tails.len());
    for h in &heads {
        for t in &tails {
            let stages = vec![h.template.stages[0].clone(), t.template.stages[0].clone()];
            let raw = format!("{} | {}", h.rendered(), t.rendered());
            out.push(GeneratedCommand::new(
                BashAst { stages, raw },
                Provenance {
                    utilities: vec![head.name.clone(), tail.name.clone()],
                    flags: vec![h.provenance.flags[0].clone(), t.provenance.flags[0].clone()],
                    pipe_partner: Some(tail.name.clone()),
                },
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deduped<T> {
    pub items: Vec<T>,
    pub removed: usize,
}

impl<T> Deduped<T> {
    /// Fraction of the input that was dropped as duplicates.
    pub fn duplicate_rate(&self) -> f64 {
        let total = self.items.len() + self.removed;
        if total == 0 {
            0.0
        } else {
            self.removed as f64 / total as f64
        }
    }
}

/// Order-preserving removal of items whose key was already seen.
pub fn dedup_by_key<T, K: Eq + Hash>(items: Vec<T>, key: impl Fn(&T) -> K) -> Deduped<T> {
    let mut seen = HashSet::new();
    let mut removed = 0;
    let mut kept = Vec::with_capacity(items.len());
    for item in items {
        if seen.insert(key(&item)) {
            kept.push(item);
        } else {
            removed += 1;
        }
    }
    Deduped {
        items: kept,
        removed,
    }
}

/// Drop commands whose rendered template repeats an earlier one.
pub fn dedup(commands: Vec<GeneratedCommand>) -> Deduped<GeneratedCommand> {
    dedup_by_key(commands, |c| c.template.raw.clone())
}

/// Limits for a whole-knowledge-base run.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusLimits {
    pub per_utility: Option<usize>,
    pub pipe_head: Option<usize>,
    pub pipe_tail: Option<usize>,
    pub piped: bool,
}

/// Unpiped templates for every spec, then piped ones for every declared
/// successor pair, in spec order. Utilities without a template are skipped.
pub fn generate_corpus(
    specs: &[UtilitySpec],
    limits: CorpusLimits,
    seed: u64,
) -> Result<Vec<GeneratedCommand>, GenerateError> {
    let mut out = Vec::new();
    for spec in specs.iter().filter(|s| !s.template.is_empty()) {
        out.extend(generate_unpiped(spec, limits.per_utility, seed)?);
    }
    if limits.piped {
        for head in specs.iter().filter(|s| !s.template.is_empty()) {
            for succ in &head.pipe_successors {
                let Some(tail) = specs.iter().find(|s| &s.name == succ && !s.template.is_empty()) else {
                    continue;
                };
                out.extend(generate_piped(head, tail, limits.pipe_head, limits.pipe_tail, seed)?);
            }
        }
    }
    Ok(dedup(out).items)
}
