//! Subsample a command pool so its head-utility distribution matches a
//! target profile.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bash_ast::{parse, BashAst};
use crate::generator::{derive_seed, GeneratedCommand};

pub const DEFAULT_EPSILON: f64 = 0.02;
const BUILTIN_PROFILE: &str = include_str!("../data/profiles/nl2bash.toml");

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("fraction for {key} is {value}, outside [0, 1]")]
    OutOfRange { key: String, value: f64 },
    #[error("proportions sum to {0}, more than 1")]
    OverFull(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("pool is empty")]
    EmptyPool,
    #[error("no non-empty subset meets every target within {epsilon}")]
    InfeasibleProfile { epsilon: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionProfile {
    /// Target fraction per head utility; unlisted utilities are unconstrained.
    #[serde(default)]
    pub proportions: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipe_fraction: Option<f64>,
}

impl DistributionProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let entries = self
            .proportions
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(self.pipe_fraction.map(|p| ("pipe_fraction", p)));
        for (key, value) in entries {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::OutOfRange {
                    key: key.to_string(),
                    value,
                });
            }
        }
        let total: f64 = self.proportions.values().sum();
        if total > 1.0 + 1e-9 {
            return Err(ProfileError::OverFull(total));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ProfileError> {
        let profile: Self = toml::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    /// Proportions of the original NL2Bash corpus.
    pub fn nl2bash() -> Self {
        Self::from_toml(BUILTIN_PROFILE).expect("builtin profile is valid")
    }
}

/// Realized head-utility proportions and pipe fraction of parsed commands.
pub fn profile_of<'a>(commands: impl IntoIterator<Item = &'a BashAst>) -> DistributionProfile {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let (mut total, mut piped) = (0usize, 0usize);
    for ast in commands {
        *counts.entry(ast.head_utility().to_string()).or_default() += 1;
        total += 1;
        piped += usize::from(ast.pipe_count() > 0);
    }
    if total == 0 {
        return DistributionProfile::default();
    }
    DistributionProfile {
        proportions: counts.into_iter().map(|(u, n)| (u, n as f64 / total as f64)).collect(),
        pipe_fraction: Some(piped as f64 / total as f64),
    }
}

/// Per-utility quota for a target total, or `None` if the pool cannot fill it.
fn quotas(
    total: usize,
    targets: &BTreeMap<&str, f64>,
    available: &BTreeMap<&str, usize>,
    free: usize,
    epsilon: f64,
) -> Option<(BTreeMap<String, usize>, usize)> {
    let mut take = BTreeMap::new();
    let mut used = 0usize;
    for (&u, &t) in targets {
        let n = (total as f64 * t).round() as usize;
        if n > available.get(u).copied().unwrap_or(0) {
            return None;
        }
        if (n as f64 / total as f64 - t).abs() > epsilon + 1e-12 {
            return None;
        }
        used += n;
        take.insert(u.to_string(), n);
    }
    let rest = total.checked_sub(used)?;
    (rest <= free).then_some((take, rest))
}

/// Pick the largest subset of `pool` whose head-utility fractions are within
/// `epsilon` of the profile. `head` returns `None` for items that do not parse;
/// they are dropped before anything else. The output keeps pool order.
pub fn scale_by<T>(
    pool: Vec<T>,
    head: impl Fn(&T) -> Option<String>,
    profile: &DistributionProfile,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<T>, ScaleError> {
    if pool.is_empty() {
        return Err(ScaleError::EmptyPool);
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut unconstrained = Vec::new();
    for (i, item) in pool.iter().enumerate() {
        let Some(h) = head(item) else { continue };
        if profile.proportions.contains_key(&h) {
            groups.entry(h).or_default().push(i);
        } else {
            unconstrained.push(i);
        }
    }
    let targets: BTreeMap<&str, f64> = profile.proportions.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let available: BTreeMap<&str, usize> = groups.iter().map(|(k, v)| (k.as_str(), v.len())).collect();
    let usable = unconstrained.len() + groups.values().map(Vec::len).sum::<usize>();

    let (take, rest) = (1..=usable)
        .rev()
        .find_map(|t| quotas(t, &targets, &available, unconstrained.len(), epsilon))
        .ok_or(ScaleError::InfeasibleProfile { epsilon })?;

    let mut keep = Vec::new();
    for (u, mut idx) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &u));
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..take[&u]]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ""));
    unconstrained.shuffle(&mut rng);
    keep.extend_from_slice(&unconstrained[..rest]);
    keep.sort_unstable();

    let mut keep = keep.into_iter().peekable();
    Ok(pool
        .into_iter()
        .enumerate()
        .filter_map(|(i, item)| (keep.peek() == Some(&i)).then(|| {
            keep.next();
            item
        }))
        .collect())
}

pub fn scale(
    pool: Vec<GeneratedCommand>,
    profile: &DistributionProfile,
    seed: u64,
) -> Result<Vec<GeneratedCommand>, ScaleError> {
    scale_by(
        pool,
        |c| parse(c.rendered()).ok().map(|_| c.template.head_utility().to_string()),
        profile,
        DEFAULT_EPSILON,
        seed,
    )
}

/// Scale plain command strings; unparseable ones are discarded.
pub fn scale_commands(
    pool: Vec<String>,
    profile: &DistributionProfile,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<String>, ScaleError> {
    scale_by(
        pool,
        |c| parse(c).ok().map(|a| a.head_utility().to_string()),
        profile,
        epsilon,
        seed,
    )
}
