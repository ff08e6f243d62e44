//! Chat-completion client for LLM-driven command generation and
//! back-translation to English, with retries, rate limiting, an audit log
//! and offline replay.

mod transport;

use std::fs::OpenOptions;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bash_ast::parse;
use crate::dataset_io::{DatasetRecord, Source};
use crate::generator::dedup_by_key;

pub use transport::{ChatRequest, HttpTransport, Message, ReplayTransport, Transport, TransportError};

pub const GEN_PROMPT: &str = "Generate bash command and do not include example";
pub const TRANSLATE_PROMPT: &str = "Translate to English";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub gen_temperature: f64,
    pub translate_temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Unlimited when unset.
    pub requests_per_minute: Option<f64>,
    pub concurrency: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            token_env: "BASHGEN_API_KEY".into(),
            gen_temperature: 1.0,
            translate_temperature: 0.0,
            timeout_secs: 30.0,
            max_retries: 3,
            backoff_ms: 500,
            requests_per_minute: None,
            concurrency: 4,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        for t in [self.gen_temperature, self.translate_temperature] {
            if !(0.0..=2.0).contains(&t) {
                return Err(LlmError::Config(format!("temperature {t} outside [0, 2]")));
            }
        }
        if self.timeout_secs <= 0.0 {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(LlmError::Config("concurrency must be at least 1".into()));
        }
        if matches!(self.requests_per_minute, Some(r) if r <= 0.0) {
            return Err(LlmError::Config("requests_per_minute must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport failed: {0}")]
    Transport(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One logical call, after retries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub key: String,
    pub prompt: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: f64,
    pub attempts: u32,
}

/// Requests-per-minute limiter with a burst of one minute's allowance.
#[derive(Debug)]
pub struct TokenBucket {
    state: Mutex<(f64, Instant)>,
    rate: f64,
    burst: f64,
}

impl TokenBucket {
    pub fn new(per_second: f64, burst: f64) -> Self {
        Self {
            state: Mutex::new((burst, Instant::now())),
            rate: per_second,
            burst: burst.max(1.0),
        }
    }

    pub fn per_minute(rpm: f64) -> Self {
        Self::new(rpm / 60.0, rpm)
    }

    /// Block until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut guard = self.state.lock().unwrap();
                let (tokens, last) = &mut *guard;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.rate).min(self.burst);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                (1.0 - *tokens) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

struct Audit {
    entries: Vec<LlmExchange>,
    sink: Option<Box<dyn Write + Send>>,
}

pub struct LlmClient {
    config: LlmConfig,
    transport: Box<dyn Transport>,
    bucket: Option<TokenBucket>,
    audit: Mutex<Audit>,
}

/// Strip markdown fences and prompt markers; keep the first command line.
pub fn normalize_command(response: &str) -> Option<String> {
    response
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .map(|l| l.strip_prefix("$ ").unwrap_or(l).trim().trim_matches('`').trim())
        .find(|l| !l.is_empty())
        .map(str::to_string)
}

/// First non-empty line, without wrapping quotes.
pub fn normalize_sentence(response: &str) -> Option<String> {
    response
        .lines()
        .map(|l| l.trim().trim_matches('"').trim())
        .find(|l| !l.is_empty())
        .map(str::to_string)
}

impl LlmClient {
    pub fn new(config: LlmConfig, transport: Box<dyn Transport>) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(Self {
            bucket: config.requests_per_minute.map(TokenBucket::per_minute),
            config,
            transport,
            audit: Mutex::new(Audit {
                entries: Vec::new(),
                sink: None,
            }),
        })
    }

    /// Also append every exchange to `path` as it happens.
    pub fn with_audit_file(self, path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.audit.lock().unwrap().sink = Some(Box::new(BufWriter::new(file)));
        Ok(self)
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn exchanges(&self) -> Vec<LlmExchange> {
        self.audit.lock().unwrap().entries.clone()
    }

    fn log(&self, exchange: LlmExchange) -> io::Result<()> {
        let mut audit = self.audit.lock().unwrap();
        if let Some(sink) = &mut audit.sink {
            serde_json::to_writer(&mut *sink, &exchange)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        audit.entries.push(exchange);
        Ok(())
    }

    fn call(&self, key: &str, prompt: &str, temperature: f64) -> Result<String, LlmError> {
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages: vec![Message {
                role: "user".into(),
                content: prompt.into(),
            }],
            temperature,
        };
        let start = Instant::now();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            if let Some(bucket) = &self.bucket {
                bucket.acquire();
            }
            match self.transport.send(key, &request) {
                Err(TransportError::Transient(msg)) if attempts <= self.config.max_retries => {
                    tracing::warn!(key, attempts, "retrying after: {msg}");
                    let backoff = self.config.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    thread::sleep(Duration::from_millis(backoff));
                }
                other => break other,
            }
        };
        self.log(LlmExchange {
            key: key.to_string(),
            prompt: prompt.to_string(),
            temperature,
            response: outcome.as_ref().ok().cloned(),
            error: outcome.as_ref().err().map(|e| e.to_string()),
            latency_ms: start.elapsed().as_secs_f64() * 1000.0,
            attempts,
        })?;
        outcome.map_err(|e| match e {
            TransportError::Auth(m) => LlmError::Auth(m),
            other => LlmError::Transport(other.to_string()),
        })
    }

    /// Run `f` over `0..n` with bounded concurrency; results by index.
    fn par_map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..self.config.concurrency.min(n) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = f(i);
                    slots.lock().unwrap()[i] = Some(r);
                });
            }
        });
        slots.into_inner().unwrap().into_iter().map(Option::unwrap).collect()
    }

    /// Ask for `n` commands, one per response, in request order. Failed
    /// requests are skipped (they stay in the audit log); an auth failure
    /// aborts, and so does every request failing.
    pub fn gen_commands(&self, n: usize) -> Result<Vec<String>, LlmError> {
        let results = self.par_map(n, |i| self.call(&format!("gen:{i}"), GEN_PROMPT, self.config.gen_temperature));
        let mut out = Vec::new();
        let mut last_err = None;
        for r in results {
            match r {
                Ok(text) => out.extend(normalize_command(&text)),
                Err(LlmError::Auth(m)) => return Err(LlmError::Auth(m)),
                Err(e) => last_err = Some(e),
            }
        }
        match last_err {
            Some(e) if out.is_empty() => Err(e),
            _ => Ok(out),
        }
    }

    pub fn backtranslate(&self, cmd: &str) -> Result<String, LlmError> {
        let cmd = cmd.trim();
        if cmd.is_empty() {
            return Err(LlmError::Precondition("command is empty".into()));
        }
        let text = self.call(
            &format!("translate:{cmd}"),
            &format!("{TRANSLATE_PROMPT}: {cmd}"),
            self.config.translate_temperature,
        )?;
        normalize_sentence(&text).ok_or_else(|| LlmError::Transport("empty translation".into()))
    }

    /// Back-translate many commands concurrently; results by input index.
    pub fn backtranslate_all(&self, cmds: &[String]) -> Vec<Result<String, LlmError>> {
        self.par_map(cmds.len(), |i| self.backtranslate(&cmds[i]))
    }

    /// Generate, dedup, keep what parses, back-translate. Records are
    /// appended to `out` in generation order as each batch completes.
    pub fn pipeline(&self, n: usize, out: Option<&Path>) -> Result<Vec<DatasetRecord>, LlmError> {
        let mut sink = match out {
            Some(path) => Some(BufWriter::new(std::fs::File::create(path)?)),
            None => None,
        };
        let commands = self.gen_commands(n)?;
        let unique = dedup_by_key(commands, |c| c.clone()).items;
        let parsed: Vec<String> = unique.into_iter().filter(|c| parse(c).is_ok()).collect();

        let mut records = Vec::new();
        for batch in parsed.chunks(self.config.concurrency) {
            let translated = self.backtranslate_all(batch);
            for (cmd, nl) in batch.iter().zip(translated) {
                let nl = match nl {
                    Ok(nl) => nl,
                    Err(LlmError::Auth(m)) => return Err(LlmError::Auth(m)),
                    Err(e) => {
                        tracing::warn!(cmd, "dropping command: {e}");
                        continue;
                    }
                };
                let record = DatasetRecord {
                    nl,
                    cmd: cmd.clone(),
                    source: Source::Llm,
                    valid: None,
                };
                if let Some(w) = &mut sink {
                    serde_json::to_writer(&mut *w, &record).map_err(io::Error::from)?;
                    w.write_all(b"\n")?;
                    w.flush()?;
                }
                records.push(record);
            }
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_fenced_responses() {
        assert_eq!(normalize_command("```bash\nls -la\n```").as_deref(), Some("ls -la"));
        assert_eq!(normalize_command("$ du -sh .").as_deref(), Some("du -sh ."));
        assert_eq!(normalize_command("`pwd`").as_deref(), Some("pwd"));
        assert_eq!(normalize_command("```\n```"), None);
        assert_eq!(normalize_sentence("\n\"List files.\"\n").as_deref(), Some("List files."));
    }

    #[test]
    fn config_validation() {
        let bad = LlmConfig {
            gen_temperature: 2.5,
            ..LlmConfig::default()
        };
        assert!(matches!(bad.validate(), Err(LlmError::Config(_))));
        assert!(LlmConfig::default().validate().is_ok());
        let parsed: LlmConfig = toml::from_str("model = \"m\"\nmax_retries = 0").unwrap();
        assert_eq!(parsed.model, "m");
        assert_eq!(parsed.gen_temperature, 1.0);
    }

    #[test]
    fn token_bucket_throttles() {
        let bucket = TokenBucket::new(50.0, 1.0);
        let start = Instant::now();
        for _ in 0..6 {
            bucket.acquire();
        }
        // One immediate token, then five more at 20 ms intervals.
        assert!(start.elapsed() >= Duration::from_millis(90));
    }

    #[test]
    fn replay_answers_by_key() {
        let client = LlmClient::new(
            LlmConfig::default(),
            Box::new(ReplayTransport::new([(
                "translate:ls -la".to_string(),
                "list all files including hidden ones in long format".to_string(),
            )])),
        )
        .unwrap();
        assert_eq!(
            client.backtranslate("ls -la").unwrap(),
            "list all files including hidden ones in long format"
        );
        assert!(matches!(client.backtranslate("  "), Err(LlmError::Precondition(_))));
        assert!(matches!(client.backtranslate("pwd"), Err(LlmError::Transport(_))));
        assert_eq!(client.exchanges().len(), 2);
        assert!(client.pipeline(0, None).unwrap().is_empty());
    }
}
