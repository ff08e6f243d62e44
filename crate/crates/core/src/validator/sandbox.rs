use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::{Backend, ExitStatus, SandboxConfig, SandboxError, ValidationResult, Verdict};
use crate::bash_ast::parse;

const POLL: Duration = Duration::from_millis(2);

/// Validate a batch of concrete commands. Results are in input order.
///
/// Every subprocess gets its own freshly provisioned workspace, so commands
/// cannot observe each other's side effects.
pub fn run_batch(commands: &[String], config: &SandboxConfig) -> Result<Vec<ValidationResult>, SandboxError> {
    if config.backend == Backend::DryRun {
        return Ok(commands.iter().map(|c| dry_run(c)).collect());
    }
    let scratch = match &config.scratch_root {
        Some(root) => {
            std::fs::create_dir_all(root)?;
            root.clone()
        }
        None => std::env::temp_dir(),
    };
    // Fail fast if the workspace cannot be built at all.
    let probe = tempfile::Builder::new().prefix("bashgen-ws-").tempdir_in(&scratch)?;
    config.manifest.provision(probe.path())?;
    drop(probe);

    let jobs = config.jobs.max(1).min(commands.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ValidationResult>>> = Mutex::new(vec![None; commands.len()]);
    let failure: Mutex<Option<SandboxError>> = Mutex::new(None);

    thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= commands.len() || failure.lock().unwrap().is_some() {
                    break;
                }
                match run_one(&commands[i], config, &scratch) {
                    Ok(r) => slots.lock().unwrap()[i] = Some(r),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect())
}

fn dry_run(command: &str) -> ValidationResult {
    match parse(command) {
        Ok(_) => result(command, ExitStatus::Code(0), 0.0, None),
        Err(e) => result(command, ExitStatus::Refused, 0.0, Some(e.to_string())),
    }
}

fn result(command: &str, status: ExitStatus, wall: f64, reason: Option<String>) -> ValidationResult {
    ValidationResult {
        command: command.to_string(),
        exit_status: status,
        wall_time: wall,
        verdict: if status == ExitStatus::Code(0) {
            Verdict::Valid
        } else {
            Verdict::Invalid
        },
        reason,
    }
}

fn run_one(command: &str, config: &SandboxConfig, scratch: &PathBuf) -> Result<ValidationResult, SandboxError> {
    if !config.allow_exec {
        return Ok(result(command, ExitStatus::Refused, 0.0, Some("execution not enabled".into())));
    }
    if let Some(reason) = config.policy.check(command) {
        return Ok(result(command, ExitStatus::Refused, 0.0, Some(reason)));
    }
    let ws = tempfile::Builder::new().prefix("bashgen-ws-").tempdir_in(scratch)?;
    config.manifest.provision(ws.path())?;
    Ok(execute(command, ws.path(), config))
}

fn execute(command: &str, dir: &Path, config: &SandboxConfig) -> ValidationResult {
    let start = Instant::now();
    let spawned = Command::new("/bin/sh")
        .arg("-c")
        .arg(command)
        .current_dir(dir)
        .env_clear()
        .envs(config.env.iter().map(|(k, v)| (k, v)))
        .env("HOME", dir)
        .env("TMPDIR", dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .process_group(0)
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => return result(command, ExitStatus::SpawnFail, 0.0, Some(e.to_string())),
    };
    let pgid = child.id() as libc::pid_t;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let code = status.code().unwrap_or_else(|| 128 + status.signal().unwrap_or(0));
                // Reap anything the shell left running in the background.
                unsafe { libc::killpg(pgid, libc::SIGKILL) };
                return result(command, ExitStatus::Code(code), start.elapsed().as_secs_f64(), None);
            }
            Ok(None) if start.elapsed() >= config.timeout => {
                unsafe { libc::killpg(pgid, libc::SIGKILL) };
                let _ = child.wait();
                return result(command, ExitStatus::Timeout, start.elapsed().as_secs_f64(), None);
            }
            Ok(None) => thread::sleep(POLL),
            Err(e) => {
                unsafe { libc::killpg(pgid, libc::SIGKILL) };
                let _ = child.wait();
                return result(command, ExitStatus::SpawnFail, start.elapsed().as_secs_f64(), Some(e.to_string()));
            }
        }
    }
}
