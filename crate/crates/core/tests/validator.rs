use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use bashgen_core::validator::{run_batch, Backend, ExitStatus, SandboxConfig, Verdict};

fn exec_config(scratch: &Path) -> SandboxConfig {
    SandboxConfig {
        scratch_root: Some(scratch.to_path_buf()),
        allow_exec: true,
        ..SandboxConfig::default()
    }
}

fn cmds(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let key = path.strip_prefix(root).unwrap().display().to_string();
            if path.is_dir() {
                out.insert(key + "/", Vec::new());
                stack.push(path);
            } else {
                out.insert(key, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn exit_codes_and_timeout() {
    let scratch = tempfile::tempdir().unwrap();
    let config = exec_config(scratch.path());
    let results = run_batch(&cmds(&["cat temp.txt", "cat missing.txt", "sleep 5"]), &config).unwrap();

    assert_eq!(results[0].exit_status, ExitStatus::Code(0));
    assert_eq!(results[0].verdict, Verdict::Valid);
    assert!(matches!(results[1].exit_status, ExitStatus::Code(c) if c != 0));
    assert_eq!(results[1].verdict, Verdict::Invalid);
    assert_eq!(results[2].exit_status, ExitStatus::Timeout);
    assert!(results[2].wall_time >= 0.5);
    assert!(results[2].wall_time < 2.0);
}

#[test]
fn timeout_kills_whole_process_group() {
    let scratch = tempfile::tempdir().unwrap();
    let config = SandboxConfig {
        timeout: Duration::from_millis(200),
        ..exec_config(scratch.path())
    };
    let results = run_batch(&cmds(&["find . -exec sleep 5 \\;"]), &config).unwrap();
    assert_eq!(results[0].exit_status, ExitStatus::Timeout);
    assert!(results[0].wall_time < 1.5);
}

#[test]
fn results_keep_input_order_with_workers() {
    let scratch = tempfile::tempdir().unwrap();
    let config = SandboxConfig {
        jobs: 4,
        ..exec_config(scratch.path())
    };
    let input: Vec<String> = (0..12)
        .map(|i| if i % 3 == 0 { "cat nope.txt".to_string() } else { format!("echo {i}") })
        .collect();
    let results = run_batch(&input, &config).unwrap();
    for (cmd, r) in input.iter().zip(&results) {
        assert_eq!(&r.command, cmd);
        assert_eq!(r.verdict == Verdict::Valid, cmd.starts_with("echo"));
    }
}

#[test]
fn workspaces_are_fresh_and_isolated() {
    let scratch = tempfile::tempdir().unwrap();
    let sentinel = tempfile::tempdir().unwrap();
    fs::write(sentinel.path().join("keep.txt"), "sentinel").unwrap();
    fs::create_dir(sentinel.path().join("sub")).unwrap();
    let before = snapshot(sentinel.path());

    let config = exec_config(scratch.path());
    let results = run_batch(
        &cmds(&[
            "rm temp.txt",
            "cat temp.txt",
            "touch new.txt",
            "cat new.txt",
            "mkdir abc/zzz",
            "rm -r abc",
            "ls abc/def",
        ]),
        &config,
    )
    .unwrap();
    // Each command sees the pristine manifest, never a sibling's changes.
    assert!(results.iter().map(|r| r.command.as_str()).eq([
        "rm temp.txt",
        "cat temp.txt",
        "touch new.txt",
        "cat new.txt",
        "mkdir abc/zzz",
        "rm -r abc",
        "ls abc/def"
    ]));
    let valid: Vec<bool> = results.iter().map(|r| r.verdict == Verdict::Valid).collect();
    assert_eq!(valid, [true, true, true, false, true, true, true]);

    assert_eq!(snapshot(sentinel.path()), before);
    assert!(fs::read_dir(scratch.path()).unwrap().next().is_none(), "workspaces cleaned up");
}

#[test]
fn exec_gate_and_safety_refusals() {
    let scratch = tempfile::tempdir().unwrap();
    let gated = SandboxConfig {
        scratch_root: Some(scratch.path().to_path_buf()),
        ..SandboxConfig::default()
    };
    let results = run_batch(&cmds(&["ls"]), &gated).unwrap();
    assert_eq!(results[0].exit_status, ExitStatus::Refused);

    let config = exec_config(scratch.path());
    let results = run_batch(&cmds(&["rm -rf /", "curl http://example.com", "touch /tmp/x"]), &config).unwrap();
    assert!(results.iter().all(|r| r.exit_status == ExitStatus::Refused && r.reason.is_some()));
}

#[test]
fn dry_run_only_parses() {
    let config = SandboxConfig {
        backend: Backend::DryRun,
        ..SandboxConfig::default()
    };
    let results = run_batch(&cmds(&["sleep 100", "ls &&"]), &config).unwrap();
    assert_eq!(results[0].verdict, Verdict::Valid);
    assert_eq!(results[0].wall_time, 0.0);
    assert_eq!(results[1].verdict, Verdict::Invalid);
}

#[test]
fn unwritable_scratch_root_is_a_setup_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let config = exec_config(&file.path().join("under-a-file"));
    assert!(run_batch(&cmds(&["ls"]), &config).is_err());
}
