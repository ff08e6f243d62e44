use std::sync::LazyLock;

use regex::Regex;

use crate::bash_ast::{parse, Arg, BashAst, UtilityNode};

const NETWORK: &[&str] = &[
    "curl", "wget", "ssh", "scp", "sftp", "nc", "ncat", "netcat", "telnet", "ftp", "rsync", "ping",
    "nmap", "socat",
];

const FORBIDDEN: &[&str] = &[
    "sudo", "su", "doas", "mkfs", "fdisk", "parted", "shutdown", "reboot", "halt", "poweroff",
    "init", "telinit", "systemctl", "mount", "umount", "swapoff", "crontab",
];

const WRITERS: &[&str] = &[
    "rm", "rmdir", "mv", "cp", "touch", "mkdir", "chmod", "chown", "chgrp", "ln", "tar", "gzip",
    "gunzip", "split", "dd", "truncate", "shred", "rename", "sed", "tee", "install", "unlink",
];

static FORK_BOMB: LazyLock<Regex> = LazyLock::new(|| Regex::new(r":\s*\(\s*\)\s*\{").unwrap());

/// Deny-list applied before anything reaches a real shell.
#[derive(Debug, Clone)]
pub struct SafetyPolicy {
    /// Network-capable utilities that may run anyway.
    pub allow_network: Vec<String>,
    /// Refuse writing utilities whose arguments are absolute or home paths.
    pub confine_writes: bool,
}

impl Default for SafetyPolicy {
    fn default() -> Self {
        Self {
            allow_network: Vec::new(),
            confine_writes: true,
        }
    }
}

impl SafetyPolicy {
    /// `Some(reason)` when the command must not run.
    pub fn check(&self, command: &str) -> Option<String> {
        if FORK_BOMB.is_match(command) {
            return Some("fork bomb".into());
        }
        if command.contains("--no-preserve-root") {
            return Some("--no-preserve-root".into());
        }
        let ast = match parse(command) {
            Ok(ast) => ast,
            Err(e) => return Some(format!("cannot vet unparseable command: {e}")),
        };
        self.check_ast(&ast)
    }

    fn check_ast(&self, ast: &BashAst) -> Option<String> {
        for stage in &ast.stages {
            if let Some(reason) = self.check_node(stage) {
                return Some(reason);
            }
            for nested in stage.nested() {
                if let Some(reason) = self.check_node(nested) {
                    return Some(reason);
                }
            }
        }
        None
    }

    fn check_node(&self, node: &UtilityNode) -> Option<String> {
        let name = node.name.rsplit('/').next().unwrap_or(&node.name);
        if FORBIDDEN.contains(&name) || name.starts_with("mkfs") {
            return Some(format!("{name} is not allowed"));
        }
        if NETWORK.contains(&name) && !self.allow_network.iter().any(|n| n == name) {
            return Some(format!("network utility {name} is not allow-listed"));
        }
        let literals: Vec<&str> = node.all_params().into_iter().map(|p| p.literal.as_str()).collect();

        if name == "rm" && is_recursive(node) && literals.iter().any(|l| is_root_like(l)) {
            return Some("recursive delete of a root directory".into());
        }
        if matches!(name, "chmod" | "chown" | "chgrp") && is_recursive(node) && literals.iter().any(|l| is_root_like(l)) {
            return Some(format!("recursive {name} of a root directory"));
        }
        if name == "dd" && literals.iter().any(|l| l.starts_with("of=/dev/")) {
            return Some("dd onto a device".into());
        }
        if name == "kill" && literals.contains(&"-1") {
            return Some("kill of every process".into());
        }
        for arg in &node.args {
            if let Arg::Redirect { target, .. } = arg {
                let t = target.literal.as_str();
                if t.starts_with("/dev/") && t != "/dev/null" {
                    return Some(format!("write to device {t}"));
                }
                if self.confine_writes && escapes(t) {
                    return Some(format!("redirect outside the workspace: {t}"));
                }
            }
        }
        if self.confine_writes && WRITERS.contains(&name) {
            if let Some(l) = literals.iter().find(|l| escapes(l)) {
                return Some(format!("{name} touches a path outside the workspace: {l}"));
            }
        }
        None
    }
}

fn is_recursive(node: &UtilityNode) -> bool {
    node.flag_tokens().any(|f| {
        f == "--recursive"
            || (!f.starts_with("--") && f[1..].chars().any(|c| c == 'r' || c == 'R'))
    })
}

fn is_root_like(literal: &str) -> bool {
    let l = literal.trim_matches(['\'', '"']);
    matches!(l, "/" | "/*" | "/." | "~" | "~/" | "~/*" | "$HOME" | "${HOME}" | "..")
}

fn escapes(literal: &str) -> bool {
    let l = literal.trim_matches(['\'', '"']);
    l.starts_with('/') || l.starts_with('~') || l.starts_with("$HOME") || l == ".." || l.starts_with("../")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refused(cmd: &str) -> bool {
        SafetyPolicy::default().check(cmd).is_some()
    }

    #[test]
    fn blocks_destructive_commands() {
        assert!(refused("rm -rf /"));
        assert!(refused("rm -r -f /*"));
        assert!(refused("rm --recursive ~"));
        assert!(refused("rm -rf --no-preserve-root /"));
        assert!(refused("dd if=/dev/zero of=/dev/sda"));
        assert!(refused("cat a.txt > /dev/sda"));
        assert!(refused(":(){ :|:& };:"));
        assert!(refused("sudo ls"));
        assert!(refused("find . -exec shutdown now \\;"));
        assert!(refused("chmod -R 777 /"));
    }

    #[test]
    fn blocks_network_unless_allowed() {
        assert!(refused("curl http://example.com"));
        assert!(refused("ls | nc host 80"));
        let policy = SafetyPolicy {
            allow_network: vec!["curl".into()],
            ..SafetyPolicy::default()
        };
        assert!(policy.check("curl http://example.com").is_none());
    }

    #[test]
    fn confines_writes() {
        assert!(refused("touch /tmp/escape"));
        assert!(refused("cp a.txt ~/x"));
        assert!(refused("echo hi > /tmp/x"));
        assert!(refused("mv a.txt ../a.txt"));
        assert!(!refused("ls /usr/bin"));
        assert!(!refused("ls -l > out.txt"));
        assert!(!refused("rm -rf abc"));
    }

    #[test]
    fn allows_benign_commands() {
        for cmd in ["ls", "cat temp.txt", "find . -name '*.txt' | xargs grep foo", "sleep 5"] {
            assert!(!refused(cmd), "{cmd}");
        }
    }

    #[test]
    fn unparseable_is_refused() {
        assert!(refused("ls && rm x"));
    }
}
