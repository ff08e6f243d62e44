use std::sync::LazyLock;

use regex::Regex;

use super::PlaceholderKind;
use crate::syntax_kb::GenArgKind;

/// Where a parameter appeared: the owning utility, the flag it belongs to
/// (if any), and the argument kind the knowledge base declares for it.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParamContext<'a> {
    pub utility: Option<&'a str>,
    pub flag: Option<&'a str>,
    pub declared: Option<PlaceholderKind>,
}

impl<'a> ParamContext<'a> {
    pub fn new(
        utility: Option<&'a str>,
        flag: Option<&'a str>,
        declared: Option<PlaceholderKind>,
    ) -> Self {
        Self {
            utility,
            flag,
            declared,
        }
    }

    fn flag_in(&self, flags: &[&str]) -> bool {
        self.flag.is_some_and(|f| flags.contains(&f))
    }

    fn utility_in(&self, utilities: &[&str]) -> bool {
        self.utility.is_some_and(|u| utilities.contains(&u))
    }

    fn permission(&self) -> bool {
        self.flag_in(&["-perm", "--mode"])
            || (self.flag.is_none() && self.utility_in(&["chmod"]))
            || (self.flag == Some("-m") && self.utility_in(&["mkdir", "install"]))
    }

    fn size(&self) -> bool {
        self.flag_in(&["-size", "--block-size", "--threshold"])
            || (self.flag_in(&["-t", "-B"]) && self.utility_in(&["du", "df", "ls"]))
            || (self.flag == Some("-c") && self.utility_in(&["head", "tail"]))
            || (self.flag == Some("-b") && self.utility_in(&["split"]))
    }

    fn time(&self) -> bool {
        self.flag_in(&["-mtime", "-atime", "-ctime", "-mmin", "-amin", "-cmin"])
            || (self.flag.is_none() && self.utility_in(&["sleep", "timeout"]))
    }

    fn directory(&self) -> bool {
        self.flag_in(&["-C", "--directory", "--target-directory"])
            || (self.flag.is_none() && self.utility_in(&["cd", "pushd", "rmdir", "mkdir"]))
            || (self.flag == Some("-t") && self.utility_in(&["cp", "mv", "ln"]))
    }
}

macro_rules! pattern {
    ($name:ident, $re:expr) => {
        static $name: LazyLock<Regex> = LazyLock::new(|| Regex::new($re).unwrap());
    };
}

pattern!(DIGITS, r"^[0-9]+$");
pattern!(OCTAL_MODE, r"^[-+/]?[0-7]{3,4}$");
pattern!(SYMBOLIC_MODE, r"^[ugoa]*[-+=][rwxXst]*(,[ugoa]*[-+=][rwxXst]*)*$");
pattern!(SIZE, r"^[-+]?[0-9]+(\.[0-9]+)?[bcwkKMGTP]$");
pattern!(TIMESPAN, r"^[-+]?[0-9]+(\.[0-9]+)?[smhd]$");
pattern!(SIGNED_INT, r"^[-+][0-9]+$");
pattern!(
    DATETIME,
    r"^([0-9]{4}-[0-9]{2}-[0-9]{2}([ T][0-9]{2}:[0-9]{2}(:[0-9]{2})?)?|[0-9]{4}/[0-9]{2}/[0-9]{2}|[0-9]{1,2}/[0-9]{1,2}/[0-9]{4}|[0-9]{2}:[0-9]{2}(:[0-9]{2})?)$"
);
pattern!(EXTENSION, r"\.[A-Za-z][A-Za-z0-9]{0,7}$");
pattern!(BARE_FILE, r"^[A-Za-z0-9_][A-Za-z0-9_.+~-]*\.[A-Za-z][A-Za-z0-9]{0,7}$");
pattern!(DOTFILE, r"^\.[A-Za-z0-9_][A-Za-z0-9_.-]*$");
pattern!(BARE_PATH_CHARS, r"^[A-Za-z0-9_./~+-]+$");

/// Assign a placeholder category to a parameter literal.
///
/// Rules fire in order: already-templatized tokens, the declared kind from
/// the knowledge base, all digits, permission modes, sizes, timespans,
/// dates, paths/directories, file names, and finally `REGEX`.
pub fn categorize(literal: &str, ctx: &ParamContext<'_>) -> PlaceholderKind {
    let text = unquote(literal);

    if let Some(kind) = PlaceholderKind::from_token(text) {
        return kind;
    }
    if let Some(kind) = GenArgKind::from_placeholder(text) {
        return kind.to_parser_kind();
    }
    if let Some(kind) = ctx.declared {
        return kind;
    }
    if DIGITS.is_match(text) {
        return PlaceholderKind::Number;
    }
    if ctx.permission() && (OCTAL_MODE.is_match(text) || SYMBOLIC_MODE.is_match(text)) {
        return PlaceholderKind::Permission;
    }
    if ctx.size() && (SIZE.is_match(text) || SIGNED_INT.is_match(text)) {
        return PlaceholderKind::Size;
    }
    if ctx.time() && (TIMESPAN.is_match(text) || SIGNED_INT.is_match(text)) {
        return PlaceholderKind::Timespan;
    }
    if DATETIME.is_match(text) {
        return PlaceholderKind::Datetime;
    }
    let last = text.rsplit('/').next().unwrap_or(text);
    if is_path_like(text) && !EXTENSION.is_match(last) {
        return if ctx.directory() {
            PlaceholderKind::Directory
        } else {
            PlaceholderKind::Path
        };
    }
    if BARE_PATH_CHARS.is_match(text) && (BARE_FILE.is_match(last) || DOTFILE.is_match(last)) {
        return PlaceholderKind::File;
    }
    PlaceholderKind::Regex
}

fn is_path_like(text: &str) -> bool {
    text.contains('/') || matches!(text, "." | ".." | "~") || text.starts_with("~/")
}

/// Strips one level of matching surrounding quotes.
pub(crate) fn unquote(literal: &str) -> &str {
    let bytes = literal.as_bytes();
    if bytes.len() >= 2 {
        let (first, last) = (bytes[0], bytes[bytes.len() - 1]);
        if (first == b'\'' || first == b'"') && first == last {
            return &literal[1..literal.len() - 1];
        }
    }
    literal
}

#[cfg(test)]
mod tests {
    use super::*;
    use PlaceholderKind::*;

    fn bare(literal: &str) -> PlaceholderKind {
        categorize(literal, &ParamContext::default())
    }

    fn under(utility: &str, flag: Option<&str>, literal: &str) -> PlaceholderKind {
        categorize(literal, &ParamContext::new(Some(utility), flag, None))
    }

    #[test]
    fn documented_examples() {
        assert_eq!(bare("/usr/bin"), Path);
        assert_eq!(bare("12345"), Number);
        assert_eq!(bare("a.*b"), Regex);
    }

    #[test]
    fn declared_kind_wins() {
        let ctx = ParamContext::new(Some("tar"), Some("-f"), Some(File));
        assert_eq!(categorize("mydir", &ctx), File);
        let ctx = ParamContext::new(Some("x"), None, Some(Directory));
        assert_eq!(categorize("12", &ctx), Directory);
    }

    #[test]
    fn placeholders_map_to_themselves() {
        for kind in PlaceholderKind::ALL {
            assert_eq!(bare(kind.token()), kind);
            // even with a conflicting declared kind
            let ctx = ParamContext::new(None, None, Some(Regex));
            assert_eq!(categorize(kind.token(), &ctx), kind);
        }
        assert_eq!(bare("[File]"), File);
        assert_eq!(bare("[Quantity]"), Number);
        assert_eq!(bare("[Pattern]"), Regex);
    }

    #[test]
    fn contextual_rules() {
        assert_eq!(under("find", Some("-perm"), "-644"), Permission);
        assert_eq!(under("chmod", None, "u+x"), Permission);
        assert_eq!(under("ls", None, "u+x"), Regex);
        // all digits fires before the permission rule
        assert_eq!(under("chmod", None, "755"), Number);
        assert_eq!(under("find", Some("-size"), "+10k"), Size);
        assert_eq!(under("find", Some("-size"), "-2"), Size);
        assert_eq!(under("grep", Some("-e"), "10k"), Regex);
        assert_eq!(under("find", Some("-mtime"), "+7"), Timespan);
        assert_eq!(under("sleep", None, "2m"), Timespan);
        assert_eq!(under("cd", None, "/tmp"), Directory);
        assert_eq!(under("tar", Some("-C"), "out/"), Directory);
        assert_eq!(under("ls", None, "/tmp"), Path);
    }

    #[test]
    fn dates_paths_files() {
        assert_eq!(bare("2021-03-04"), Datetime);
        assert_eq!(bare("2021-03-04 10:11"), Datetime);
        assert_eq!(bare("12:30"), Datetime);
        assert_eq!(bare("2021/03/04"), Datetime);
        assert_eq!(bare("."), Path);
        assert_eq!(bare("~"), Path);
        assert_eq!(bare("~/docs"), Path);
        assert_eq!(bare("/tmp/a.txt"), File);
        assert_eq!(bare("temp.txt"), File);
        assert_eq!(bare("backup.tar.gz"), File);
        assert_eq!(bare(".bashrc"), File);
        assert_eq!(bare("mydir"), Regex);
        assert_eq!(bare("*.txt"), Regex);
        assert_eq!(bare("/tmp/*.log"), Regex);
        assert_eq!(bare("1.5"), Regex);
    }

    #[test]
    fn quotes_are_ignored_for_rules() {
        assert_eq!(bare("'/home/user'"), Path);
        assert_eq!(bare("\"42\""), Number);
        assert_eq!(bare("\"foo\""), Regex);
        assert_eq!(bare("''"), Regex);
    }
}
