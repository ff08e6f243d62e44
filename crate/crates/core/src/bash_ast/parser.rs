use super::categorize::{categorize, ParamContext};
use super::lexer::{lex, Tok, Token};
use super::{Arg, BashAst, FlagArg, FlagNode, ParamNode, ParseError, PlaceholderKind, UtilityNode};

/// Whether a flag consumes the following word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagArity {
    Unknown,
    NoArg,
    Takes(PlaceholderKind),
}

/// Syntax knowledge the parser consults to attach flag arguments and to
/// give parameters a declared category.
pub trait FlagLookup {
    fn flag_arity(&self, utility: &str, flag: &str) -> FlagArity;
    fn positional_kind(&self, utility: &str, index: usize) -> Option<PlaceholderKind>;
}

/// Lookup that knows nothing: no flag takes an argument.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLookup;

impl FlagLookup for NoLookup {
    fn flag_arity(&self, _: &str, _: &str) -> FlagArity {
        FlagArity::Unknown
    }

    fn positional_kind(&self, _: &str, _: usize) -> Option<PlaceholderKind> {
        None
    }
}

const EXEC_FLAGS: [&str; 4] = ["-exec", "-execdir", "-ok", "-okdir"];
const EXEC_TERMINATORS: [&str; 4] = [";", "\\;", "';'", "\";\""];

/// Parse with the bundled utility knowledge base.
pub fn parse(source: &str) -> Result<BashAst, ParseError> {
    parse_with(source, crate::syntax_kb::builtin())
}

pub fn parse_with(source: &str, lookup: &dyn FlagLookup) -> Result<BashAst, ParseError> {
    let trimmed = source.trim_end_matches(['\n', '\r']).trim();
    if trimmed.is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = lex(trimmed)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        lookup,
    };
    let stages = parser.pipeline()?;
    Ok(BashAst {
        stages,
        raw: source.to_string(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scope {
    Top,
    Exec,
    Substitution,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    lookup: &'a dyn FlagLookup,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(0, |t| t.offset)
    }

    fn pipeline(&mut self) -> Result<Vec<UtilityNode>, ParseError> {
        let mut stages = Vec::new();
        loop {
            let stage = self.stage(Scope::Top, stages.len())?;
            stages.push(stage);
            match self.peek() {
                None => return Ok(stages),
                Some(Tok::Pipe) => {
                    self.pos += 1;
                }
                Some(other) => {
                    return Err(ParseError::Unsupported {
                        token: format!("{other:?}"),
                        offset: self.offset(),
                    })
                }
            }
        }
    }

    fn stage(&mut self, scope: Scope, index: usize) -> Result<UtilityNode, ParseError> {
        let name = match self.peek() {
            Some(Tok::Word(w)) if !w.starts_with('-') && w != ";" && !is_terminator(w) => w.clone(),
            _ => return Err(ParseError::MissingUtility { stage: index }),
        };
        self.pos += 1;
        let mut node = UtilityNode::new(name);
        let mut positional = 0usize;
        let mut end_of_options = false;

        while let Some(tok) = self.peek().cloned() {
            match tok {
                Tok::Pipe => {
                    if scope == Scope::Top {
                        break;
                    }
                    return Err(ParseError::TooDeep);
                }
                Tok::SubstClose => {
                    if scope == Scope::Substitution {
                        break;
                    }
                    return Err(ParseError::Unsupported {
                        token: ")".into(),
                        offset: self.offset(),
                    });
                }
                Tok::SubstOpen => {
                    if scope != Scope::Top {
                        return Err(ParseError::TooDeep);
                    }
                    self.pos += 1;
                    let body = self.stage(Scope::Substitution, index)?;
                    match self.peek() {
                        Some(Tok::SubstClose) => self.pos += 1,
                        _ => return Err(ParseError::UnclosedSubstitution),
                    }
                    node.args.push(Arg::Substitution(body));
                }
                Tok::Redirect(op) => {
                    self.pos += 1;
                    let target = match self.peek() {
                        Some(Tok::Word(w)) if w != ";" => w.clone(),
                        _ => return Err(ParseError::MissingRedirectTarget { op }),
                    };
                    self.pos += 1;
                    let ctx = ParamContext::new(Some(&node.name), None, None);
                    let category = categorize(&target, &ctx);
                    node.args.push(Arg::Redirect {
                        op,
                        target: ParamNode::new(target, category),
                    });
                }
                Tok::Word(word) => {
                    if scope == Scope::Exec && self.closes_exec(&word, &node) {
                        break;
                    }
                    if word == ";" {
                        return Err(ParseError::Unsupported {
                            token: word,
                            offset: self.offset(),
                        });
                    }
                    self.pos += 1;
                    if word == "{}" || (word == "--" && !end_of_options) {
                        end_of_options |= word == "--";
                        node.args.push(Arg::Verbatim(word));
                    } else if !end_of_options && is_flag(&word) {
                        let flag = self.flag(word, &node.name, scope, index)?;
                        node.args.push(Arg::Flag(flag));
                    } else {
                        let declared = self.lookup.positional_kind(&node.name, positional);
                        let ctx = ParamContext::new(Some(&node.name), None, declared);
                        let category = categorize(&word, &ctx);
                        node.args.push(Arg::Param(ParamNode::new(word, category)));
                        positional += 1;
                    }
                }
            }
        }
        Ok(node)
    }

    /// `+` only closes an exec body directly after `{}`.
    fn closes_exec(&self, word: &str, node: &UtilityNode) -> bool {
        if EXEC_TERMINATORS.contains(&word) {
            return true;
        }
        word == "+" && matches!(node.args.last(), Some(Arg::Verbatim(v)) if v == "{}")
    }

    fn flag(
        &mut self,
        token: String,
        utility: &str,
        scope: Scope,
        index: usize,
    ) -> Result<FlagNode, ParseError> {
        if EXEC_FLAGS.contains(&token.as_str()) {
            if scope != Scope::Top {
                return Err(ParseError::TooDeep);
            }
            let body = self.stage(Scope::Exec, index)?;
            let terminator = match self.peek() {
                Some(Tok::Word(w)) if self.closes_exec(w, &body) => w.clone(),
                _ => return Err(ParseError::UnterminatedExec { flag: token }),
            };
            self.pos += 1;
            return Ok(FlagNode {
                token,
                arg: Some(FlagArg::Command {
                    body: Box::new(body),
                    terminator,
                }),
            });
        }

        if let FlagArity::Takes(kind) = resolve_arity(self.lookup, utility, &token) {
            if let Some(Tok::Word(value)) = self.peek() {
                if value != ";" && !(scope == Scope::Exec && is_terminator(value)) {
                    let value = value.clone();
                    self.pos += 1;
                    let ctx = ParamContext::new(Some(utility), Some(&token), Some(kind));
                    let category = categorize(&value, &ctx);
                    return Ok(FlagNode {
                        token,
                        arg: Some(FlagArg::Value(ParamNode::new(value, category))),
                    });
                }
            }
        }
        Ok(FlagNode::bare(token))
    }
}

fn is_flag(word: &str) -> bool {
    word.len() > 1 && word.starts_with('-')
}

fn is_terminator(word: &str) -> bool {
    EXEC_TERMINATORS.contains(&word)
}

/// Looks the flag up directly, then as a bundle of short flags (`-cjf`).
/// A bundle takes an argument when any of its letters does.
fn resolve_arity(lookup: &dyn FlagLookup, utility: &str, flag: &str) -> FlagArity {
    let direct = lookup.flag_arity(utility, flag);
    if direct != FlagArity::Unknown {
        return direct;
    }
    let letters = &flag[1..];
    if flag.starts_with("--")
        || letters.len() < 2
        || !letters.chars().all(|c| c.is_ascii_alphanumeric())
    {
        return FlagArity::Unknown;
    }
    let mut taken = None;
    for c in letters.chars() {
        match lookup.flag_arity(utility, &format!("-{c}")) {
            FlagArity::Unknown => return FlagArity::Unknown,
            FlagArity::Takes(kind) if taken.is_none() => taken = Some(kind),
            _ => {}
        }
    }
    taken.map_or(FlagArity::NoArg, FlagArity::Takes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(node: &UtilityNode) -> (Vec<&str>, Vec<&str>) {
        (
            node.flag_tokens().collect(),
            node.params().map(|p| p.literal.as_str()).collect(),
        )
    }

    #[test]
    fn grep_with_two_params() {
        let ast = parse("grep -w foo bar").unwrap();
        assert_eq!(ast.stages.len(), 1);
        assert_eq!(ast.stages[0].name, "grep");
        assert_eq!(names(&ast.stages[0]), (vec!["-w"], vec!["foo", "bar"]));
    }

    #[test]
    fn cat_piped_into_grep() {
        let ast = parse("cat bar | grep -w foo").unwrap();
        assert_eq!(ast.stages.len(), 2);
        assert_eq!(ast.stages[0].name, "cat");
        assert_eq!(names(&ast.stages[0]), (vec![], vec!["bar"]));
        assert_eq!(ast.stages[1].name, "grep");
        assert_eq!(names(&ast.stages[1]), (vec!["-w"], vec!["foo"]));
    }

    #[test]
    fn empty_and_blank_input() {
        assert_eq!(parse(""), Err(ParseError::Empty));
        assert_eq!(parse("   "), Err(ParseError::Empty));
    }

    #[test]
    fn stage_without_utility() {
        assert_eq!(parse("ls |"), Err(ParseError::MissingUtility { stage: 1 }));
        assert_eq!(parse("| ls"), Err(ParseError::MissingUtility { stage: 0 }));
        assert_eq!(parse("-l"), Err(ParseError::MissingUtility { stage: 0 }));
    }

    #[test]
    fn unbalanced_quote_is_an_error() {
        assert!(matches!(
            parse("grep 'foo bar"),
            Err(ParseError::UnbalancedQuote { .. })
        ));
    }

    #[test]
    fn flag_arguments_follow_lookup() {
        let ast = parse("find . -name '*.txt' -type f").unwrap();
        let find = &ast.stages[0];
        let name = find.flags().next().unwrap();
        assert_eq!(name.token, "-name");
        assert_eq!(name.value().unwrap().literal, "'*.txt'");
        assert_eq!(name.value().unwrap().category, PlaceholderKind::Regex);
        assert_eq!(find.params().count(), 1);
    }

    #[test]
    fn unknown_flags_take_nothing() {
        let ast = parse_with("find . -name foo", &NoLookup).unwrap();
        let find = &ast.stages[0];
        assert_eq!(names(find), (vec!["-name"], vec![".", "foo"]));
    }

    #[test]
    fn bundled_short_flags() {
        let ast = parse("tar -cjf backup.bz2 mydir").unwrap();
        let tar = &ast.stages[0];
        let flag = tar.flags().next().unwrap();
        assert_eq!(flag.token, "-cjf");
        assert_eq!(flag.value().unwrap().literal, "backup.bz2");
        assert_eq!(flag.value().unwrap().category, PlaceholderKind::File);
        assert_eq!(tar.params().next().unwrap().category, PlaceholderKind::Path);
    }

    #[test]
    fn exec_body_is_nested() {
        let ast = parse("find _PATH -inum _NUMBER -exec rm {} ;").unwrap();
        let find = &ast.stages[0];
        let nested: Vec<_> = find.nested().collect();
        assert_eq!(nested.len(), 1);
        assert_eq!(nested[0].name, "rm");
        assert_eq!(
            find.flag_tokens().collect::<Vec<_>>(),
            vec!["-inum", "-exec"]
        );
        assert_eq!(ast.render(), "find _PATH -inum _NUMBER -exec rm {} ;");
    }

    #[test]
    fn exec_terminator_forms() {
        for src in [
            r"find . -exec ls {} \;",
            "find . -exec ls {} ';'",
            "find . -exec ls {} +",
            r"find . -execdir grep -l foo {} \; -print",
        ] {
            let ast = parse(src).unwrap();
            assert_eq!(ast.render(), src, "{src}");
        }
        assert_eq!(
            parse("find . -exec rm {}"),
            Err(ParseError::UnterminatedExec {
                flag: "-exec".into()
            })
        );
    }

    #[test]
    fn nesting_limit() {
        assert_eq!(
            parse(r"find . -exec sh -exec ls \; \;"),
            Err(ParseError::TooDeep)
        );
        assert_eq!(parse("echo $(ls $(pwd))"), Err(ParseError::TooDeep));
        assert_eq!(parse("echo $(ls | wc)"), Err(ParseError::TooDeep));
        let ast = parse("rm $(find . -name a.txt)").unwrap();
        assert_eq!(ast.stages[0].nested().next().unwrap().name, "find");
        assert_eq!(ast.render(), "rm $(find . -name a.txt)");
    }

    #[test]
    fn bare_semicolon_outside_exec() {
        assert!(matches!(
            parse("ls ; pwd"),
            Err(ParseError::Unsupported { .. })
        ));
    }

    #[test]
    fn redirect_target() {
        let ast = parse("ls -l > out.txt").unwrap();
        let ls = &ast.stages[0];
        assert!(matches!(
            ls.args.last(),
            Some(Arg::Redirect { op, target }) if op == ">" && target.category == PlaceholderKind::File
        ));
        assert_eq!(
            parse("ls >"),
            Err(ParseError::MissingRedirectTarget { op: ">".into() })
        );
    }

    #[test]
    fn double_dash_ends_options() {
        let ast = parse("rm -- -weird").unwrap();
        assert_eq!(names(&ast.stages[0]), (vec![], vec!["-weird"]));
    }

    #[test]
    fn multi_line_rejected() {
        assert_eq!(parse("ls\npwd"), Err(ParseError::MultiLine));
        assert!(parse("ls\n").is_ok());
    }
}
