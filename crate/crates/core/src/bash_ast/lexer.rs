use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// A shell word with its quoting and escapes preserved verbatim.
    Word(String),
    Pipe,
    SubstOpen,
    SubstClose,
    Redirect(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    out: Vec<Token>,
    word: String,
    word_start: usize,
    subst_depth: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer {
        chars: src.char_indices().peekable(),
        out: Vec::new(),
        word: String::new(),
        word_start: 0,
        subst_depth: 0,
    };
    lexer.run()?;
    Ok(lexer.out)
}

impl Lexer<'_> {
    fn run(&mut self) -> Result<(), ParseError> {
        while let Some((i, c)) = self.chars.next() {
            match c {
                '\n' | '\r' => return Err(ParseError::MultiLine),
                c if c.is_whitespace() => self.flush(),
                '\'' => {
                    self.begin(i);
                    self.word.push(c);
                    self.quoted_single(i)?;
                }
                '"' => {
                    self.begin(i);
                    self.word.push(c);
                    self.quoted_double(i)?;
                }
                '\\' => {
                    self.begin(i);
                    self.word.push(c);
                    match self.chars.next() {
                        Some((_, next)) => self.word.push(next),
                        None => return Err(unsupported("\\", i)),
                    }
                }
                '|' => {
                    self.flush();
                    if matches!(self.chars.peek(), Some((_, '|'))) {
                        return Err(unsupported("||", i));
                    }
                    self.emit(Tok::Pipe, i);
                }
                ';' => {
                    self.flush();
                    self.emit(Tok::Word(";".into()), i);
                }
                '>' => {
                    let (op, start) = if !self.word.is_empty() && (self.word == "1" || self.word == "2")
                    {
                        let fd = std::mem::take(&mut self.word);
                        (fd + ">", self.word_start)
                    } else {
                        self.flush();
                        (">".to_string(), i)
                    };
                    let mut op = op;
                    if matches!(self.chars.peek(), Some((_, '>'))) {
                        self.chars.next();
                        op.push('>');
                    }
                    if matches!(self.chars.peek(), Some((_, '&' | '|'))) {
                        return Err(unsupported(&format!("{op}&"), start));
                    }
                    self.emit(Tok::Redirect(op), start);
                }
                '$' if matches!(self.chars.peek(), Some((_, '('))) => {
                    if !self.word.is_empty() {
                        return Err(unsupported("$(", i));
                    }
                    self.chars.next();
                    if matches!(self.chars.peek(), Some((_, '('))) {
                        return Err(unsupported("$((", i));
                    }
                    self.subst_depth += 1;
                    self.emit(Tok::SubstOpen, i);
                }
                ')' if self.subst_depth > 0 => {
                    self.flush();
                    self.subst_depth -= 1;
                    self.emit(Tok::SubstClose, i);
                }
                '&' | '<' | '`' | '(' | ')' => return Err(unsupported(&c.to_string(), i)),
                _ => {
                    self.begin(i);
                    self.word.push(c);
                }
            }
        }
        self.flush();
        if self.subst_depth > 0 {
            return Err(ParseError::UnclosedSubstitution);
        }
        Ok(())
    }

    fn begin(&mut self, i: usize) {
        if self.word.is_empty() {
            self.word_start = i;
        }
    }

    fn flush(&mut self) {
        if !self.word.is_empty() {
            let w = std::mem::take(&mut self.word);
            self.out.push(Token {
                tok: Tok::Word(w),
                offset: self.word_start,
            });
        }
    }

    fn emit(&mut self, tok: Tok, offset: usize) {
        self.out.push(Token { tok, offset });
    }

    fn quoted_single(&mut self, start: usize) -> Result<(), ParseError> {
        for (_, c) in self.chars.by_ref() {
            self.word.push(c);
            if c == '\'' {
                return Ok(());
            }
        }
        Err(ParseError::UnbalancedQuote {
            quote: '\'',
            offset: start,
        })
    }

    fn quoted_double(&mut self, start: usize) -> Result<(), ParseError> {
        while let Some((_, c)) = self.chars.next() {
            self.word.push(c);
            match c {
                '\\' => {
                    if let Some((_, next)) = self.chars.next() {
                        self.word.push(next);
                    }
                }
                '"' => return Ok(()),
                _ => {}
            }
        }
        Err(ParseError::UnbalancedQuote {
            quote: '"',
            offset: start,
        })
    }
}

fn unsupported(token: &str, offset: usize) -> ParseError {
    ParseError::Unsupported {
        token: token.to_string(),
        offset,
    }
}
