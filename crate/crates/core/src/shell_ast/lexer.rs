use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    Pipe,
    Amp,
    Semi,
    AndIf,
    OrIf,
    LParen,
    RParen,
    Newline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RedirOp {
    In,
    Out,
    Append,
    /// `>|`, `<&`, `>&`, `<>`: tokenized so the command can be kept opaque.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokKind {
    Word { raw: String, needs_expansion: bool },
    Op(Op),
    Redir { fd: Option<u32>, op: RedirOp },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn word(&self) -> Option<&str> {
        match &self.kind {
            TokKind::Word { raw, .. } => Some(raw),
            _ => None,
        }
    }

    pub fn is_op(&self, op: Op) -> bool {
        self.kind == TokKind::Op(op)
    }
}

fn is_meta(c: u8) -> bool {
    matches!(c, b' ' | b'\t' | b'\n' | b'|' | b'&' | b';' | b'(' | b')' | b'<' | b'>')
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let b = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'\\' if b.get(i + 1) == Some(&b'\n') => i += 2,
            b'\n' => {
                toks.push(Token {
                    kind: TokKind::Op(Op::Newline),
                    start: i,
                    end: i + 1,
                });
                i += 1;
            }
            b'#' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'|' | b'&' | b';' | b'(' | b')' => {
                let next = b.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    (b'|', Some(b'|')) => (Op::OrIf, 2),
                    (b'|', _) => (Op::Pipe, 1),
                    (b'&', Some(b'&')) => (Op::AndIf, 2),
                    (b'&', _) => (Op::Amp, 1),
                    (b';', _) => (Op::Semi, 1),
                    (b'(', _) => (Op::LParen, 1),
                    _ => (Op::RParen, 1),
                };
                toks.push(Token {
                    kind: TokKind::Op(op),
                    start: i,
                    end: i + len,
                });
                i += len;
            }
            b'<' | b'>' => {
                let (op, len) = redir_op(b, i)?;
                toks.push(Token {
                    kind: TokKind::Redir { fd: None, op },
                    start: i,
                    end: i + len,
                });
                i += len;
            }
            b'0'..=b'9' => {
                let mut j = i;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                if j < b.len() && (b[j] == b'<' || b[j] == b'>') {
                    let fd = src[i..j]
                        .parse::<u32>()
                        .map_err(|_| SyntaxError::new(i, "file descriptor out of range"))?;
                    let (op, len) = redir_op(b, j)?;
                    toks.push(Token {
                        kind: TokKind::Redir { fd: Some(fd), op },
                        start: i,
                        end: j + len,
                    });
                    i = j + len;
                } else {
                    i = lex_word(src, i, &mut toks)?;
                }
            }
            _ => i = lex_word(src, i, &mut toks)?,
        }
    }
    Ok(toks)
}

fn redir_op(b: &[u8], i: usize) -> Result<(RedirOp, usize), SyntaxError> {
    let next = b.get(i + 1).copied();
    Ok(match (b[i], next) {
        (b'<', Some(b'<')) => {
            return Err(SyntaxError::new(i, "here-documents are not supported"));
        }
        (b'<', Some(b'&')) | (b'<', Some(b'>')) => (RedirOp::Other, 2),
        (b'<', _) => (RedirOp::In, 1),
        (b'>', Some(b'>')) => (RedirOp::Append, 2),
        (b'>', Some(b'&')) | (b'>', Some(b'|')) => (RedirOp::Other, 2),
        _ => (RedirOp::Out, 1),
    })
}

fn lex_word(src: &str, start: usize, toks: &mut Vec<Token>) -> Result<usize, SyntaxError> {
    let b = src.as_bytes();
    let mut i = start;
    let mut raw = String::new();
    let mut needs_expansion = b[i] == b'~';
    while i < b.len() && !is_meta(b[i]) {
        match b[i] {
            b'\'' => {
                let close = find_byte(b, i + 1, b'\'')
                    .ok_or_else(|| SyntaxError::new(i, "unterminated single quote"))?;
                raw.push_str(&src[i..=close]);
                i = close + 1;
            }
            b'"' => {
                let (close, expands) = scan_double_quoted(src, i)?;
                needs_expansion |= expands;
                raw.push_str(&src[i..=close]);
                i = close + 1;
            }
            b'\\' => {
                if b.get(i + 1) == Some(&b'\n') {
                    i += 2;
                } else {
                    let end = next_char_end(src, (i + 1).min(b.len()));
                    raw.push_str(&src[i..end]);
                    i = end;
                }
            }
            b'$' => {
                needs_expansion = true;
                let end = scan_dollar(src, i)?;
                raw.push_str(&src[i..end]);
                i = end;
            }
            b'`' => {
                needs_expansion = true;
                let close = scan_backtick(b, i)?;
                raw.push_str(&src[i..=close]);
                i = close + 1;
            }
            c => {
                if matches!(c, b'*' | b'?' | b'[') {
                    needs_expansion = true;
                }
                let end = next_char_end(src, i);
                raw.push_str(&src[i..end]);
                i = end;
            }
        }
    }
    toks.push(Token {
        kind: TokKind::Word {
            raw,
            needs_expansion,
        },
        start,
        end: i,
    });
    Ok(i)
}

fn next_char_end(src: &str, i: usize) -> usize {
    if i >= src.len() {
        return src.len();
    }
    let mut j = i + 1;
    while j < src.len() && !src.is_char_boundary(j) {
        j += 1;
    }
    j
}

fn find_byte(b: &[u8], from: usize, needle: u8) -> Option<usize> {
    b[from.min(b.len())..]
        .iter()
        .position(|&c| c == needle)
        .map(|p| p + from)
}

/// Returns the index of the closing quote and whether the contents expand.
fn scan_double_quoted(src: &str, open: usize) -> Result<(usize, bool), SyntaxError> {
    let b = src.as_bytes();
    let mut i = open + 1;
    let mut expands = false;
    while i < b.len() {
        match b[i] {
            b'"' => return Ok((i, expands)),
            b'\\' => i += 2,
            b'$' => {
                expands = true;
                i = scan_dollar(src, i)?;
            }
            b'`' => {
                expands = true;
                i = scan_backtick(b, i)? + 1;
            }
            _ => i += 1,
        }
    }
    Err(SyntaxError::new(open, "unterminated double quote"))
}

fn scan_backtick(b: &[u8], open: usize) -> Result<usize, SyntaxError> {
    let mut i = open + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'`' => return Ok(i),
            _ => i += 1,
        }
    }
    Err(SyntaxError::new(open, "unterminated backquote"))
}

/// Scans a `$...` expansion starting at `i`; returns the end offset.
fn scan_dollar(src: &str, i: usize) -> Result<usize, SyntaxError> {
    let b = src.as_bytes();
    match b.get(i + 1) {
        Some(b'(') => {
            let mut depth = 0usize;
            let mut j = i + 1;
            while j < b.len() {
                match b[j] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            return Ok(j + 1);
                        }
                    }
                    b'\'' => {
                        j = find_byte(b, j + 1, b'\'')
                            .ok_or_else(|| SyntaxError::new(j, "unterminated single quote"))?;
                    }
                    b'"' => j = scan_double_quoted(src, j)?.0,
                    b'\\' => j += 1,
                    _ => {}
                }
                j += 1;
            }
            Err(SyntaxError::new(i, "unbalanced parenthesis in command substitution"))
        }
        Some(b'{') => find_byte(b, i + 2, b'}')
            .map(|j| j + 1)
            .ok_or_else(|| SyntaxError::new(i, "unterminated parameter expansion")),
        Some(c) if c.is_ascii_alphabetic() || *c == b'_' => {
            let mut j = i + 1;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                j += 1;
            }
            Ok(j)
        }
        Some(c) if c.is_ascii_digit() || b"*@#?$!-".contains(c) => Ok(i + 2),
        _ => Ok(i + 1),
    }
}

/// Removes shell quoting from a raw word.
pub fn unquote(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                for d in chars.by_ref() {
                    if d == '\'' {
                        break;
                    }
                    out.push(d);
                }
            }
            '"' => {
                while let Some(d) = chars.next() {
                    match d {
                        '"' => break,
                        '\\' => match chars.peek() {
                            Some(&e) if matches!(e, '$' | '`' | '"' | '\\' | '\n') => {
                                chars.next();
                                if e != '\n' {
                                    out.push(e);
                                }
                            }
                            _ => out.push('\\'),
                        },
                        _ => out.push(d),
                    }
                }
            }
            '\\' => {
                if let Some(d) = chars.next() {
                    if d != '\n' {
                        out.push(d);
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// Splits a command template such as `paste -d+ $* | bc` into pipeline
/// stages of raw words.
pub(crate) fn lex_words(src: &str) -> Result<Vec<Vec<String>>, SyntaxError> {
    let mut stages = vec![Vec::new()];
    for tok in tokenize(src)? {
        match tok.kind {
            TokKind::Word { raw, .. } => stages.last_mut().expect("nonempty").push(raw),
            TokKind::Op(Op::Pipe) => stages.push(Vec::new()),
            _ => {
                return Err(SyntaxError::new(
                    tok.start,
                    "templates may only contain words and `|`",
                ))
            }
        }
    }
    if stages.iter().any(Vec::is_empty) {
        return Err(SyntaxError::new(0, "empty template stage"));
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(src: &str) -> Vec<String> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .filter_map(|t| t.word().map(str::to_string))
            .collect()
    }

    #[test]
    fn quotes_are_kept_raw() {
        assert_eq!(
            words("tr -cs A-Za-z '\\n'"),
            vec!["tr", "-cs", "A-Za-z", "'\\n'"]
        );
        assert_eq!(unquote("'\\n'"), "\\n");
        assert_eq!(unquote("\"a b\"c"), "a bc");
        assert_eq!(unquote("a\\ b"), "a b");
    }

    #[test]
    fn expansion_flags() {
        let toks = tokenize("echo $HOME 'x*' y* \"$(ls)\"").unwrap();
        let flags: Vec<bool> = toks
            .iter()
            .map(|t| match t.kind {
                TokKind::Word {
                    needs_expansion, ..
                } => needs_expansion,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(flags, vec![false, true, false, true, true]);
    }

    #[test]
    fn fd_redirections() {
        let toks = tokenize("cmd 2> err 10<in x>y").unwrap();
        assert!(matches!(
            toks[1].kind,
            TokKind::Redir {
                fd: Some(2),
                op: RedirOp::Out
            }
        ));
        assert!(matches!(
            toks[3].kind,
            TokKind::Redir {
                fd: Some(10),
                op: RedirOp::In
            }
        ));
        assert_eq!(toks[5].word(), Some("x"));
    }

    #[test]
    fn unterminated_quote_reports_offset() {
        let err = tokenize("echo 'abc").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(tokenize("echo \"abc").is_err());
        assert!(tokenize("echo $(ls").is_err());
    }

    #[test]
    fn template_stages() {
        assert_eq!(
            lex_words("paste -d+ $* | bc").unwrap(),
            vec![vec!["paste", "-d+", "$*"], vec!["bc"]]
        );
        assert!(lex_words("a ; b").is_err());
    }
}
