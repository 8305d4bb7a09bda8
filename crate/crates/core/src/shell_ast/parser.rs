use super::lexer::{tokenize, Op, RedirOp, TokKind, Token};
use super::{OpaqueKind, Redir, RedirDirection, ShellAst, SimpleCommand, SyntaxError, Word};

/// Parses a script. Fails on an empty script; see [`parse_script`].
pub fn parse(src: &str) -> Result<ShellAst, SyntaxError> {
    parse_script(src)?.ok_or_else(|| SyntaxError::new(0, "script contains no commands"))
}

/// Parses a script that may be empty (only blanks and comments).
pub fn parse_script(src: &str) -> Result<Option<ShellAst>, SyntaxError> {
    let toks = tokenize(src)?;
    let mut p = Parser { src, toks, pos: 0 };
    let ast = p.list(false)?;
    if let Some(t) = p.peek() {
        return Err(SyntaxError::new(t.start, "unexpected token"));
    }
    Ok(ast)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

fn closer_for(word: &str) -> Option<&'static str> {
    match word {
        "if" => Some("fi"),
        "while" | "until" | "for" | "select" => Some("done"),
        "case" => Some("esac"),
        "{" => Some("}"),
        _ => None,
    }
}

fn opaque_kind(word: &str) -> OpaqueKind {
    match word {
        "if" => OpaqueKind::If,
        "while" => OpaqueKind::While,
        "until" => OpaqueKind::Until,
        "for" | "select" => OpaqueKind::For,
        "case" => OpaqueKind::Case,
        "function" => OpaqueKind::FunctionDef,
        _ => OpaqueKind::BraceGroup,
    }
}

fn is_assignment(raw: &str) -> bool {
    let Some(eq) = raw.find('=') else {
        return false;
    };
    let name = &raw[..eq];
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.toks.get(self.pos + k)
    }

    fn peek_op(&self, op: Op) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eof_offset(&self) -> usize {
        self.src.len()
    }

    fn skip_newlines(&mut self) {
        while self.peek_op(Op::Newline) {
            self.pos += 1;
        }
    }

    fn list(&mut self, in_parens: bool) -> Result<Option<ShellAst>, SyntaxError> {
        let mut acc: Option<ShellAst> = None;
        loop {
            self.skip_newlines();
            match self.peek() {
                None => break,
                Some(t) if in_parens && t.is_op(Op::RParen) => break,
                _ => {}
            }
            let mut item = self.and_or()?;
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokKind::Op(Op::Amp)) => {
                    self.pos += 1;
                    item = ShellAst::background(item);
                    if self.peek_op(Op::Semi) {
                        self.pos += 1;
                    }
                }
                Some(TokKind::Op(Op::Semi)) | Some(TokKind::Op(Op::Newline)) => self.pos += 1,
                Some(TokKind::Op(Op::RParen)) if in_parens => {}
                None => {}
                Some(_) => {
                    let t = self.peek().expect("checked");
                    return Err(SyntaxError::new(t.start, "unexpected token after command"));
                }
            }
            acc = Some(match acc {
                None => item,
                Some(prev) => ShellAst::seq(prev, item),
            });
        }
        Ok(acc)
    }

    fn and_or(&mut self) -> Result<ShellAst, SyntaxError> {
        let mut left = self.pipeline()?;
        loop {
            let is_and = if self.peek_op(Op::AndIf) {
                true
            } else if self.peek_op(Op::OrIf) {
                false
            } else {
                break;
            };
            self.pos += 1;
            self.skip_newlines();
            let right = self.pipeline()?;
            left = if is_and {
                ShellAst::and(left, right)
            } else {
                ShellAst::or(left, right)
            };
        }
        Ok(left)
    }

    fn pipeline(&mut self) -> Result<ShellAst, SyntaxError> {
        let negated = matches!(
            self.peek().map(|t| &t.kind),
            Some(TokKind::Word { raw, .. }) if raw == "!"
        );
        if negated {
            self.pos += 1;
        }
        let mut commands = vec![self.command()?];
        while self.peek_op(Op::Pipe) {
            self.pos += 1;
            self.skip_newlines();
            commands.push(self.command()?);
        }
        let inner = if commands.len() == 1 {
            commands.pop().expect("one command")
        } else {
            ShellAst::pipeline(commands)
        };
        Ok(if negated {
            ShellAst::Not(Box::new(inner))
        } else {
            inner
        })
    }

    fn command(&mut self) -> Result<ShellAst, SyntaxError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(SyntaxError::new(self.eof_offset(), "expected a command"));
        };
        match &tok.kind {
            TokKind::Op(Op::LParen) => self.subshell(),
            TokKind::Word { raw, .. } if closer_for(raw).is_some() || raw == "function" => {
                self.compound(tok.start, opaque_kind(raw))
            }
            TokKind::Word { .. }
                if self.peek_at(1).is_some_and(|t| t.is_op(Op::LParen))
                    && self.peek_at(2).is_some_and(|t| t.is_op(Op::RParen)) =>
            {
                self.pos += 3;
                self.skip_newlines();
                self.compound(tok.start, OpaqueKind::FunctionDef)
            }
            TokKind::Word { .. } | TokKind::Redir { .. } => self.simple(),
            TokKind::Op(_) => Err(SyntaxError::new(tok.start, "expected a command")),
        }
    }

    fn subshell(&mut self) -> Result<ShellAst, SyntaxError> {
        let open = self.bump();
        let inner = self.list(true)?;
        if !self.peek_op(Op::RParen) {
            return Err(SyntaxError::new(open.start, "unbalanced parenthesis"));
        }
        let close = self.bump();
        let inner = inner.ok_or_else(|| SyntaxError::new(open.start, "empty subshell"))?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokKind::Redir { .. })) {
            let end = self.trailing_redirs(close.end)?;
            return Ok(ShellAst::opaque(
                OpaqueKind::Subshell,
                &self.src[open.start..end],
            ));
        }
        Ok(ShellAst::Subshell(Box::new(inner)))
    }

    /// Consumes redirections following a compound command; returns the end
    /// offset of the last one.
    fn trailing_redirs(&mut self, mut end: usize) -> Result<usize, SyntaxError> {
        while let Some(TokKind::Redir { .. }) = self.peek().map(|t| &t.kind) {
            let r = self.bump();
            match self.peek() {
                Some(t) if t.word().is_some() => end = self.bump().end,
                _ => return Err(SyntaxError::new(r.start, "missing redirection target")),
            }
        }
        Ok(end)
    }

    /// Scans a compound command (loop, conditional, group, function body)
    /// without interpreting it.
    fn compound(&mut self, start: usize, kind: OpaqueKind) -> Result<ShellAst, SyntaxError> {
        let mut stack: Vec<&'static str> = Vec::new();
        let mut at_command = true;
        let mut end;
        // `function name [()]` prefix
        if self.peek().and_then(Token::word) == Some("function") {
            self.pos += 1;
            if self.peek().and_then(Token::word).is_none() {
                return Err(SyntaxError::new(start, "missing function name"));
            }
            self.pos += 1;
            if self.peek_op(Op::LParen) && self.peek_at(1).is_some_and(|t| t.is_op(Op::RParen)) {
                self.pos += 2;
            }
            self.skip_newlines();
        }
        let opens = self
            .peek()
            .and_then(Token::word)
            .is_some_and(|w| closer_for(w).is_some());
        if !opens && !self.peek_op(Op::LParen) {
            return Err(SyntaxError::new(start, "unsupported function body"));
        }
        loop {
            let Some(tok) = self.peek().cloned() else {
                return Err(SyntaxError::new(start, "unterminated compound command"));
            };
            self.pos += 1;
            end = tok.end;
            let in_case = stack.last() == Some(&"esac");
            match &tok.kind {
                TokKind::Word { raw, .. } => {
                    if at_command {
                        if let Some(c) = closer_for(raw) {
                            stack.push(c);
                        } else if stack.last() == Some(&raw.as_str()) {
                            stack.pop();
                        }
                    }
                    at_command =
                        matches!(raw.as_str(), "then" | "do" | "else" | "elif" | "{" | "!");
                }
                TokKind::Op(Op::LParen) if !in_case => {
                    stack.push(")");
                    at_command = true;
                }
                TokKind::Op(Op::RParen) if !in_case => {
                    if stack.last() != Some(&")") {
                        return Err(SyntaxError::new(tok.start, "unbalanced parenthesis"));
                    }
                    stack.pop();
                    at_command = false;
                }
                TokKind::Op(_) => at_command = true,
                TokKind::Redir { .. } => at_command = false,
            }
            if stack.is_empty() {
                break;
            }
        }
        let end = self.trailing_redirs(end)?;
        Ok(ShellAst::opaque(kind, &self.src[start..end]))
    }

    fn simple(&mut self) -> Result<ShellAst, SyntaxError> {
        let start = self.peek().expect("caller checked").start;
        let mut end = start;
        let mut cmd = SimpleCommand::default();
        let mut fields: Vec<String> = Vec::new();
        let mut opaque = false;
        while let Some(tok) = self.peek().cloned() {
            match tok.kind {
                TokKind::Word {
                    raw,
                    needs_expansion,
                } => {
                    self.pos += 1;
                    end = tok.end;
                    opaque |= needs_expansion;
                    if fields.is_empty() && is_assignment(&raw) {
                        let eq = raw.find('=').expect("assignment");
                        cmd.assignments
                            .push((raw[..eq].to_string(), Word::from_fields(&[&raw[eq + 1..]])));
                    } else {
                        fields.push(raw);
                    }
                }
                TokKind::Redir { fd, op } => {
                    self.pos += 1;
                    let target = match self.peek().map(|t| t.kind.clone()) {
                        Some(TokKind::Word {
                            raw,
                            needs_expansion,
                        }) => {
                            opaque |= needs_expansion;
                            end = self.bump().end;
                            raw
                        }
                        _ => return Err(SyntaxError::new(tok.start, "missing redirection target")),
                    };
                    let direction = match op {
                        RedirOp::In => RedirDirection::Input,
                        RedirOp::Out => RedirDirection::Output,
                        RedirOp::Append => RedirDirection::Append,
                        RedirOp::Other => {
                            opaque = true;
                            RedirDirection::Output
                        }
                    };
                    let fd = fd.unwrap_or_else(|| Redir::default_fd(direction));
                    cmd.redirs.push(Redir::new(fd, direction, target));
                }
                TokKind::Op(_) => break,
            }
        }
        if fields.is_empty() || opaque {
            return Ok(ShellAst::opaque(OpaqueKind::Command, &self.src[start..end]));
        }
        cmd.word = Word::from_fields(&fields);
        Ok(ShellAst::Simple(cmd))
    }
}
