//! Syntax tree for the supported shell subset.
//!
//! The tree covers pipelines, background jobs, sequencing, `&&`/`||`, `!`,
//! subshells and simple commands with a small redirection grammar. Anything
//! else (loops, conditionals, `case`, function definitions, expansions) is
//! kept as an [`Opaque`] node holding its source text verbatim so the
//! compiler can pass it through untouched.

mod lexer;
mod parser;
mod print;

pub use parser::{parse, parse_script};
pub use print::print;

pub(crate) use lexer::lex_words;
pub use lexer::unquote;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl SyntaxError {
    pub(crate) fn new(offset: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordPart {
    /// Raw source text of one shell word, quotes included.
    Literal(String),
    Space,
}

/// A sequence of shell words separated by whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Word {
    pub parts: Vec<WordPart>,
}

impl Word {
    pub fn from_fields<S: AsRef<str>>(fields: &[S]) -> Self {
        let mut parts = Vec::with_capacity(fields.len() * 2);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                parts.push(WordPart::Space);
            }
            parts.push(WordPart::Literal(f.as_ref().to_string()));
        }
        Word { parts }
    }

    /// Raw fields, quotes preserved.
    pub fn fields(&self) -> Vec<&str> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                WordPart::Literal(s) => Some(s.as_str()),
                WordPart::Space => None,
            })
            .collect()
    }

    /// Fields with shell quoting removed.
    pub fn unquoted_fields(&self) -> Vec<String> {
        self.fields().into_iter().map(unquote).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.fields().is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.parts {
            match p {
                WordPart::Literal(s) => f.write_str(s)?,
                WordPart::Space => f.write_str(" ")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RedirDirection {
    Input,
    Output,
    Append,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Redir {
    pub fd: u32,
    pub direction: RedirDirection,
    /// Raw target word, quotes preserved.
    pub target: String,
}

impl Redir {
    pub fn new(fd: u32, direction: RedirDirection, target: impl Into<String>) -> Self {
        Redir {
            fd,
            direction,
            target: target.into(),
        }
    }

    pub fn default_fd(direction: RedirDirection) -> u32 {
        match direction {
            RedirDirection::Input => 0,
            RedirDirection::Output | RedirDirection::Append => 1,
        }
    }

    pub fn unquoted_target(&self) -> String {
        unquote(&self.target)
    }
}

impl fmt::Display for Redir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fd != Redir::default_fd(self.direction) {
            write!(f, "{}", self.fd)?;
        }
        let op = match self.direction {
            RedirDirection::Input => "<",
            RedirDirection::Output => ">",
            RedirDirection::Append => ">>",
        };
        write!(f, "{op} {}", self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimpleCommand {
    /// `NAME=value` prefixes; the value is the raw word.
    pub assignments: Vec<(String, Word)>,
    /// Command name followed by its arguments.
    pub word: Word,
    pub redirs: Vec<Redir>,
}

impl SimpleCommand {
    pub fn new<S: AsRef<str>>(fields: &[S]) -> Self {
        SimpleCommand {
            assignments: Vec::new(),
            word: Word::from_fields(fields),
            redirs: Vec::new(),
        }
    }

    pub fn with_redir(mut self, redir: Redir) -> Self {
        self.redirs.push(redir);
        self
    }

    pub fn name(&self) -> Option<String> {
        self.word.fields().first().map(|s| unquote(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpaqueKind {
    While,
    Until,
    For,
    If,
    Case,
    FunctionDef,
    BraceGroup,
    /// A simple command whose words need expansion (variables, globs,
    /// command substitution) or that uses unsupported redirections.
    Command,
    /// A subshell with redirections attached.
    Subshell,
}

/// Source text of a construct the compiler never looks inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opaque {
    pub kind: OpaqueKind,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShellAst {
    Simple(SimpleCommand),
    Pipeline {
        commands: Vec<ShellAst>,
        background: bool,
    },
    Background(Box<ShellAst>),
    Subshell(Box<ShellAst>),
    Seq(Box<ShellAst>, Box<ShellAst>),
    And(Box<ShellAst>, Box<ShellAst>),
    Or(Box<ShellAst>, Box<ShellAst>),
    Not(Box<ShellAst>),
    Opaque(Opaque),
}

impl ShellAst {
    pub fn simple<S: AsRef<str>>(fields: &[S]) -> Self {
        ShellAst::Simple(SimpleCommand::new(fields))
    }

    pub fn pipeline(commands: Vec<ShellAst>) -> Self {
        ShellAst::Pipeline {
            commands,
            background: false,
        }
    }

    pub fn seq(a: ShellAst, b: ShellAst) -> Self {
        ShellAst::Seq(Box::new(a), Box::new(b))
    }

    pub fn and(a: ShellAst, b: ShellAst) -> Self {
        ShellAst::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: ShellAst, b: ShellAst) -> Self {
        ShellAst::Or(Box::new(a), Box::new(b))
    }

    pub fn background(inner: ShellAst) -> Self {
        match inner {
            ShellAst::Pipeline {
                commands,
                background: false,
            } => ShellAst::Pipeline {
                commands,
                background: true,
            },
            other => ShellAst::Background(Box::new(other)),
        }
    }

    pub fn opaque(kind: OpaqueKind, source: impl Into<String>) -> Self {
        ShellAst::Opaque(Opaque {
            kind,
            source: source.into(),
        })
    }

    /// True for nodes that print with a trailing `&`.
    pub fn is_backgrounded(&self) -> bool {
        matches!(
            self,
            ShellAst::Background(_)
                | ShellAst::Pipeline {
                    background: true,
                    ..
                }
        )
    }

    /// True when the tree contains no simple command the compiler could
    /// translate, i.e. it consists solely of opaque nodes and operators.
    pub fn is_all_opaque(&self) -> bool {
        match self {
            ShellAst::Simple(_) => false,
            ShellAst::Opaque(_) => true,
            ShellAst::Pipeline { commands, .. } => commands.iter().all(ShellAst::is_all_opaque),
            ShellAst::Background(a) | ShellAst::Subshell(a) | ShellAst::Not(a) => a.is_all_opaque(),
            ShellAst::Seq(a, b) | ShellAst::And(a, b) | ShellAst::Or(a, b) => {
                a.is_all_opaque() && b.is_all_opaque()
            }
        }
    }
}

impl fmt::Display for ShellAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
