//! Per-command metadata: purity, how arguments map to inputs and outputs,
//! the order in which inputs are consumed, and how a command may be
//! parallelized.
//!
//! Annotations are stored as text records (see [`format`]) so users can add
//! or override commands without recompiling. Lookup resolves a concrete
//! invocation against the first matching record; anything unmatched is a
//! barrier.

mod builtin;
mod format;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use regex::Regex;
use thiserror::Error;

pub use format::{parse_entries, write_entries};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read annotation file: {0}")]
    Io(#[from] std::io::Error),
}

/// The order in which a node may read its inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChoiceKind {
    /// Inputs are read one after the other, each until it closes.
    Sequential,
    /// The listed inputs are read (in any order) before the remaining ones,
    /// which are then read sequentially.
    ConfigThenSequential(BTreeSet<usize>),
    /// Any open input may be read next.
    AnyOrder,
}

impl ChoiceKind {
    /// Builds the kind for a node whose first `configs` inputs are
    /// configuration inputs.
    pub fn sequential_after(configs: usize) -> Self {
        if configs == 0 {
            ChoiceKind::Sequential
        } else {
            ChoiceKind::ConfigThenSequential((0..configs).collect())
        }
    }

    /// Indexes that may be read next given which inputs are closed.
    pub fn choose(&self, closed: &[bool]) -> Vec<usize> {
        let first_open = |skip: &dyn Fn(usize) -> bool| {
            (0..closed.len()).find(|&i| !skip(i) && !closed[i])
        };
        match self {
            ChoiceKind::Sequential => first_open(&|_| false).into_iter().collect(),
            ChoiceKind::ConfigThenSequential(configs) => {
                let open_configs: Vec<usize> = configs
                    .iter()
                    .copied()
                    .filter(|&i| i < closed.len() && !closed[i])
                    .collect();
                if open_configs.is_empty() {
                    first_open(&|i| configs.contains(&i)).into_iter().collect()
                } else {
                    open_configs
                }
            }
            ChoiceKind::AnyOrder => (0..closed.len()).filter(|&i| !closed[i]).collect(),
        }
    }

    /// Config indexes, empty unless `ConfigThenSequential`.
    pub fn configs(&self) -> BTreeSet<usize> {
        match self {
            ChoiceKind::ConfigThenSequential(c) => c.clone(),
            _ => BTreeSet::new(),
        }
    }

    pub fn is_sequential(&self) -> bool {
        !matches!(self, ChoiceKind::AnyOrder)
    }
}

/// A shell pipeline used to build map or aggregate nodes.
///
/// In aggregate templates `$*` expands to the partial results and `$C1`,
/// `$C2`, ... to copies of the node's configuration inputs. A map template
/// reads its chunk on standard input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandTemplate {
    pub stages: Vec<Vec<String>>,
}

impl CommandTemplate {
    pub fn parse(text: &str) -> Result<Self, String> {
        let stages = crate::shell_ast::lex_words(text).map_err(|e| e.to_string())?;
        if stages.is_empty() || stages.iter().any(Vec::is_empty) {
            return Err(format!("empty command template {text:?}"));
        }
        Ok(CommandTemplate { stages })
    }

    /// Highest `$C<i>` referenced, i.e. how many config copies it needs.
    pub fn config_refs(&self) -> usize {
        self.stages
            .iter()
            .flatten()
            .filter_map(|w| w.strip_prefix("$C")?.parse::<usize>().ok())
            .max()
            .unwrap_or(0)
    }

    pub fn uses_partials(&self) -> bool {
        self.stages.iter().flatten().any(|w| w == "$*")
    }
}

impl fmt::Display for CommandTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: Vec<String> = self.stages.iter().map(|s| s.join(" ")).collect();
        f.write_str(&text.join(" | "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParallelClass {
    NotParallelizable,
    /// Map is the command itself, aggregate is concatenation.
    Stateless,
    /// `map: None` means the command itself.
    DataParallel {
        map: Option<CommandTemplate>,
        agg: CommandTemplate,
    },
}

impl ParallelClass {
    pub fn is_parallelizable(&self) -> bool {
        !matches!(self, ParallelClass::NotParallelizable)
    }
}

/// What each argument of an invocation means.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgRole {
    Flag,
    /// Literal value of an option such as `-d+` or `-n 5`.
    OptionValue,
    /// Non-file operand such as a pattern or a `tr` set.
    Literal,
    /// File read as input `idx`; `prefix` is the option text glued in front
    /// of the file name (`-fdict.txt`).
    Input { idx: usize, prefix: String },
    /// `-`, standing for standard input.
    StdinMarker,
    /// File written as output `idx`.
    Output(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSource {
    /// The file named by argument `pos` (0-based, command name excluded).
    Arg(usize),
    Stdin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSink {
    Stdout,
    Arg(usize),
}

/// An annotation resolved against one concrete invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandAnnotation {
    pub name: String,
    pub roles: Vec<ArgRole>,
    /// Config inputs first, then sequential (or any-order) inputs.
    pub inputs: Vec<InputSource>,
    pub outputs: Vec<OutputSink>,
    pub choice: ChoiceKind,
    pub class: ParallelClass,
}

impl CommandAnnotation {
    pub fn config_count(&self) -> usize {
        self.choice.configs().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoiceSpec {
    Seq,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionRole {
    Config,
    Arg,
}

#[derive(Debug, Clone)]
pub struct OperandConstraint {
    /// 1-based index among literal operands.
    pub operand: usize,
    pub pattern: Regex,
    pub negate: bool,
}

impl PartialEq for OperandConstraint {
    fn eq(&self, other: &Self) -> bool {
        self.operand == other.operand
            && self.negate == other.negate
            && self.pattern.as_str() == other.pattern.as_str()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    pub name: String,
    pub role: OptionRole,
    pub optional: bool,
}

/// Which argument shapes an annotation record accepts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlagSpec {
    pub switches: Vec<(String, bool)>,
    pub options: Vec<OptionSpec>,
    pub literals: usize,
    pub min_inputs: usize,
    pub max_inputs: Option<usize>,
    pub operand_outputs: bool,
    pub constraints: Vec<OperandConstraint>,
}

/// One record of the annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationEntry {
    pub name: String,
    pub flags: FlagSpec,
    pub pure: bool,
    pub choice: ChoiceSpec,
    pub class: ParallelClass,
}

enum Parsed {
    Switch(String),
    Option { name: String, attached: Option<String>, prefix: String },
    Operand,
    EndOfOptions,
}

impl AnnotationEntry {
    /// Resolves `args` (unquoted, command name excluded) against this
    /// record, or `None` if the invocation does not fit.
    pub fn resolve(&self, args: &[String]) -> Option<CommandAnnotation> {
        let spec = &self.flags;
        let mut roles: Vec<Option<ArgRole>> = vec![None; args.len()];
        let mut switches_seen: BTreeSet<String> = BTreeSet::new();
        let mut options_seen: BTreeSet<String> = BTreeSet::new();
        let mut operands: Vec<usize> = Vec::new();
        // (position, prefix, is stdin)
        let mut configs: Vec<(usize, String)> = Vec::new();
        let mut options_done = false;
        let mut i = 0;
        while i < args.len() {
            let parsed = if options_done {
                vec![Parsed::Operand]
            } else {
                self.split_arg(&args[i])?
            };
            roles[i] = Some(ArgRole::Flag);
            for p in parsed {
                match p {
                    Parsed::EndOfOptions => options_done = true,
                    Parsed::Switch(s) => {
                        if !switches_seen.insert(s) {
                            return None;
                        }
                    }
                    Parsed::Operand => {
                        operands.push(i);
                        roles[i] = None;
                    }
                    Parsed::Option {
                        name,
                        attached,
                        prefix,
                    } => {
                        let opt = spec.options.iter().find(|o| o.name == name)?;
                        if !options_seen.insert(name) {
                            return None;
                        }
                        let (pos, prefix) = match attached {
                            Some(_) => (i, prefix),
                            None => {
                                i += 1;
                                if i >= args.len() {
                                    return None;
                                }
                                (i, String::new())
                            }
                        };
                        match opt.role {
                            OptionRole::Arg => {
                                if prefix.is_empty() {
                                    roles[pos] = Some(ArgRole::OptionValue);
                                }
                            }
                            OptionRole::Config => configs.push((pos, prefix)),
                        }
                    }
                }
            }
            i += 1;
        }
        for (name, optional) in &spec.switches {
            if !optional && !switches_seen.contains(name) {
                return None;
            }
        }
        if switches_seen
            .iter()
            .any(|s| !spec.switches.iter().any(|(n, _)| n == s))
        {
            return None;
        }
        for o in &spec.options {
            if !o.optional && !options_seen.contains(&o.name) {
                return None;
            }
        }
        if operands.len() < spec.literals {
            return None;
        }
        let files = &operands[spec.literals..];
        if files.len() < spec.min_inputs || spec.max_inputs.is_some_and(|m| files.len() > m) {
            return None;
        }
        for c in &spec.constraints {
            let pos = *operands.get(c.operand.checked_sub(1)?)?;
            if c.operand > spec.literals || c.pattern.is_match(&args[pos]) == c.negate {
                return None;
            }
        }
        for &pos in &operands[..spec.literals] {
            roles[pos] = Some(ArgRole::Literal);
        }

        let mut inputs = Vec::new();
        let mut stdin_used = false;
        for (pos, prefix) in &configs {
            if prefix.is_empty() && args[*pos] == "-" {
                if stdin_used {
                    return None;
                }
                stdin_used = true;
                roles[*pos] = Some(ArgRole::StdinMarker);
                inputs.push(InputSource::Stdin);
            } else {
                roles[*pos] = Some(ArgRole::Input {
                    idx: inputs.len(),
                    prefix: prefix.clone(),
                });
                inputs.push(InputSource::Arg(*pos));
            }
        }
        let config_count = inputs.len();
        let mut outputs = vec![OutputSink::Stdout];
        if spec.operand_outputs {
            for &pos in files {
                roles[pos] = Some(ArgRole::Output(outputs.len()));
                outputs.push(OutputSink::Arg(pos));
            }
            if stdin_used {
                return None;
            }
            inputs.push(InputSource::Stdin);
        } else {
            for &pos in files {
                if args[pos] == "-" {
                    if stdin_used {
                        return None;
                    }
                    stdin_used = true;
                    roles[pos] = Some(ArgRole::StdinMarker);
                    inputs.push(InputSource::Stdin);
                } else {
                    roles[pos] = Some(ArgRole::Input {
                        idx: inputs.len(),
                        prefix: String::new(),
                    });
                    inputs.push(InputSource::Arg(pos));
                }
            }
            if files.is_empty() {
                if stdin_used {
                    return None;
                }
                inputs.push(InputSource::Stdin);
            }
        }
        let choice = match self.choice {
            ChoiceSpec::Seq => ChoiceKind::sequential_after(config_count),
            ChoiceSpec::Any => ChoiceKind::AnyOrder,
        };
        Some(CommandAnnotation {
            name: self.name.clone(),
            roles: roles.into_iter().map(|r| r.unwrap_or(ArgRole::Flag)).collect(),
            inputs,
            outputs,
            choice,
            class: self.class.clone(),
        })
    }

    /// Splits one argument into switches/options according to this record.
    fn split_arg(&self, arg: &str) -> Option<Vec<Parsed>> {
        if arg == "--" {
            return Some(vec![Parsed::EndOfOptions]);
        }
        if arg == "-" || !arg.starts_with('-') {
            return Some(vec![Parsed::Operand]);
        }
        if arg.starts_with("--") {
            if self.flags.options.iter().any(|o| o.name == arg) {
                return Some(vec![Parsed::Option {
                    name: arg.to_string(),
                    attached: None,
                    prefix: String::new(),
                }]);
            }
            return Some(vec![Parsed::Switch(arg.to_string())]);
        }
        let mut out = Vec::new();
        for (off, c) in arg.char_indices().skip(1) {
            let name = format!("-{c}");
            if self.flags.options.iter().any(|o| o.name == name) {
                let rest = &arg[off + c.len_utf8()..];
                out.push(Parsed::Option {
                    name,
                    attached: (!rest.is_empty()).then(|| rest.to_string()),
                    prefix: arg[..off + c.len_utf8()].to_string(),
                });
                return Some(out);
            }
            out.push(Parsed::Switch(name));
        }
        Some(out)
    }
}

/// The set of known commands; user records shadow built-in ones.
#[derive(Debug, Clone)]
pub struct Registry {
    entries: Vec<AnnotationEntry>,
}

impl Registry {
    /// Registry holding only the shipped annotations.
    pub fn builtin() -> Self {
        let entries = parse_entries(builtin::BUILTIN).expect("built-in annotations parse");
        Registry { entries }
    }

    /// Built-ins plus the records in `text`, which take precedence.
    pub fn with_user_entries(text: &str) -> Result<Self, FormatError> {
        let mut entries = parse_entries(text)?;
        entries.extend(Registry::builtin().entries);
        Ok(Registry { entries })
    }

    pub fn entries(&self) -> &[AnnotationEntry] {
        &self.entries
    }

    /// Resolves an invocation; `None` means the command is a barrier.
    pub fn lookup(&self, name: &str, args: &[String]) -> Option<CommandAnnotation> {
        for e in self.entries.iter().filter(|e| e.name == name) {
            if let Some(resolved) = e.resolve(args) {
                return e.pure.then_some(resolved);
            }
        }
        None
    }

    /// Convenience wrapper over [`Registry::lookup`] for string slices.
    pub fn lookup_words(&self, words: &[&str]) -> Option<CommandAnnotation> {
        let (name, args) = words.split_first()?;
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        self.lookup(name, &args)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}

/// Loads user annotations from `path` on top of the built-ins.
pub fn load_registry(path: &Path) -> Result<Registry, FormatError> {
    let text = std::fs::read_to_string(path)?;
    Registry::with_user_entries(&text)
}
