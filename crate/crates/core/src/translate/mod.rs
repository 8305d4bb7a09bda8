//! Translation between shell syntax and dataflow programs.
//!
//! The frontend turns the dataflow regions of a script (pipelines of pure,
//! annotated commands, optionally joined by background composition) into
//! [`DfgProgram`]s and leaves everything else as shell text. The backend
//! ([`emit`]) lays a program out as a script of named pipes and background
//! processes.

mod compile;
mod emit;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annotations::{ArgRole, InputSource, OutputSink, Registry};
use crate::odfm::{validate, Arg, Binding, CommandNode, DfgNode, DfgProgram, EdgeId, NodeFunction, NodeMetadata};
use crate::shell_ast::{RedirDirection, ShellAst, SimpleCommand};

pub use compile::{compile, compile_script, CompileMode, CompileOptions, Compiled, FragmentReport};
pub use emit::{emit, shell_quote, EmitError, EmitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentMode {
    Foreground,
    Background,
}

/// The translation of one piece of a script.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledFragment {
    Dfg {
        program: DfgProgram,
        mode: FragmentMode,
        /// The shell text the program was translated from.
        source: ShellAst,
    },
    Opaque(ShellAst),
}

/// A script whose dataflow regions have been translated. Operators that
/// act as barriers stay in the tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Translated {
    Fragment(CompiledFragment),
    Seq(Box<Translated>, Box<Translated>),
    /// Left operand kept verbatim: its exit status steers the right one.
    And(ShellAst, Box<Translated>),
    Or(ShellAst, Box<Translated>),
    Subshell(Box<Translated>),
    Background(Box<Translated>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("barrier: {0}")]
    Barrier(String),
    #[error("the program has no standard output")]
    NoStdout,
    #[error("the program does not read standard input")]
    NoStdin,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("file {0} is shared between the programs")]
    SharedFile(String),
    #[error("pipe {0} is written by both programs")]
    SharedPipe(String),
    #[error("composition is not a valid program: {0}")]
    Invalid(String),
}

fn barrier(msg: impl Into<String>) -> TranslateError {
    TranslateError::Barrier(msg.into())
}

/// Translates one simple command into a single-node program whose
/// interface edges are bound to files, standard streams and pipes.
pub fn cmd_to_node(cmd: &SimpleCommand, registry: &Registry) -> Result<DfgProgram, TranslateError> {
    let raw = cmd.word.fields();
    let words = cmd.word.unquoted_fields();
    let Some((name, args)) = words.split_first() else {
        return Err(barrier("no command word"));
    };
    let ann = registry
        .lookup(name, args)
        .ok_or_else(|| barrier(format!("`{name}` is not annotated as pure for these arguments")))?;

    let mut stdin_file = None;
    let mut stdout_file = None;
    let mut redirs = Vec::new();
    let reads_stdin = ann.inputs.contains(&InputSource::Stdin);
    let writes_stdout = ann.outputs.contains(&OutputSink::Stdout);
    for r in &cmd.redirs {
        match (r.fd, r.direction) {
            (0, RedirDirection::Input) if reads_stdin => {
                if stdin_file.replace(r.unquoted_target()).is_some() {
                    return Err(barrier("several input redirections"));
                }
            }
            (1, RedirDirection::Output | RedirDirection::Append) if writes_stdout => {
                let b = match r.direction {
                    RedirDirection::Append => Binding::AppendFile(r.unquoted_target()),
                    _ => Binding::File(r.unquoted_target()),
                };
                if stdout_file.replace(b).is_some() {
                    return Err(barrier("several output redirections"));
                }
            }
            _ => redirs.push(r.clone()),
        }
    }

    let mut p = DfgProgram::new();
    let inputs: Vec<EdgeId> = (1..=ann.inputs.len() as u32).map(EdgeId).collect();
    let outputs: Vec<EdgeId> = (0..ann.outputs.len() as u32)
        .map(|i| EdgeId(inputs.len() as u32 + 1 + i))
        .collect();
    let file_of = |pos: usize| -> String {
        match &ann.roles[pos] {
            ArgRole::Input { prefix, .. } => args[pos][prefix.len()..].to_string(),
            _ => args[pos].clone(),
        }
    };
    let append = name == "tee" && args.iter().any(|a| a == "-a");
    for (e, src) in inputs.iter().zip(&ann.inputs) {
        let b = match src {
            InputSource::Arg(pos) => Binding::File(file_of(*pos)),
            InputSource::Stdin => stdin_file.clone().map_or(Binding::Stdin, Binding::File),
        };
        p.bindings.insert(*e, b);
    }
    for (e, sink) in outputs.iter().zip(&ann.outputs) {
        let b = match sink {
            OutputSink::Arg(pos) if append => Binding::AppendFile(file_of(*pos)),
            OutputSink::Arg(pos) => Binding::File(file_of(*pos)),
            OutputSink::Stdout => stdout_file.clone().unwrap_or(Binding::Stdout),
        };
        p.bindings.insert(*e, b);
    }
    let read: BTreeSet<&str> = inputs.iter().filter_map(|e| file_name(&p.bindings[e])).collect();
    if let Some(f) = outputs.iter().filter_map(|e| file_name(&p.bindings[e])).find(|f| read.contains(f)) {
        return Err(barrier(format!("`{f}` is both read and written")));
    }

    let mut argv = vec![Arg::Lit(raw[0].to_string())];
    for (pos, role) in ann.roles.iter().enumerate() {
        argv.push(match role {
            ArgRole::Input { idx, prefix } => Arg::Input {
                idx: *idx,
                prefix: prefix.clone(),
            },
            ArgRole::Output(idx) => Arg::Output(*idx),
            _ => Arg::Lit(raw[pos + 1].to_string()),
        });
    }
    let node = CommandNode {
        argv,
        stdin: ann.inputs.iter().position(|s| *s == InputSource::Stdin),
        stdout: ann.outputs.iter().position(|s| *s == OutputSink::Stdout),
        then: Vec::new(),
        metadata: NodeMetadata {
            assignments: cmd.assignments.iter().map(|(n, v)| (n.clone(), v.to_string())).collect(),
            redirs,
        },
        choice: ann.choice,
        class: ann.class,
    };
    p.inputs = inputs.clone();
    p.outputs = outputs.clone();
    p.nodes.insert(
        crate::odfm::NodeId(1),
        DfgNode {
            inputs,
            outputs,
            function: NodeFunction::Command(node),
        },
    );
    validate(&p).map_err(|v| barrier(format!("{v:?}")))?;
    Ok(p)
}

fn file_name(b: &Binding) -> Option<&str> {
    match b {
        Binding::File(f) | Binding::AppendFile(f) => Some(f),
        _ => None,
    }
}

/// Rebinds the program's standard output to pipe `name`.
pub fn connectpipe(p: &DfgProgram, name: &str) -> Result<DfgProgram, TranslateError> {
    let e = p
        .outputs
        .iter()
        .find(|e| p.bindings.get(e) == Some(&Binding::Stdout))
        .ok_or(TranslateError::NoStdout)?;
    let mut q = p.clone();
    q.bindings.insert(*e, Binding::Pipe(name.to_string()));
    Ok(q)
}

/// Rebinds the program's standard input to pipe `name`.
fn read_pipe(p: &DfgProgram, name: &str) -> Result<DfgProgram, TranslateError> {
    let e = p
        .inputs
        .iter()
        .find(|e| p.bindings.get(e) == Some(&Binding::Stdin))
        .ok_or(TranslateError::NoStdin)?;
    let mut q = p.clone();
    q.bindings.insert(*e, Binding::Pipe(name.to_string()));
    Ok(q)
}

/// Runs both programs side by side, splicing outputs of one into inputs of
/// the other wherever they are bound to the same pipe.
pub fn compose(p1: &DfgProgram, p2: &DfgProgram) -> Result<DfgProgram, ComposeError> {
    let files = |p: &DfgProgram, edges: &[EdgeId]| -> BTreeSet<String> {
        edges.iter().filter_map(|e| p.bindings.get(e).and_then(file_name)).map(str::to_string).collect()
    };
    let (w1, w2) = (files(p1, &p1.outputs), files(p2, &p2.outputs));
    let (r1, r2) = (files(p1, &p1.inputs), files(p2, &p2.inputs));
    if let Some(f) = w1.iter().find(|f| w2.contains(*f) || r2.contains(*f)).or_else(|| w2.iter().find(|f| r1.contains(*f))) {
        return Err(ComposeError::SharedFile(f.clone()));
    }
    let pipes = |p: &DfgProgram, edges: &[EdgeId]| -> BTreeMap<String, EdgeId> {
        edges
            .iter()
            .filter_map(|e| match p.bindings.get(e) {
                Some(Binding::Pipe(n)) => Some((n.clone(), *e)),
                _ => None,
            })
            .collect()
    };
    let (o1, o2) = (pipes(p1, &p1.outputs), pipes(p2, &p2.outputs));
    if let Some(n) = o1.keys().find(|n| o2.contains_key(*n)) {
        return Err(ComposeError::SharedPipe(n.clone()));
    }

    // rename p2 apart from p1
    let offset = p1.edges().iter().next_back().map_or(0, |e| e.0);
    let shift = |e: EdgeId| EdgeId(e.0 + offset);
    let mut q2 = DfgProgram {
        inputs: p2.inputs.iter().map(|e| shift(*e)).collect(),
        outputs: p2.outputs.iter().map(|e| shift(*e)).collect(),
        nodes: BTreeMap::new(),
        bindings: p2.bindings.iter().map(|(e, b)| (shift(*e), b.clone())).collect(),
    };
    for n in p2.nodes.values() {
        let mut n = n.clone();
        n.inputs.iter_mut().chain(n.outputs.iter_mut()).for_each(|e| *e = shift(*e));
        q2.add_node(n);
    }
    let (i1, i2) = (pipes(p1, &p1.inputs), pipes(&q2, &q2.inputs));
    let o2 = pipes(&q2, &q2.outputs);

    // input edge -> output edge it is spliced to
    let mut splice: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    for (name, o) in &o1 {
        if let Some(i) = i2.get(name) {
            splice.insert(*i, *o);
        }
    }
    for (name, o) in &o2 {
        if let Some(i) = i1.get(name) {
            splice.insert(*i, *o);
        }
    }
    let spliced_outputs: BTreeSet<EdgeId> = splice.values().copied().collect();

    let mut q = DfgProgram::new();
    for p in [p1, &q2] {
        q.inputs.extend(p.inputs.iter().filter(|e| !splice.contains_key(e)));
        q.outputs.extend(p.outputs.iter().filter(|e| !spliced_outputs.contains(e)));
        for (e, b) in &p.bindings {
            if !splice.contains_key(e) && !spliced_outputs.contains(e) {
                q.bindings.insert(*e, b.clone());
            }
        }
        for n in p.nodes.values() {
            let mut n = n.clone();
            for e in &mut n.inputs {
                if let Some(o) = splice.get(e) {
                    *e = *o;
                }
            }
            q.add_node(n);
        }
    }
    validate(&q).map_err(|v| {
        ComposeError::Invalid(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
    })?;
    Ok(q)
}

/// Translates a pipeline `c1 | ... | cn` by connecting each stage's
/// standard output to the next stage's standard input.
pub fn pipeline_to_dfg(commands: &[SimpleCommand], registry: &Registry) -> Result<DfgProgram, TranslateError> {
    let mut acc: Option<DfgProgram> = None;
    for (i, c) in commands.iter().enumerate() {
        let mut p = cmd_to_node(c, registry)?;
        if i + 1 < commands.len() {
            p = connectpipe(&p, &format!("{}", i + 1))?;
        }
        acc = Some(match acc {
            None => p,
            Some(prev) => {
                let p = read_pipe(&p, &format!("{i}"))?;
                compose(&prev, &p).map_err(|e| barrier(e.to_string()))?
            }
        });
    }
    let p = acc.ok_or_else(|| barrier("empty pipeline"))?;
    if p.bindings.values().any(|b| matches!(b, Binding::Pipe(_))) {
        return Err(barrier("a pipe is left unconnected"));
    }
    Ok(p)
}

fn simple_commands(ast: &ShellAst) -> Option<(Vec<SimpleCommand>, FragmentMode)> {
    match ast {
        ShellAst::Simple(c) => Some((vec![c.clone()], FragmentMode::Foreground)),
        ShellAst::Pipeline { commands, background } => {
            let cmds = commands
                .iter()
                .map(|c| match c {
                    ShellAst::Simple(s) => Some(s.clone()),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?;
            let mode = if *background {
                FragmentMode::Background
            } else {
                FragmentMode::Foreground
            };
            Some((cmds, mode))
        }
        ShellAst::Background(inner) => match inner.as_ref() {
            ShellAst::Simple(c) => Some((vec![c.clone()], FragmentMode::Background)),
            _ => None,
        },
        _ => None,
    }
}

fn fragment(ast: &ShellAst, registry: &Registry) -> Option<Translated> {
    let (cmds, mode) = simple_commands(ast)?;
    let program = pipeline_to_dfg(&cmds, registry).ok()?;
    Some(Translated::Fragment(CompiledFragment::Dfg {
        program,
        mode,
        source: ast.clone(),
    }))
}

fn opaque(ast: &ShellAst) -> Translated {
    Translated::Fragment(CompiledFragment::Opaque(ast.clone()))
}

/// A background job reads from `/dev/null` unless redirected.
fn detach_stdin(p: &DfgProgram) -> DfgProgram {
    let mut q = p.clone();
    for b in q.bindings.values_mut() {
        if *b == Binding::Stdin {
            *b = Binding::File("/dev/null".into());
        }
    }
    q
}

/// Composes a background fragment with the fragment that follows it.
fn compose_background(left: &Translated, right: &Translated) -> Option<Translated> {
    let (
        Translated::Fragment(CompiledFragment::Dfg {
            program: p1,
            mode: FragmentMode::Background,
            source: s1,
        }),
        Translated::Fragment(CompiledFragment::Dfg {
            program: p2,
            mode,
            source: s2,
        }),
    ) = (left, right)
    else {
        return None;
    };
    let program = compose(&detach_stdin(p1), p2).ok()?;
    Some(Translated::Fragment(CompiledFragment::Dfg {
        program,
        mode: *mode,
        source: ShellAst::seq(s1.clone(), s2.clone()),
    }))
}

/// Identifies dataflow regions bottom-up and translates them. Sequencing
/// and the boolean operators are barriers, except that a background
/// fragment is composed with the fragment that follows it.
pub fn translate(ast: &ShellAst, registry: &Registry) -> Translated {
    if let Some(t) = fragment(ast, registry) {
        return t;
    }
    match ast {
        ShellAst::Seq(a, b) => {
            let (l, r) = (translate(a, registry), translate(b, registry));
            if let Some(t) = compose_background(&l, &r) {
                return t;
            }
            if let Translated::Seq(r1, rest) = &r {
                if let Some(t) = compose_background(&l, r1) {
                    return Translated::Seq(Box::new(t), rest.clone());
                }
            }
            if let Translated::Seq(before, l2) = &l {
                if let Some(t) = compose_background(l2, &r) {
                    return Translated::Seq(before.clone(), Box::new(t));
                }
            }
            Translated::Seq(Box::new(l), Box::new(r))
        }
        ShellAst::And(a, b) => Translated::And(a.as_ref().clone(), Box::new(translate(b, registry))),
        ShellAst::Or(a, b) => Translated::Or(a.as_ref().clone(), Box::new(translate(b, registry))),
        ShellAst::Subshell(a) => Translated::Subshell(Box::new(translate(a, registry))),
        ShellAst::Background(a) => Translated::Background(Box::new(translate(a, registry))),
        _ => opaque(ast),
    }
}

impl Translated {
    /// Dataflow fragments in script order.
    pub fn programs(&self) -> Vec<(&DfgProgram, FragmentMode)> {
        let mut v = Vec::new();
        self.collect(&mut v);
        v
    }

    fn collect<'a>(&'a self, v: &mut Vec<(&'a DfgProgram, FragmentMode)>) {
        match self {
            Translated::Fragment(CompiledFragment::Dfg { program, mode, .. }) => v.push((program, *mode)),
            Translated::Fragment(CompiledFragment::Opaque(_)) => {}
            Translated::Seq(a, b) => {
                a.collect(v);
                b.collect(v);
            }
            Translated::And(_, b) | Translated::Or(_, b) => b.collect(v),
            Translated::Subshell(a) | Translated::Background(a) => a.collect(v),
        }
    }

    /// Rebuilds a shell tree, replacing each dataflow fragment by what
    /// `lower` returns for it.
    pub fn lower(&self, lower: &mut dyn FnMut(&DfgProgram, FragmentMode, &ShellAst) -> ShellAst) -> ShellAst {
        match self {
            Translated::Fragment(CompiledFragment::Dfg { program, mode, source }) => lower(program, *mode, source),
            Translated::Fragment(CompiledFragment::Opaque(a)) => a.clone(),
            Translated::Seq(a, b) => ShellAst::seq(a.lower(lower), b.lower(lower)),
            Translated::And(a, b) => ShellAst::and(a.clone(), b.lower(lower)),
            Translated::Or(a, b) => ShellAst::or(a.clone(), b.lower(lower)),
            Translated::Subshell(a) => ShellAst::Subshell(Box::new(a.lower(lower))),
            Translated::Background(a) => ShellAst::background(a.lower(lower)),
        }
    }
}

#[cfg(test)]
mod tests;
