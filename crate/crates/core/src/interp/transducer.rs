//! Incremental node evaluators and the wrapper that closes outputs.

use std::collections::BTreeSet;

use crate::annotations::ChoiceKind;
use crate::odfm::{Arg, CommandNode, DfgNode, Helper, NodeFunction};
use crate::shell_ast::unquote;

use super::commands::{self, Invocation, LineFilter, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    /// One element on the given output.
    Line(usize, String),
    /// The given output is closed early.
    Close(usize),
}

/// Evaluates a node one input element at a time.
pub trait Transducer: Send {
    /// Consumes one element of input `input`; `None` is the close marker.
    fn feed(&mut self, input: usize, element: Option<String>, out: &mut Vec<Emission>);

    /// Called once, after every input has been closed.
    fn finish(&mut self, out: &mut Vec<Emission>);
}

/// How a split node divides its input between its outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Wait for the whole input, then cut it into equal contiguous chunks.
    #[default]
    Balanced,
    /// Send `block` elements to each output in turn, closing each output
    /// once it is full; the last output takes the rest.
    Eager { block: usize },
}

struct Relay;

impl Transducer for Relay {
    fn feed(&mut self, _input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        if let Some(l) = element {
            out.push(Emission::Line(0, l));
        }
    }

    fn finish(&mut self, _out: &mut Vec<Emission>) {}
}

struct Tee {
    outputs: usize,
}

impl Transducer for Tee {
    fn feed(&mut self, _input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        if let Some(l) = element {
            for o in 0..self.outputs {
                out.push(Emission::Line(o, l.clone()));
            }
        }
    }

    fn finish(&mut self, _out: &mut Vec<Emission>) {}
}

struct Split {
    policy: SplitPolicy,
    outputs: usize,
    buffer: Vec<String>,
    current: usize,
    filled: usize,
}

impl Transducer for Split {
    fn feed(&mut self, _input: usize, element: Option<String>, out: &mut Vec<Emission>) {
        let Some(l) = element else { return };
        match self.policy {
            SplitPolicy::Balanced => self.buffer.push(l),
            SplitPolicy::Eager { block } => {
                out.push(Emission::Line(self.current, l));
                self.filled += 1;
                if self.filled >= block.max(1) && self.current + 1 < self.outputs {
                    out.push(Emission::Close(self.current));
                    self.current += 1;
                    self.filled = 0;
                }
            }
        }
    }

    fn finish(&mut self, out: &mut Vec<Emission>) {
        let n = self.buffer.len();
        if n == 0 {
            return;
        }
        let chunk = n.div_ceil(self.outputs);
        for (i, l) in std::mem::take(&mut self.buffer).into_iter().enumerate() {
            out.push(Emission::Line(i / chunk, l));
        }
    }
}

/// Unquoted words of a command node, with input placeholders kept apart.
fn node_words(c: &CommandNode) -> Vec<Word> {
    let mut words = Vec::new();
    for a in c.argv.iter().skip(1) {
        match a {
            Arg::Lit(raw) => words.push(Word::Text(unquote(raw))),
            Arg::Input { idx, prefix } => {
                if !prefix.is_empty() {
                    words.push(Word::Text(prefix.clone()));
                }
                words.push(Word::Input(*idx));
            }
            Arg::Output(idx) => words.push(Word::Text(format!("@o{idx}"))),
        }
    }
    words
}

/// Data inputs in the order the command reads them side by side.
fn positional_inputs(c: &CommandNode, configs: &BTreeSet<usize>) -> Vec<usize> {
    let mut v = Vec::new();
    let mut stdin_placed = false;
    for a in c.argv.iter().skip(1) {
        match a {
            Arg::Input { idx, .. } if !configs.contains(idx) => v.push(*idx),
            Arg::Lit(raw) if unquote(raw) == "-" => {
                if let Some(s) = c.stdin {
                    if !stdin_placed {
                        v.push(s);
                        stdin_placed = true;
                    }
                }
            }
            _ => {}
        }
    }
    if let (Some(s), false) = (c.stdin, stdin_placed) {
        v.push(s);
    }
    v
}

/// A node evaluator together with the exec wrapper: tracks which inputs
/// and outputs are closed and closes every output once all inputs are.
pub struct NodeExec {
    inner: Box<dyn Transducer>,
    stages: Vec<Box<dyn LineFilter>>,
    stdout: Option<usize>,
    inputs_closed: Vec<bool>,
    outputs_closed: Vec<bool>,
}

/// An output change produced by one step: an element or the close marker.
pub type Output = (usize, Option<String>);

impl NodeExec {
    pub fn new(node: &DfgNode, split: SplitPolicy) -> Result<NodeExec, String> {
        let outs = node.outputs.len();
        let (inner, stages, stdout): (Box<dyn Transducer>, Vec<Box<dyn LineFilter>>, Option<usize>) =
            match &node.function {
                NodeFunction::Helper(Helper::Relay) | NodeFunction::Helper(Helper::Cat) => {
                    (Box::new(Relay), Vec::new(), None)
                }
                NodeFunction::Helper(Helper::Tee) => (Box::new(Tee { outputs: outs }), Vec::new(), None),
                NodeFunction::Helper(Helper::Split) => (
                    Box::new(Split {
                        policy: split,
                        outputs: outs,
                        buffer: Vec::new(),
                        current: 0,
                        filled: 0,
                    }),
                    Vec::new(),
                    None,
                ),
                NodeFunction::Command(c) => {
                    let words = node_words(c);
                    let configs = c.choice.configs();
                    let mut outputs: Vec<usize> = c.stdout.into_iter().collect();
                    outputs.extend(c.argv.iter().filter_map(|a| match a {
                        Arg::Output(i) => Some(*i),
                        _ => None,
                    }));
                    let name = c.name();
                    let inv = Invocation {
                        name: &name,
                        words: &words,
                        configs: &configs,
                        positional: positional_inputs(c, &configs),
                        outputs,
                    };
                    let inner = commands::build(&inv)?;
                    let stages = c
                        .then
                        .iter()
                        .map(|stage| {
                            let name = stage.first().map(|w| unquote(w)).unwrap_or_default();
                            let words: Vec<Word> =
                                stage.iter().skip(1).map(|w| Word::Text(unquote(w))).collect();
                            commands::build_filter(&name, &words)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if !stages.is_empty() && c.stdout.is_none() {
                        return Err("pipeline stages need standard output".into());
                    }
                    (inner, stages, c.stdout)
                }
            };
        Ok(NodeExec {
            inner,
            stages,
            stdout,
            inputs_closed: vec![false; node.inputs.len()],
            outputs_closed: vec![false; outs],
        })
    }

    pub fn inputs_closed(&self) -> &[bool] {
        &self.inputs_closed
    }

    /// Feeds one element (or the close marker) of input `k`.
    pub fn step(&mut self, k: usize, element: Option<String>) -> Result<Vec<Output>, String> {
        if self.inputs_closed[k] {
            return Err(format!("input {k} consumed after it was closed"));
        }
        let mut em = Vec::new();
        if element.is_none() {
            self.inputs_closed[k] = true;
        }
        self.inner.feed(k, element, &mut em);
        let all_closed = self.inputs_closed.iter().all(|&c| c);
        if all_closed {
            self.inner.finish(&mut em);
        }
        let mut out = self.route(em, all_closed)?;
        if all_closed {
            for (o, closed) in self.outputs_closed.iter_mut().enumerate() {
                if !*closed {
                    *closed = true;
                    out.push((o, None));
                }
            }
        }
        Ok(out)
    }

    /// Passes standard output through the trailing stages and records
    /// closes; at the end of input the stages are flushed in order.
    fn route(&mut self, em: Vec<Emission>, flush: bool) -> Result<Vec<Output>, String> {
        let mut out = Vec::new();
        let mut piped = Vec::new();
        for e in em {
            match e {
                Emission::Line(o, l) if Some(o) == self.stdout && !self.stages.is_empty() => {
                    piped.push(l)
                }
                Emission::Line(o, l) => {
                    if self.outputs_closed[o] {
                        return Err(format!("output {o} written after it was closed"));
                    }
                    out.push((o, Some(l)));
                }
                Emission::Close(o) => {
                    if !self.outputs_closed[o] {
                        self.outputs_closed[o] = true;
                        out.push((o, None));
                    }
                }
            }
        }
        if let Some(o) = self.stdout.filter(|_| !self.stages.is_empty()) {
            for i in 0..self.stages.len() {
                let mut next = Vec::new();
                for l in piped {
                    self.stages[i].line(l, &mut next);
                }
                if flush {
                    self.stages[i].end(&mut next);
                }
                piped = next;
            }
            out.extend(piped.into_iter().map(|l| (o, Some(l))));
        }
        Ok(out)
    }
}

/// The input indexes `choice` allows given which inputs are closed; an
/// index naming a closed input is reported as an error.
pub fn choose(choice: &ChoiceKind, closed: &[bool]) -> Result<Vec<usize>, usize> {
    let picks = choice.choose(closed);
    match picks.iter().find(|&&k| k >= closed.len() || closed[k]) {
        Some(&bad) => Err(bad),
        None => Ok(picks),
    }
}
