//! Reference interpreter for dataflow programs.
//!
//! Execution state maps every edge to the stream produced on it and to the
//! prefix already consumed. A step picks a node and one of the inputs its
//! choice function allows, consumes one element (or the close marker) and
//! appends whatever the node emits. Elements are text lines.

mod commands;
mod regex_compat;
mod scheduler;
mod transducer;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::odfm::{validate, Binding, DfgProgram, EdgeId, NodeId, Violation};

pub use scheduler::{Fifo, Lifo, Random, RoundRobin, Scheduler};
pub use transducer::{Emission, NodeExec, SplitPolicy, Transducer};

/// A finite stream of lines, possibly closed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StreamValue {
    pub elements: Vec<String>,
    pub closed: bool,
}

impl StreamValue {
    pub fn open(elements: Vec<String>) -> Self {
        StreamValue {
            elements,
            closed: false,
        }
    }

    pub fn closed(elements: Vec<String>) -> Self {
        StreamValue {
            elements,
            closed: true,
        }
    }

    /// Lines of `text`; a missing final newline is implied.
    pub fn from_text(text: &str) -> Self {
        StreamValue::closed(text.lines().map(str::to_string).collect())
    }

    /// The elements joined as newline-terminated lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.elements {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    /// Prefix order: a closed stream is only a prefix of itself.
    pub fn is_prefix_of(&self, other: &StreamValue) -> bool {
        if self.closed {
            return self == other;
        }
        other.elements.len() >= self.elements.len()
            && other.elements[..self.elements.len()] == self.elements[..]
    }
}

/// How much of an edge has been consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cursor {
    pub consumed: usize,
    pub closed: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("invalid program: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidProgram(Vec<Violation>),
    #[error("no value given for input edge {0}")]
    MissingInput(EdgeId),
    #[error("edge {0} is not an input of the program")]
    ExtraInput(EdgeId),
    #[error("input edge {0} is not closed")]
    OpenInput(EdgeId),
    #[error("node {node} cannot be interpreted: {message}")]
    Unsupported { node: NodeId, message: String },
    #[error("node {node} chose input {index}, which is closed")]
    ChoiceViolation { node: NodeId, index: usize },
    #[error("node {node} misbehaved: {message}")]
    Transducer { node: NodeId, message: String },
    #[error("no file contents given for {0}")]
    MissingFile(String),
    #[error("execution did not finish within {0} steps")]
    StepBudgetExceeded(usize),
    #[error("completion check failed at node {node}: expected {expected:?}, found {found:?}")]
    Completion {
        node: NodeId,
        expected: Vec<StreamValue>,
        found: Vec<StreamValue>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub split: SplitPolicy,
    /// Maximum number of steps; derived from the input size when unset.
    pub step_budget: Option<usize>,
    /// Re-check the completion constraint of the stepped node after every
    /// step (slow; for tests).
    pub check_each_step: bool,
    /// Record a line per step in [`ExecState::trace`].
    pub trace: bool,
}

/// Produced and consumed data for every edge, plus per-node evaluators.
pub struct ExecState {
    pub gamma: BTreeMap<EdgeId, StreamValue>,
    pub sigma: BTreeMap<EdgeId, Cursor>,
    pub steps: usize,
    pub trace: Vec<String>,
    execs: BTreeMap<NodeId, NodeExec>,
    options: RunOptions,
}

/// The element or close marker consumed by one step, and what it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEvent {
    pub node: NodeId,
    pub edge: EdgeId,
    pub element: Option<String>,
    pub emitted: Vec<(EdgeId, Option<String>)>,
}

impl StepEvent {
    fn describe(&self) -> String {
        let show = |e: &Option<String>| match e {
            Some(l) => format!("{l:?}"),
            None => "⊥".to_string(),
        };
        let mut s = format!("{} {} {}", self.node, self.edge, show(&self.element));
        if !self.emitted.is_empty() {
            s.push_str(" ->");
            for (e, v) in &self.emitted {
                let _ = write!(s, " {e}:{}", show(v));
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Progress(StepEvent),
    Done,
}

impl ExecState {
    /// Starts execution with the given (closed) input streams.
    pub fn init(
        p: &DfgProgram,
        inputs: BTreeMap<EdgeId, StreamValue>,
        options: RunOptions,
    ) -> Result<ExecState, InterpError> {
        validate(p).map_err(InterpError::InvalidProgram)?;
        for e in inputs.keys() {
            if !p.inputs.contains(e) {
                return Err(InterpError::ExtraInput(*e));
            }
        }
        let mut gamma = BTreeMap::new();
        for e in &p.inputs {
            let v = inputs.get(e).ok_or(InterpError::MissingInput(*e))?;
            if !v.closed {
                return Err(InterpError::OpenInput(*e));
            }
            gamma.insert(*e, v.clone());
        }
        for e in p.edges() {
            gamma.entry(e).or_default();
        }
        let sigma = p.edges().into_iter().map(|e| (e, Cursor::default())).collect();
        let mut execs = BTreeMap::new();
        for (id, n) in &p.nodes {
            let ex = NodeExec::new(n, options.split)
                .map_err(|message| InterpError::Unsupported { node: *id, message })?;
            execs.insert(*id, ex);
        }
        Ok(ExecState {
            gamma,
            sigma,
            steps: 0,
            trace: Vec::new(),
            execs,
            options,
        })
    }

    /// The consumed prefix of `edge` as a stream value.
    pub fn consumed(&self, edge: EdgeId) -> StreamValue {
        let c = self.sigma.get(&edge).copied().unwrap_or_default();
        let produced = &self.gamma[&edge];
        StreamValue {
            elements: produced.elements[..c.consumed].to_vec(),
            closed: c.closed,
        }
    }

    fn has_pending(&self, edge: EdgeId) -> bool {
        let c = self.sigma[&edge];
        let g = &self.gamma[&edge];
        c.consumed < g.elements.len() || (g.closed && !c.closed)
    }

    /// Every `(node, input index)` pair that may step now.
    pub fn enabled(&self, p: &DfgProgram) -> Result<Vec<(NodeId, usize)>, InterpError> {
        let mut v = Vec::new();
        for (id, n) in &p.nodes {
            let closed = self.execs[id].inputs_closed();
            if closed.iter().all(|&c| c) {
                continue;
            }
            let picks = transducer::choose(&n.choice(), closed)
                .map_err(|index| InterpError::ChoiceViolation { node: *id, index })?;
            for k in picks {
                if self.has_pending(n.inputs[k]) {
                    v.push((*id, k));
                }
            }
        }
        Ok(v)
    }

    /// Performs one step chosen by `scheduler`.
    pub fn step(&mut self, p: &DfgProgram, scheduler: &mut dyn Scheduler) -> Result<StepOutcome, InterpError> {
        let enabled = self.enabled(p)?;
        if enabled.is_empty() {
            return Ok(StepOutcome::Done);
        }
        let (id, k) = enabled[scheduler.pick(&enabled)];
        let node = &p.nodes[&id];
        let edge = node.inputs[k];
        let cursor = self.sigma.get_mut(&edge).expect("edge known");
        let produced = &self.gamma[&edge];
        let element = if cursor.consumed < produced.elements.len() {
            cursor.consumed += 1;
            Some(produced.elements[cursor.consumed - 1].clone())
        } else {
            cursor.closed = true;
            None
        };
        let out = self
            .execs
            .get_mut(&id)
            .expect("node known")
            .step(k, element.clone())
            .map_err(|message| InterpError::Transducer { node: id, message })?;
        let mut emitted = Vec::with_capacity(out.len());
        for (o, v) in out {
            let target = node.outputs[o];
            let stream = self.gamma.get_mut(&target).expect("edge known");
            if stream.closed {
                return Err(InterpError::Transducer {
                    node: id,
                    message: format!("wrote to closed edge {target}"),
                });
            }
            match &v {
                Some(l) => stream.elements.push(l.clone()),
                None => stream.closed = true,
            }
            emitted.push((target, v));
        }
        self.steps += 1;
        if self.options.check_each_step {
            check_node(p, self, id, self.options.split)?;
        }
        let event = StepEvent {
            node: id,
            edge,
            element,
            emitted,
        };
        if self.options.trace {
            self.trace.push(event.describe());
        }
        Ok(StepOutcome::Progress(event))
    }

    /// Final streams on the program's output edges.
    pub fn outputs(&self, p: &DfgProgram) -> BTreeMap<EdgeId, StreamValue> {
        p.outputs.iter().map(|e| (*e, self.gamma[e].clone())).collect()
    }
}

fn default_budget(p: &DfgProgram, inputs: &BTreeMap<EdgeId, StreamValue>) -> usize {
    let elements: usize = inputs.values().map(|v| v.elements.len()).sum();
    (64 * (elements + 1) * (p.nodes.len() + 1)).max(10_000)
}

/// Runs `p` to completion and returns the streams on its output edges.
pub fn run(
    p: &DfgProgram,
    inputs: BTreeMap<EdgeId, StreamValue>,
    scheduler: &mut dyn Scheduler,
    options: RunOptions,
) -> Result<BTreeMap<EdgeId, StreamValue>, InterpError> {
    let state = run_to_end(p, inputs, scheduler, options)?;
    Ok(state.outputs(p))
}

/// Runs `p` to completion and returns the final state.
pub fn run_to_end(
    p: &DfgProgram,
    inputs: BTreeMap<EdgeId, StreamValue>,
    scheduler: &mut dyn Scheduler,
    options: RunOptions,
) -> Result<ExecState, InterpError> {
    let budget = options.step_budget.unwrap_or_else(|| default_budget(p, &inputs));
    let mut state = ExecState::init(p, inputs, options)?;
    loop {
        if state.steps >= budget {
            return Err(InterpError::StepBudgetExceeded(budget));
        }
        if state.step(p, scheduler)? == StepOutcome::Done {
            return Ok(state);
        }
    }
}

/// Evaluates one node from scratch on whole input streams, consuming in
/// the order its choice function dictates.
pub fn batch_eval(
    p: &DfgProgram,
    id: NodeId,
    inputs: &[StreamValue],
    split: SplitPolicy,
) -> Result<Vec<StreamValue>, InterpError> {
    let node = &p.nodes[&id];
    let mut ex = NodeExec::new(node, split).map_err(|message| InterpError::Unsupported { node: id, message })?;
    let mut outs = vec![StreamValue::default(); node.outputs.len()];
    let mut pos = vec![0usize; inputs.len()];
    loop {
        let closed = ex.inputs_closed().to_vec();
        if closed.iter().all(|&c| c) {
            break;
        }
        let picks = transducer::choose(&node.choice(), &closed)
            .map_err(|index| InterpError::ChoiceViolation { node: id, index })?;
        let pending = |k: &usize| pos[*k] < inputs[*k].elements.len() || inputs[*k].closed;
        let Some(k) = picks.into_iter().find(pending) else {
            break;
        };
        let element = if pos[k] < inputs[k].elements.len() {
            pos[k] += 1;
            Some(inputs[k].elements[pos[k] - 1].clone())
        } else {
            None
        };
        let emitted = ex
            .step(k, element)
            .map_err(|message| InterpError::Transducer { node: id, message })?;
        for (o, v) in emitted {
            match v {
                Some(l) => outs[o].elements.push(l),
                None => outs[o].closed = true,
            }
        }
    }
    Ok(outs)
}

fn check_node(p: &DfgProgram, state: &ExecState, id: NodeId, split: SplitPolicy) -> Result<(), InterpError> {
    let node = &p.nodes[&id];
    let consumed: Vec<StreamValue> = node.inputs.iter().map(|e| state.consumed(*e)).collect();
    let expected = batch_eval(p, id, &consumed, split)?;
    let found: Vec<StreamValue> = node.outputs.iter().map(|e| state.gamma[e].clone()).collect();
    if expected != found {
        return Err(InterpError::Completion { node: id, expected, found });
    }
    Ok(())
}

/// Checks that every node's produced outputs equal a batch evaluation of
/// what it consumed.
pub fn check_completion(p: &DfgProgram, state: &ExecState) -> Result<(), InterpError> {
    for id in p.nodes.keys() {
        check_node(p, state, *id, state.options.split)?;
    }
    Ok(())
}

/// Input streams for `p` from file contents and standard input. Several
/// input edges may name the same file.
pub fn bind_inputs(
    p: &DfgProgram,
    files: &BTreeMap<String, String>,
    stdin: &str,
) -> Result<BTreeMap<EdgeId, StreamValue>, InterpError> {
    let mut m = BTreeMap::new();
    for e in &p.inputs {
        let text = match p.bindings.get(e) {
            Some(Binding::File(name)) | Some(Binding::AppendFile(name)) => files
                .get(name)
                .ok_or_else(|| InterpError::MissingFile(name.clone()))?
                .as_str(),
            Some(Binding::Stdin) | None => stdin,
            Some(Binding::Pipe(name)) => return Err(InterpError::MissingFile(format!("pipe:{name}"))),
            Some(Binding::Stdout) => return Err(InterpError::ExtraInput(*e)),
        };
        m.insert(*e, StreamValue::from_text(text));
    }
    Ok(m)
}

#[cfg(test)]
mod tests;
