//! Dataflow programs: input edges, output edges and nodes that read and
//! write edges.
//!
//! A valid program assigns every edge at most once, reads every edge at
//! most once, has no cycles, never writes an input edge or reads an output
//! edge, and every edge is reachable from an input.

mod text;
mod validate;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::annotations::{ChoiceKind, ParallelClass};
use crate::shell_ast::{unquote, Redir};

pub use text::{parse_program, IrParseError};
pub(crate) use text::annotate;
pub use validate::{validate, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Where an input or output edge of a program lives outside the graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Binding {
    File(String),
    AppendFile(String),
    Stdin,
    Stdout,
    /// An anonymous pipe connecting two pipeline stages before composition.
    Pipe(String),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::File(n) => write!(f, "file:{n}"),
            Binding::AppendFile(n) => write!(f, "append:{n}"),
            Binding::Stdin => f.write_str("stdin"),
            Binding::Stdout => f.write_str("stdout"),
            Binding::Pipe(n) => write!(f, "pipe:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Helper {
    /// One input divided into contiguous chunks, one per output.
    Split,
    /// Inputs concatenated in order.
    Cat,
    /// Input copied to every output.
    Tee,
    /// Identity.
    Relay,
}

impl Helper {
    pub fn name(self) -> &'static str {
        match self {
            Helper::Split => "split",
            Helper::Cat => "cat",
            Helper::Tee => "tee",
            Helper::Relay => "relay",
        }
    }
}

/// One argument of a command node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    /// Raw shell word, quotes included.
    Lit(String),
    /// Path of input `idx`, preceded by `prefix` (e.g. `-f`).
    Input { idx: usize, prefix: String },
    /// Path of output `idx`.
    Output(usize),
}

/// Assignments and redirections of the original command that the dataflow
/// translation does not interpret.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct NodeMetadata {
    pub assignments: Vec<(String, String)>,
    pub redirs: Vec<Redir>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandNode {
    /// Command name followed by its arguments.
    pub argv: Vec<Arg>,
    /// Input read from standard input, if any.
    pub stdin: Option<usize>,
    /// Output written to standard output, if any.
    pub stdout: Option<usize>,
    /// Further pipeline stages (raw words) applied to the command's standard
    /// output, as in aggregate templates like `paste -d+ $* | bc`.
    pub then: Vec<Vec<String>>,
    pub metadata: NodeMetadata,
    pub choice: ChoiceKind,
    pub class: ParallelClass,
}

impl CommandNode {
    pub fn name(&self) -> String {
        match self.argv.first() {
            Some(Arg::Lit(raw)) => unquote(raw),
            _ => String::new(),
        }
    }

    /// Input indexes in the order they appear (stdin wherever it is read).
    pub fn referenced_inputs(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .argv
            .iter()
            .filter_map(|a| match a {
                Arg::Input { idx, .. } => Some(*idx),
                _ => None,
            })
            .collect();
        v.extend(self.stdin);
        v
    }

    pub fn referenced_outputs(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .argv
            .iter()
            .filter_map(|a| match a {
                Arg::Output(idx) => Some(*idx),
                _ => None,
            })
            .collect();
        v.extend(self.stdout);
        v
    }

    /// Renumbers input references through `map` (old index -> new index).
    pub fn remap_inputs(&mut self, map: &dyn Fn(usize) -> usize) {
        for a in &mut self.argv {
            if let Arg::Input { idx, .. } = a {
                *idx = map(*idx);
            }
        }
        self.stdin = self.stdin.map(map);
        self.choice = match &self.choice {
            ChoiceKind::ConfigThenSequential(c) => {
                ChoiceKind::ConfigThenSequential(c.iter().map(|&i| map(i)).collect())
            }
            other => other.clone(),
        };
    }

    /// Short label used in diagnostics.
    pub fn label(&self) -> String {
        let words: Vec<String> = self
            .argv
            .iter()
            .map(|a| match a {
                Arg::Lit(raw) => raw.clone(),
                Arg::Input { idx, prefix } => format!("{prefix}@i{idx}"),
                Arg::Output(idx) => format!("@o{idx}"),
            })
            .collect();
        words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeFunction {
    Command(CommandNode),
    Helper(Helper),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DfgNode {
    pub inputs: Vec<EdgeId>,
    pub outputs: Vec<EdgeId>,
    pub function: NodeFunction,
}

impl DfgNode {
    pub fn helper(helper: Helper, inputs: Vec<EdgeId>, outputs: Vec<EdgeId>) -> Self {
        DfgNode {
            inputs,
            outputs,
            function: NodeFunction::Helper(helper),
        }
    }

    pub fn as_helper(&self) -> Option<Helper> {
        match self.function {
            NodeFunction::Helper(h) => Some(h),
            NodeFunction::Command(_) => None,
        }
    }

    pub fn as_command(&self) -> Option<&CommandNode> {
        match &self.function {
            NodeFunction::Command(c) => Some(c),
            NodeFunction::Helper(_) => None,
        }
    }

    pub fn is_helper(&self, h: Helper) -> bool {
        self.as_helper() == Some(h)
    }

    pub fn choice(&self) -> ChoiceKind {
        match &self.function {
            NodeFunction::Command(c) => c.choice.clone(),
            NodeFunction::Helper(_) => ChoiceKind::Sequential,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.inputs.iter().chain(self.outputs.iter()).copied()
    }

    pub fn label(&self) -> String {
        match &self.function {
            NodeFunction::Helper(h) => h.name().to_string(),
            NodeFunction::Command(c) => c.label(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OdfmError {
    #[error("edge {0} already occurs in the program")]
    Collision(EdgeId),
    #[error("fresh_edges needs a positive count")]
    ZeroEdges,
}

/// A dataflow program `I; O; E`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DfgProgram {
    pub inputs: Vec<EdgeId>,
    pub outputs: Vec<EdgeId>,
    pub nodes: BTreeMap<NodeId, DfgNode>,
    /// Bindings of input and output edges; internal edges are unbound.
    pub bindings: BTreeMap<EdgeId, Binding>,
}

impl DfgProgram {
    pub fn new() -> Self {
        DfgProgram::default()
    }

    /// Every edge mentioned anywhere in the program.
    pub fn edges(&self) -> BTreeSet<EdgeId> {
        let mut s: BTreeSet<EdgeId> = self.inputs.iter().chain(&self.outputs).copied().collect();
        for n in self.nodes.values() {
            s.extend(n.edges());
        }
        s.extend(self.bindings.keys().copied());
        s
    }

    /// `n` edge ids that occur nowhere in the program.
    pub fn fresh_edges(&self, n: usize) -> Result<Vec<EdgeId>, OdfmError> {
        if n == 0 {
            return Err(OdfmError::ZeroEdges);
        }
        let start = self.edges().iter().next_back().map_or(1, |e| e.0 + 1);
        Ok((start..start + n as u32).map(EdgeId).collect())
    }

    pub fn fresh_edge(&self) -> EdgeId {
        self.fresh_edges(1).expect("n > 0")[0]
    }

    pub fn fresh_node_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(1, |n| n.0 + 1))
    }

    pub fn add_node(&mut self, node: DfgNode) -> NodeId {
        let id = self.fresh_node_id();
        self.nodes.insert(id, node);
        id
    }

    pub fn node(&self, id: NodeId) -> Option<&DfgNode> {
        self.nodes.get(&id)
    }

    /// The node writing `edge`, if any.
    pub fn producer(&self, edge: EdgeId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|(_, n)| n.outputs.contains(&edge))
            .map(|(id, _)| *id)
    }

    /// The node reading `edge`, if any.
    pub fn consumer(&self, edge: EdgeId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|(_, n)| n.inputs.contains(&edge))
            .map(|(id, _)| *id)
    }

    /// Renames `old` to `new` everywhere.
    pub fn substitute(&self, old: EdgeId, new: EdgeId) -> Result<DfgProgram, OdfmError> {
        if old == new {
            return Ok(self.clone());
        }
        if self.edges().contains(&new) {
            return Err(OdfmError::Collision(new));
        }
        let mut p = self.clone();
        p.rename_unchecked(old, new);
        Ok(p)
    }

    pub(crate) fn rename_unchecked(&mut self, old: EdgeId, new: EdgeId) {
        let ren = |e: &mut EdgeId| {
            if *e == old {
                *e = new;
            }
        };
        self.inputs.iter_mut().for_each(ren);
        self.outputs.iter_mut().for_each(ren);
        for n in self.nodes.values_mut() {
            n.inputs.iter_mut().for_each(ren);
            n.outputs.iter_mut().for_each(ren);
        }
        if let Some(b) = self.bindings.remove(&old) {
            self.bindings.insert(new, b);
        }
    }

    /// Node ids in a topological order (producers before consumers). Nodes
    /// on a cycle are omitted.
    pub fn topo_order(&self) -> Vec<NodeId> {
        let mut producer: BTreeMap<EdgeId, NodeId> = BTreeMap::new();
        for (id, n) in &self.nodes {
            for &o in &n.outputs {
                producer.insert(o, *id);
            }
        }
        let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut succ: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (id, n) in &self.nodes {
            let preds: BTreeSet<NodeId> =
                n.inputs.iter().filter_map(|e| producer.get(e).copied()).collect();
            indeg.insert(*id, preds.len());
            for p in preds {
                succ.entry(p).or_default().push(*id);
            }
        }
        let mut queue: VecDeque<NodeId> =
            indeg.iter().filter(|(_, &d)| d == 0).map(|(id, _)| *id).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = queue.pop_front() {
            order.push(id);
            for s in succ.get(&id).into_iter().flatten() {
                let d = indeg.get_mut(s).expect("known node");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(*s);
                }
            }
        }
        order
    }

    pub fn to_text(&self) -> String {
        text::write_program(self)
    }

    /// Counts nodes by helper kind and commands by name, for reports.
    pub fn census(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for n in self.nodes.values() {
            let key = match &n.function {
                NodeFunction::Helper(h) => h.name().to_string(),
                NodeFunction::Command(c) => c.name(),
            };
            *m.entry(key).or_insert(0) += 1;
        }
        m
    }
}

impl fmt::Display for DfgProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
