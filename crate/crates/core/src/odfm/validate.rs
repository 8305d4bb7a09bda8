use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{DfgProgram, EdgeId, Helper, NodeFunction, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MultipleWriters { edge: EdgeId, nodes: Vec<NodeId> },
    MultipleReaders { edge: EdgeId, nodes: Vec<NodeId> },
    InputWritten { edge: EdgeId, node: NodeId },
    OutputRead { edge: EdgeId, node: NodeId },
    DuplicateInterfaceEdge { edge: EdgeId },
    Cycle { nodes: Vec<NodeId> },
    Unreachable { edge: EdgeId },
    Arity { node: NodeId, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[NodeId]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ");
        match self {
            Violation::MultipleWriters { edge, nodes } => {
                write!(f, "edge {edge} is written by several nodes ({})", list(nodes))
            }
            Violation::MultipleReaders { edge, nodes } => {
                write!(f, "edge {edge} is read by several nodes ({})", list(nodes))
            }
            Violation::InputWritten { edge, node } => {
                write!(f, "input edge {edge} is written by {node}")
            }
            Violation::OutputRead { edge, node } => write!(f, "output edge {edge} is read by {node}"),
            Violation::DuplicateInterfaceEdge { edge } => {
                write!(f, "edge {edge} is listed twice among inputs or outputs")
            }
            Violation::Cycle { nodes } => write!(f, "nodes {} form a cycle", list(nodes)),
            Violation::Unreachable { edge } => write!(f, "edge {edge} is not reachable from any input"),
            Violation::Arity { node, message } => write!(f, "node {node}: {message}"),
        }
    }
}

fn check_arity(id: NodeId, function: &NodeFunction, ins: usize, outs: usize, v: &mut Vec<Violation>) {
    let mut bad = |message: String| {
        v.push(Violation::Arity { node: id, message });
    };
    match function {
        NodeFunction::Helper(h) => {
            let ok = match h {
                Helper::Split | Helper::Tee => ins == 1 && outs >= 1,
                Helper::Cat => ins >= 1 && outs == 1,
                Helper::Relay => ins == 1 && outs == 1,
            };
            if !ok {
                bad(format!("{} with {ins} inputs and {outs} outputs", h.name()));
            }
        }
        NodeFunction::Command(c) => {
            if ins == 0 {
                bad("command without inputs".to_string());
            }
            if outs == 0 {
                bad("command without outputs".to_string());
            }
            let mut refs = c.referenced_inputs();
            refs.sort_unstable();
            if refs != (0..ins).collect::<Vec<_>>() {
                bad(format!("input references {refs:?} do not cover 0..{ins} exactly once"));
            }
            let mut refs = c.referenced_outputs();
            refs.sort_unstable();
            if refs != (0..outs).collect::<Vec<_>>() {
                bad(format!("output references {refs:?} do not cover 0..{outs} exactly once"));
            }
            if c.choice.configs().iter().any(|&i| i >= ins) {
                bad("configuration index out of range".to_string());
            }
        }
    }
}

/// Checks every structural rule; returns all violations found.
pub fn validate(p: &DfgProgram) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let mut writers: BTreeMap<EdgeId, Vec<NodeId>> = BTreeMap::new();
    let mut readers: BTreeMap<EdgeId, Vec<NodeId>> = BTreeMap::new();
    for (id, n) in &p.nodes {
        for &e in &n.outputs {
            writers.entry(e).or_default().push(*id);
        }
        for &e in &n.inputs {
            readers.entry(e).or_default().push(*id);
        }
        check_arity(*id, &n.function, n.inputs.len(), n.outputs.len(), &mut v);
    }
    for (e, ws) in &writers {
        if ws.len() > 1 {
            v.push(Violation::MultipleWriters {
                edge: *e,
                nodes: ws.clone(),
            });
        }
    }
    for (e, rs) in &readers {
        if rs.len() > 1 {
            v.push(Violation::MultipleReaders {
                edge: *e,
                nodes: rs.clone(),
            });
        }
    }
    for list in [&p.inputs, &p.outputs] {
        let mut seen = BTreeSet::new();
        for e in list {
            if !seen.insert(*e) {
                v.push(Violation::DuplicateInterfaceEdge { edge: *e });
            }
        }
    }
    for e in &p.inputs {
        for n in writers.get(e).into_iter().flatten() {
            v.push(Violation::InputWritten { edge: *e, node: *n });
        }
    }
    for e in &p.outputs {
        for n in readers.get(e).into_iter().flatten() {
            v.push(Violation::OutputRead { edge: *e, node: *n });
        }
    }

    let order = p.topo_order();
    if order.len() < p.nodes.len() {
        let sorted: BTreeSet<NodeId> = order.iter().copied().collect();
        v.push(Violation::Cycle {
            nodes: p.nodes.keys().filter(|id| !sorted.contains(id)).copied().collect(),
        });
    }

    // Forward closure from the inputs; fixpoint so cycles do not matter.
    let mut reached: BTreeSet<EdgeId> = p.inputs.iter().copied().collect();
    loop {
        let before = reached.len();
        for n in p.nodes.values() {
            if n.inputs.iter().any(|e| reached.contains(e)) {
                reached.extend(n.outputs.iter().copied());
            }
        }
        if reached.len() == before {
            break;
        }
    }
    for e in p.edges() {
        if !reached.contains(&e) {
            v.push(Violation::Unreachable { edge: e });
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
