use std::collections::BTreeMap;

use crate::odfm::{Arg, DfgNode, DfgProgram, EdgeId, Helper, NodeFunction, NodeId};

use super::{checked, expect_helper, mismatch, Rule, TransformError};

fn replace(p: &mut DfgProgram, old: &[NodeId], new: Vec<DfgNode>) -> Vec<NodeId> {
    for id in old {
        p.nodes.remove(id);
    }
    new.into_iter().map(|n| p.add_node(n)).collect()
}

fn helper(h: Helper, inputs: Vec<EdgeId>, outputs: Vec<EdgeId>) -> DfgNode {
    DfgNode::helper(h, inputs, outputs)
}

/// Puts a relay in front of whatever reads `edge` (or behind its writer
/// when nothing reads it). Returns the new program and the relay's id.
pub fn insert_relay(p: &DfgProgram, edge: EdgeId) -> Result<(DfgProgram, NodeId), TransformError> {
    let mut q = p.clone();
    let fresh = q.fresh_edge();
    let relay = if let Some(c) = q.consumer(edge) {
        for e in &mut q.nodes.get_mut(&c).expect("consumer exists").inputs {
            if *e == edge {
                *e = fresh;
            }
        }
        q.add_node(helper(Helper::Relay, vec![edge], vec![fresh]))
    } else if let Some(w) = q.producer(edge) {
        for e in &mut q.nodes.get_mut(&w).expect("producer exists").outputs {
            if *e == edge {
                *e = fresh;
            }
        }
        q.add_node(helper(Helper::Relay, vec![fresh], vec![edge]))
    } else {
        return Err(mismatch(Rule::Relay, format!("edge {edge} is not connected to any node")));
    };
    Ok((checked(q)?, relay))
}

/// Deletes a relay, joining its input and output edges.
pub fn remove_relay(p: &DfgProgram, relay: NodeId) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, relay, Helper::Relay, Rule::Relay)?;
    let (x, y) = (n.inputs[0], n.outputs[0]);
    if p.inputs.contains(&x) && p.outputs.contains(&y) {
        return Err(mismatch(Rule::Relay, "relay connects a program input directly to an output"));
    }
    let mut q = p.clone();
    q.nodes.remove(&relay);
    if p.outputs.contains(&y) {
        q.rename_unchecked(x, y);
    } else {
        q.rename_unchecked(y, x);
    }
    checked(q)
}

/// Splits an `m`-way split into a two-way split feeding a `k`-way and an
/// `(m - k)`-way split.
pub fn split_split(p: &DfgProgram, split: NodeId, k: usize) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, split, Helper::Split, Rule::SplitSplit)?.clone();
    let m = n.outputs.len();
    if m < 2 || k == 0 || k >= m {
        return Err(TransformError::Arity {
            rule: Rule::SplitSplit,
            arity: m,
        });
    }
    let mut q = p.clone();
    let f = q.fresh_edges(2).expect("two edges");
    replace(
        &mut q,
        &[split],
        vec![
            helper(Helper::Split, n.inputs.clone(), f.clone()),
            helper(Helper::Split, vec![f[0]], n.outputs[..k].to_vec()),
            helper(Helper::Split, vec![f[1]], n.outputs[k..].to_vec()),
        ],
    );
    checked(q)
}

/// Inverse of [`split_split`]: a two-way split whose outputs both feed
/// splits becomes one split.
pub fn merge_split_split(p: &DfgProgram, outer: NodeId) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, outer, Helper::Split, Rule::SplitSplit)?;
    if n.outputs.len() != 2 {
        return Err(TransformError::Arity {
            rule: Rule::SplitSplit,
            arity: n.outputs.len(),
        });
    }
    let mut inner = Vec::new();
    for e in &n.outputs {
        let c = p
            .consumer(*e)
            .filter(|c| p.nodes[c].is_helper(Helper::Split))
            .ok_or_else(|| mismatch(Rule::SplitSplit, format!("edge {e} does not feed a split")))?;
        inner.push(c);
    }
    let mut outs = p.nodes[&inner[0]].outputs.clone();
    outs.extend(p.nodes[&inner[1]].outputs.iter().copied());
    let mut q = p.clone();
    replace(&mut q, &[outer, inner[0], inner[1]], vec![helper(Helper::Split, n.inputs.clone(), outs)]);
    checked(q)
}

/// Splits an `m`-way cat into a two-way cat of a `k`-way and an
/// `(m - k)`-way cat.
pub fn concat_concat(p: &DfgProgram, cat: NodeId, k: usize) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, cat, Helper::Cat, Rule::ConcatConcat)?.clone();
    let m = n.inputs.len();
    if m < 2 || k == 0 || k >= m {
        return Err(TransformError::Arity {
            rule: Rule::ConcatConcat,
            arity: m,
        });
    }
    let mut q = p.clone();
    let f = q.fresh_edges(2).expect("two edges");
    replace(
        &mut q,
        &[cat],
        vec![
            helper(Helper::Cat, n.inputs[..k].to_vec(), vec![f[0]]),
            helper(Helper::Cat, n.inputs[k..].to_vec(), vec![f[1]]),
            helper(Helper::Cat, f, n.outputs.clone()),
        ],
    );
    checked(q)
}

/// Inverse of [`concat_concat`]: a two-way cat of two cats becomes one cat.
pub fn merge_concat_concat(p: &DfgProgram, outer: NodeId) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, outer, Helper::Cat, Rule::ConcatConcat)?;
    if n.inputs.len() != 2 {
        return Err(TransformError::Arity {
            rule: Rule::ConcatConcat,
            arity: n.inputs.len(),
        });
    }
    let mut inner = Vec::new();
    for e in &n.inputs {
        let c = p
            .producer(*e)
            .filter(|c| p.nodes[c].is_helper(Helper::Cat))
            .ok_or_else(|| mismatch(Rule::ConcatConcat, format!("edge {e} is not written by a cat")))?;
        inner.push(c);
    }
    let mut ins = p.nodes[&inner[0]].inputs.clone();
    ins.extend(p.nodes[&inner[1]].inputs.iter().copied());
    let mut q = p.clone();
    replace(&mut q, &[outer, inner[0], inner[1]], vec![helper(Helper::Cat, ins, n.outputs.clone())]);
    checked(q)
}

/// Replaces a relay by an `n`-way split followed by a cat of its outputs.
/// Returns the new program and the ids of the split and the cat.
pub fn split_concat(p: &DfgProgram, relay: NodeId, n: usize) -> Result<(DfgProgram, NodeId, NodeId), TransformError> {
    let r = expect_helper(p, relay, Helper::Relay, Rule::SplitConcat)?.clone();
    if n == 0 {
        return Err(TransformError::Arity {
            rule: Rule::SplitConcat,
            arity: 0,
        });
    }
    let mut q = p.clone();
    let z = q.fresh_edges(n).expect("n > 0");
    let ids = replace(
        &mut q,
        &[relay],
        vec![
            helper(Helper::Split, r.inputs.clone(), z.clone()),
            helper(Helper::Cat, z, r.outputs.clone()),
        ],
    );
    Ok((checked(q)?, ids[0], ids[1]))
}

/// Inverse of [`split_concat`]: a split whose outputs all feed, in order,
/// one cat becomes a relay.
pub fn merge_split_concat(p: &DfgProgram, split: NodeId) -> Result<DfgProgram, TransformError> {
    let s = expect_helper(p, split, Helper::Split, Rule::SplitConcat)?;
    let cat = p
        .consumer(s.outputs[0])
        .filter(|c| p.nodes[c].is_helper(Helper::Cat) && p.nodes[c].inputs == s.outputs)
        .ok_or_else(|| mismatch(Rule::SplitConcat, "split outputs do not feed one cat in order"))?;
    let mut q = p.clone();
    let out = p.nodes[&cat].outputs.clone();
    replace(&mut q, &[split, cat], vec![helper(Helper::Relay, s.inputs.clone(), out)]);
    checked(q)
}

/// Moves a tee that copies the output of a cat in front of the cat: one
/// tee per cat input, one cat per tee output.
pub fn tee_concat(p: &DfgProgram, cat: NodeId, tee: NodeId) -> Result<DfgProgram, TransformError> {
    let c = expect_helper(p, cat, Helper::Cat, Rule::TeeConcat)?.clone();
    let t = expect_helper(p, tee, Helper::Tee, Rule::TeeConcat)?.clone();
    if t.inputs[0] != c.outputs[0] {
        return Err(mismatch(Rule::TeeConcat, "the tee does not read the cat's output"));
    }
    let (n, k) = (c.inputs.len(), t.outputs.len());
    let mut q = p.clone();
    let fresh = q.fresh_edges(n * k).expect("n, k > 0");
    let copy = |i: usize, l: usize| fresh[i * k + l];
    let mut nodes = Vec::new();
    for (i, x) in c.inputs.iter().enumerate() {
        nodes.push(helper(Helper::Tee, vec![*x], (0..k).map(|l| copy(i, l)).collect()));
    }
    for (l, u) in t.outputs.iter().enumerate() {
        nodes.push(helper(Helper::Cat, (0..n).map(|i| copy(i, l)).collect(), vec![*u]));
    }
    replace(&mut q, &[cat, tee], nodes);
    checked(q)
}

/// Inverse of [`tee_concat`]: `cats` read, position by position, the
/// outputs of the same tees; they become one cat followed by one tee.
pub fn merge_tee_concat(p: &DfgProgram, cats: &[NodeId]) -> Result<DfgProgram, TransformError> {
    let bad = |m: &str| mismatch(Rule::TeeConcat, m.to_string());
    let nodes: Vec<&DfgNode> = cats
        .iter()
        .map(|c| expect_helper(p, *c, Helper::Cat, Rule::TeeConcat))
        .collect::<Result<_, _>>()?;
    let first = nodes.first().ok_or_else(|| bad("no cats given"))?;
    let n = first.inputs.len();
    if nodes.iter().any(|c| c.inputs.len() != n) {
        return Err(bad("cats differ in arity"));
    }
    let mut tees = Vec::new();
    let mut sources = Vec::new();
    for j in 0..n {
        let t = p
            .producer(first.inputs[j])
            .filter(|t| p.nodes[t].is_helper(Helper::Tee))
            .ok_or_else(|| bad("cat input is not written by a tee"))?;
        let expected: Vec<EdgeId> = nodes.iter().map(|c| c.inputs[j]).collect();
        if p.nodes[&t].outputs != expected {
            return Err(bad("tee outputs do not line up with the cats"));
        }
        tees.push(t);
        sources.push(p.nodes[&t].inputs[0]);
    }
    let outs: Vec<EdgeId> = nodes.iter().map(|c| c.outputs[0]).collect();
    let mut q = p.clone();
    let y = q.fresh_edge();
    let mut old = cats.to_vec();
    old.extend(tees);
    replace(
        &mut q,
        &old,
        vec![helper(Helper::Cat, sources, vec![y]), helper(Helper::Tee, vec![y], outs)],
    );
    checked(q)
}

fn retype(p: &DfgProgram, id: NodeId, from: Helper, to: Helper, rule: Rule) -> Result<DfgProgram, TransformError> {
    let n = expect_helper(p, id, from, rule)?;
    if n.inputs.len() != 1 || n.outputs.len() != 1 {
        return Err(TransformError::Arity {
            rule,
            arity: n.inputs.len().max(n.outputs.len()),
        });
    }
    let mut q = p.clone();
    q.nodes.get_mut(&id).expect("checked").function = NodeFunction::Helper(to);
    checked(q)
}

/// A one-input cat is a relay.
pub fn one_concat(p: &DfgProgram, cat: NodeId) -> Result<DfgProgram, TransformError> {
    retype(p, cat, Helper::Cat, Helper::Relay, Rule::OneConcat)
}

pub fn relay_to_one_concat(p: &DfgProgram, relay: NodeId) -> Result<DfgProgram, TransformError> {
    retype(p, relay, Helper::Relay, Helper::Cat, Rule::OneConcat)
}

/// A one-output split is a relay.
pub fn one_split(p: &DfgProgram, split: NodeId) -> Result<DfgProgram, TransformError> {
    retype(p, split, Helper::Split, Helper::Relay, Rule::OneSplit)
}

pub fn relay_to_one_split(p: &DfgProgram, relay: NodeId) -> Result<DfgProgram, TransformError> {
    retype(p, relay, Helper::Relay, Helper::Split, Rule::OneSplit)
}

/// Removes a cat whose output is split again into as many parts, wiring
/// the i-th cat input to the i-th split output through a relay.
pub fn concat_split(p: &DfgProgram, cat: NodeId, split: NodeId) -> Result<DfgProgram, TransformError> {
    let c = expect_helper(p, cat, Helper::Cat, Rule::ConcatSplit)?.clone();
    let s = expect_helper(p, split, Helper::Split, Rule::ConcatSplit)?.clone();
    if s.inputs[0] != c.outputs[0] {
        return Err(mismatch(Rule::ConcatSplit, "the split does not read the cat's output"));
    }
    if c.inputs.len() != s.outputs.len() {
        return Err(TransformError::ArityMismatch {
            fan_in: c.inputs.len(),
            fan_out: s.outputs.len(),
        });
    }
    let mut q = p.clone();
    let relays = c
        .inputs
        .iter()
        .zip(&s.outputs)
        .map(|(x, z)| helper(Helper::Relay, vec![*x], vec![*z]))
        .collect();
    replace(&mut q, &[cat, split], relays);
    checked(q)
}

/// Funnels the inputs a command reads one after another through a cat
/// into its standard input. Configuration inputs keep their place and come
/// first; a bare `cat` becomes a relay.
pub fn sequential_consumption(p: &DfgProgram, id: NodeId) -> Result<DfgProgram, TransformError> {
    let rule = Rule::SequentialConsumption;
    let node = p.node(id).ok_or_else(|| mismatch(rule, format!("no node {id}")))?;
    let Some(cmd) = node.as_command() else {
        return Err(mismatch(rule, format!("{id} is not a command")));
    };
    if !cmd.choice.is_sequential() {
        return Err(mismatch(rule, "the command does not read its inputs in sequence"));
    }
    let configs = cmd.choice.configs();
    let seq: Vec<usize> = (0..node.inputs.len()).filter(|i| !configs.contains(i)).collect();
    if seq.is_empty() {
        return Err(mismatch(rule, "the command has no sequential inputs"));
    }
    let mut c = cmd.clone();
    let mut argv = Vec::with_capacity(c.argv.len());
    for a in c.argv.drain(..) {
        match &a {
            Arg::Input { idx, prefix } if seq.contains(idx) => {
                if !prefix.is_empty() {
                    return Err(mismatch(rule, "a sequential input is attached to an option"));
                }
            }
            _ => argv.push(a),
        }
    }
    c.argv = argv;
    c.stdin = None;
    let order: Vec<usize> = configs.iter().copied().collect();
    let renumber: BTreeMap<usize, usize> = order.iter().enumerate().map(|(new, old)| (*old, new)).collect();
    c.remap_inputs(&|i| renumber.get(&i).copied().unwrap_or(i));
    c.stdin = Some(order.len());

    let mut q = p.clone();
    let funnel = q.fresh_edge();
    let mut inputs: Vec<EdgeId> = order.iter().map(|i| node.inputs[*i]).collect();
    inputs.push(funnel);
    let cat_inputs: Vec<EdgeId> = seq.iter().map(|i| node.inputs[*i]).collect();

    let bare_cat = c.name() == "cat"
        && c.argv.iter().skip(1).all(|a| matches!(a, Arg::Lit(raw) if raw == "-"))
        && c.then.is_empty()
        && c.metadata == Default::default()
        && c.stdout == Some(0)
        && node.outputs.len() == 1
        && configs.is_empty();
    let function = if bare_cat {
        NodeFunction::Helper(Helper::Relay)
    } else {
        NodeFunction::Command(c)
    };
    let n = q.nodes.get_mut(&id).expect("node exists");
    n.inputs = inputs;
    n.function = function;
    q.add_node(helper(Helper::Cat, cat_inputs, vec![funnel]));
    checked(q)
}

/// True when the command already reads a single sequential input from
/// standard input.
pub(crate) fn reads_one_stdin(node: &DfgNode) -> bool {
    let Some(c) = node.as_command() else {
        return false;
    };
    let configs = c.choice.configs();
    let seq = (0..node.inputs.len()).filter(|i| !configs.contains(i)).count();
    seq == 1 && c.stdin.is_some_and(|s| !configs.contains(&s))
}
