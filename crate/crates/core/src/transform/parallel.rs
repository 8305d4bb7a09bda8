use crate::annotations::{ChoiceKind, CommandTemplate, ParallelClass, Registry};
use crate::odfm::{annotate, Arg, CommandNode, DfgNode, DfgProgram, EdgeId, Helper, NodeFunction, NodeId, NodeMetadata};

use super::{checked, expect_helper, mismatch, Rule, TransformError};

/// Builds a node from a map or aggregate template. Inputs are numbered
/// configuration copies first, then the partial results named by `$*`,
/// then `stdin` if given.
fn instantiate(
    template: &CommandTemplate,
    registry: &Registry,
    configs: &[EdgeId],
    partials: &[EdgeId],
    stdin: Option<EdgeId>,
    output: EdgeId,
    assignments: &[(String, String)],
) -> Result<DfgNode, TransformError> {
    let bad = |m: String| mismatch(Rule::Parallel, m);
    let (first, rest) = template
        .stages
        .split_first()
        .ok_or_else(|| bad("empty template".into()))?;
    let mut argv = Vec::new();
    for w in first {
        if w == "$*" {
            argv.extend((0..partials.len()).map(|j| Arg::Input {
                idx: configs.len() + j,
                prefix: String::new(),
            }));
        } else if let Some(k) = w.strip_prefix("$C").and_then(|k| k.parse::<usize>().ok()) {
            if k == 0 || k > configs.len() {
                return Err(bad(format!("template refers to missing configuration {w}")));
            }
            argv.push(Arg::Input {
                idx: k - 1,
                prefix: String::new(),
            });
        } else {
            argv.push(Arg::Lit(w.clone()));
        }
    }
    let mut inputs = configs.to_vec();
    inputs.extend_from_slice(partials);
    let stdin_idx = stdin.map(|e| {
        inputs.push(e);
        inputs.len() - 1
    });
    let mut node = CommandNode {
        argv,
        stdin: stdin_idx,
        stdout: Some(0),
        then: rest.to_vec(),
        metadata: NodeMetadata {
            assignments: assignments.to_vec(),
            redirs: Vec::new(),
        },
        choice: ChoiceKind::Sequential,
        class: ParallelClass::NotParallelizable,
    };
    if annotate(&mut node, registry).is_err() {
        node.choice = if configs.is_empty() {
            ChoiceKind::Sequential
        } else {
            ChoiceKind::sequential_after(configs.len())
        };
    }
    node.class = ParallelClass::NotParallelizable;
    Ok(DfgNode {
        inputs,
        outputs: vec![output],
        function: NodeFunction::Command(node),
    })
}

/// Replaces `cat(x1, ..., xn) -> x; f(x, configs)` by `n` map copies of
/// `f`, one per `xi`, whose results an aggregate combines: a cat for
/// stateless commands, the registered aggregate for data-parallel ones.
/// Configuration inputs are copied to every map (and to the aggregate
/// when it uses them) through a tee.
pub fn apply_parallel(p: &DfgProgram, cat: NodeId, f: NodeId, registry: &Registry) -> Result<DfgProgram, TransformError> {
    let rule = Rule::Parallel;
    let node = p.node(f).ok_or_else(|| mismatch(rule, format!("no node {f}")))?.clone();
    let Some(cmd) = node.as_command().cloned() else {
        return Err(TransformError::NotDataParallel(f));
    };
    if !cmd.class.is_parallelizable() {
        return Err(TransformError::NotDataParallel(f));
    }
    if node.outputs.len() != 1 || cmd.stdout != Some(0) {
        return Err(mismatch(rule, "the command must write only to standard output"));
    }
    let configs = cmd.choice.configs();
    let data = match cmd.stdin {
        Some(d) if !configs.contains(&d) && node.inputs.len() == configs.len() + 1 => d,
        _ => return Err(mismatch(rule, "the command must read exactly one data input from stdin")),
    };
    let x = node.inputs[data];
    if p.producer(x) != Some(cat) {
        return Err(TransformError::MissingCatPredecessor(f));
    }
    let parts = expect_helper(p, cat, Helper::Cat, rule)
        .map_err(|_| TransformError::MissingCatPredecessor(f))?
        .inputs
        .clone();
    let n = parts.len();
    let y = node.outputs[0];
    let agg_configs = match &cmd.class {
        ParallelClass::DataParallel { agg, .. } => agg.config_refs(),
        _ => 0,
    };

    let mut q = p.clone();
    q.nodes.remove(&cat);
    q.nodes.remove(&f);
    q.bindings.remove(&x);

    // copies[c][i]: copy of configuration c for map i (i == n: aggregate)
    let mut copies: Vec<Vec<EdgeId>> = Vec::new();
    for &c in &configs {
        let edge = node.inputs[c];
        let want = n + usize::from(agg_configs > 0);
        if want == 1 {
            copies.push(vec![edge]);
            continue;
        }
        let outs = q.fresh_edges(want).expect("want > 0");
        q.add_node(DfgNode::helper(Helper::Tee, vec![edge], outs.clone()));
        copies.push(outs);
    }

    let mut partials = Vec::with_capacity(n);
    for (i, part) in parts.iter().enumerate() {
        let m = q.fresh_edge();
        let cfg: Vec<EdgeId> = copies.iter().map(|c| c[i]).collect();
        let map_node = match &cmd.class {
            ParallelClass::DataParallel { map: Some(t), .. } => instantiate(
                t,
                registry,
                &cfg,
                &[],
                Some(*part),
                m,
                &cmd.metadata.assignments,
            )?,
            _ => {
                let mut inputs = node.inputs.clone();
                for (k, &c) in configs.iter().enumerate() {
                    inputs[c] = cfg[k];
                }
                inputs[data] = *part;
                DfgNode {
                    inputs,
                    outputs: vec![m],
                    function: NodeFunction::Command(cmd.clone()),
                }
            }
        };
        q.add_node(map_node);
        partials.push(m);
    }

    let agg = match &cmd.class {
        ParallelClass::DataParallel { agg, .. } => {
            let cfg: Vec<EdgeId> = copies
                .iter()
                .take(agg_configs)
                .map(|c| *c.last().expect("non-empty"))
                .collect();
            instantiate(agg, registry, &cfg, &partials, None, y, &cmd.metadata.assignments)?
        }
        _ => DfgNode::helper(Helper::Cat, partials, vec![y]),
    };
    q.add_node(agg);
    checked(q)
}
