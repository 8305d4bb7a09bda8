use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::annotations::{ChoiceKind, ParallelClass};
use crate::odfm::{Arg, Binding, CommandNode, DfgNode, DfgProgram, EdgeId, Helper, NodeFunction, NodeId, NodeMetadata};
use crate::shell_ast::unquote;
use crate::transform;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Directory in which each fragment creates its FIFO directory;
    /// `$TMPDIR` or `/tmp` when unset.
    pub temp_dir: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("interface edge {0} has no usable binding")]
    Unbound(EdgeId),
    #[error("node {node} cannot be turned back into a command: {message}")]
    Reconstruct { node: NodeId, message: String },
}

// Opening a FIFO blocks until the other end is opened too, so helpers open
// all of theirs up front through redirections, in ascending order, and
// read or write the descriptors. dash only knows descriptors 0 to 9.
const MAX_FANOUT: usize = 6;

const SPLIT_FN: &str = r#"odfm_split() {
  odfm_f=$(mktemp "$odfm_d/split.XXXXXX")
  cat > "$odfm_f"
  odfm_c=$(( ($(wc -l < "$odfm_f") + $# - 1) / $# ))
  { while [ $# -gt 1 ]; do head -n "$odfm_c" >&"$1"; eval "exec $1>&-"; shift; done; cat >&"$1"; } < "$odfm_f"
  rm -f "$odfm_f"
}"#;

const BC_FN: &str = r#"command -v bc > /dev/null 2>&1 || bc() { awk -F+ '{ s = 0; for (i = 1; i <= NF; i++) s += $i; print s }'; }"#;

/// Quotes a word for the shell unless it only holds safe characters.
pub fn shell_quote(s: &str) -> String {
    let safe = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "_./-+:,=@%^".contains(c));
    if safe {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Escapes text for use inside double quotes.
fn dq(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '"' | '$' | '`') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

struct Layout {
    fifo: BTreeMap<EdgeId, String>,
}

impl Layout {
    fn path(&self, e: EdgeId) -> String {
        format!("\"{}\"", self.fifo[&e])
    }

    fn prefixed(&self, prefix: &str, e: EdgeId) -> String {
        format!("\"{}{}\"", dq(prefix), self.fifo[&e])
    }
}

fn command_line(id: NodeId, n: &DfgNode, c: &CommandNode, l: &Layout) -> Result<String, EmitError> {
    let bad = |m: &str| EmitError::Reconstruct {
        node: id,
        message: m.to_string(),
    };
    let mut words: Vec<String> = c.metadata.assignments.iter().map(|(k, v)| format!("{k}={v}")).collect();
    for a in &c.argv {
        words.push(match a {
            Arg::Lit(raw) => raw.clone(),
            Arg::Input { idx, prefix } => l.prefixed(prefix, *n.inputs.get(*idx).ok_or_else(|| bad("missing input"))?),
            Arg::Output(idx) => l.path(*n.outputs.get(*idx).ok_or_else(|| bad("missing output"))?),
        });
    }
    if words.is_empty() {
        return Err(bad("empty command"));
    }
    if let Some(i) = c.stdin {
        words.push(format!("< {}", l.path(*n.inputs.get(i).ok_or_else(|| bad("missing stdin"))?)));
    }
    words.extend(c.metadata.redirs.iter().map(|r| r.to_string()));
    let mut line = words.join(" ");
    for stage in &c.then {
        line.push_str(" | ");
        line.push_str(&stage.join(" "));
    }
    if let Some(o) = c.stdout {
        let _ = write!(line, " > {}", l.path(*n.outputs.get(o).ok_or_else(|| bad("missing stdout"))?));
    }
    Ok(line)
}

fn fds(edges: &[EdgeId], dir: &str, l: &Layout) -> String {
    edges
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{}{dir} {}", i + 3, l.path(*e)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn helper_line(h: Helper, n: &DfgNode, l: &Layout) -> String {
    let (ins, outs) = (&n.inputs, &n.outputs);
    match h {
        Helper::Relay => format!("cat < {} > {}", l.path(ins[0]), l.path(outs[0])),
        Helper::Cat if ins.len() == 1 => format!("cat < {} > {}", l.path(ins[0]), l.path(outs[0])),
        Helper::Cat => {
            let body: Vec<String> = (0..ins.len()).map(|i| format!("cat <&{}", i + 3)).collect();
            format!("{{ {}; }} {} > {}", body.join("; "), fds(ins, "<", l), l.path(outs[0]))
        }
        Helper::Tee => {
            let rest: Vec<String> = outs[1..].iter().map(|e| l.path(*e)).collect();
            format!("tee {} < {} > {}", rest.join(" "), l.path(ins[0]), l.path(outs[0]))
                .replace("tee  <", "tee <")
        }
        Helper::Split if outs.len() == 1 => format!("cat < {} > {}", l.path(ins[0]), l.path(outs[0])),
        Helper::Split => {
            let args: Vec<String> = (0..outs.len()).map(|i| (i + 3).to_string()).collect();
            format!("odfm_split {} < {} {}", args.join(" "), l.path(ins[0]), fds(outs, ">", l))
        }
    }
}

fn uses(p: &DfgProgram, name: &str) -> bool {
    p.nodes.values().any(|n| match &n.function {
        NodeFunction::Command(c) => c.name() == name || c.then.iter().any(|s| s.first().is_some_and(|w| unquote(w) == name)),
        NodeFunction::Helper(_) => false,
    })
}

/// `cat` over plain inputs opens them one at a time; turn it into a cat
/// helper, followed by the rest of its pipeline if it has one.
fn lift_cats(p: &DfgProgram) -> DfgProgram {
    let mut q = p.clone();
    let ids: Vec<NodeId> = q.nodes.keys().copied().collect();
    for id in ids {
        let n = &q.nodes[&id];
        let Some(c) = n.as_command() else { continue };
        let plain = c.name() == "cat"
            && c.argv.len() > 2
            && c.argv[1..].iter().all(|a| matches!(a, Arg::Input { prefix, .. } if prefix.is_empty()))
            && c.stdin.is_none()
            && c.stdout == Some(0)
            && n.outputs.len() == 1
            && c.metadata == NodeMetadata::default();
        if !plain {
            continue;
        }
        let order: Vec<EdgeId> = c.argv[1..]
            .iter()
            .map(|a| match a {
                Arg::Input { idx, .. } => n.inputs[*idx],
                _ => unreachable!("checked above"),
            })
            .collect();
        let out = n.outputs[0];
        let then = c.then.clone();
        if then.is_empty() {
            q.nodes.insert(id, DfgNode::helper(Helper::Cat, order, vec![out]));
            continue;
        }
        let mid = q.fresh_edge();
        let rest = CommandNode {
            argv: then[0].iter().cloned().map(Arg::Lit).collect(),
            stdin: Some(0),
            stdout: Some(0),
            then: then[1..].to_vec(),
            metadata: NodeMetadata::default(),
            choice: ChoiceKind::Sequential,
            class: ParallelClass::NotParallelizable,
        };
        q.nodes.insert(
            id,
            DfgNode {
                inputs: vec![mid],
                outputs: vec![out],
                function: NodeFunction::Command(rest),
            },
        );
        q.add_node(DfgNode::helper(Helper::Cat, order, vec![mid]));
    }
    q
}

/// Rewrites the program into one the backend can lay out: plain cats
/// become helpers and wide cats and splits become trees.
fn prepare(p: &DfgProgram) -> DfgProgram {
    let mut q = lift_cats(p);
    loop {
        let wide = q.nodes.iter().find_map(|(id, n)| {
            if n.is_helper(Helper::Cat) && n.inputs.len() > MAX_FANOUT {
                Some((*id, Helper::Cat))
            } else if n.is_helper(Helper::Split) && n.outputs.len() > MAX_FANOUT {
                Some((*id, Helper::Split))
            } else {
                None
            }
        });
        q = match wide {
            Some((id, Helper::Cat)) => transform::concat_concat(&q, id, MAX_FANOUT).expect("arity above the bound"),
            Some((id, _)) => transform::split_split(&q, id, MAX_FANOUT).expect("arity above the bound"),
            None => return q,
        };
    }
}

/// Lays the program out as a shell block: a FIFO per edge in a fresh
/// temporary directory, copiers between the interface edges and their
/// files, one background process per node, then `wait` and cleanup.
pub fn emit(p: &DfgProgram, opts: &EmitOptions) -> Result<String, EmitError> {
    let p = &prepare(p);
    let edges = p.edges();
    let fifo: BTreeMap<EdgeId, String> = edges
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, format!("$odfm_d/p{}", i + 1)))
        .collect();
    let l = Layout { fifo };
    let base = match &opts.temp_dir {
        Some(d) => dq(d),
        None => "${TMPDIR:-/tmp}".to_string(),
    };

    let mut s = String::from("{\n");
    let _ = writeln!(s, "odfm_d=$(mktemp -d \"{base}/odfm.XXXXXX\")");
    if p.nodes.values().any(|n| n.is_helper(Helper::Split) && n.outputs.len() > 1) {
        s.push_str(SPLIT_FN);
        s.push('\n');
    }
    if uses(p, "bc") {
        s.push_str(BC_FN);
        s.push('\n');
    }
    if !edges.is_empty() {
        let all: Vec<String> = edges.iter().map(|e| l.path(*e)).collect();
        let _ = writeln!(s, "mkfifo {}", all.join(" "));
    }
    let reads_stdin = p.inputs.iter().any(|e| p.bindings.get(e) == Some(&Binding::Stdin));
    if reads_stdin {
        s.push_str("exec 9<&0\n");
    }
    for e in &p.inputs {
        let src = match p.bindings.get(e) {
            Some(Binding::File(f)) => shell_quote(f),
            Some(Binding::Stdin) => "<&9".to_string(),
            _ => return Err(EmitError::Unbound(*e)),
        };
        let _ = writeln!(s, "cat {src} > {} &", l.path(*e));
    }
    for id in p.topo_order() {
        let n = &p.nodes[&id];
        let line = match &n.function {
            NodeFunction::Helper(h) => helper_line(*h, n, &l),
            NodeFunction::Command(c) => command_line(id, n, c, &l)?,
        };
        let _ = writeln!(s, "{line} &");
    }
    for e in &p.outputs {
        let dst = match p.bindings.get(e) {
            Some(Binding::File(f)) => format!(" > {}", shell_quote(f)),
            Some(Binding::AppendFile(f)) => format!(" >> {}", shell_quote(f)),
            Some(Binding::Stdout) => String::new(),
            _ => return Err(EmitError::Unbound(*e)),
        };
        let _ = writeln!(s, "cat {}{dst} &", l.path(*e));
    }
    s.push_str("wait\n");
    if reads_stdin {
        s.push_str("exec 9<&-\n");
    }
    s.push_str("rm -rf \"$odfm_d\"\n}");
    Ok(s)
}
