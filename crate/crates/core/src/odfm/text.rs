//! Line-oriented text form of a program.
//!
//! ```text
//! input x1 file:f1.md
//! input x2 file:dict.txt
//! output x6 stdout
//! x3,x4 <- split(x1)
//! x5 <- `grep -vx -f @i0 - <@i1 >@o0`(x2,x3) :: cfg:0 :: stateless
//! x6 <- cat(x5,x4)
//! ```
//!
//! Command nodes are written as a backquoted shell command in which `@iN`
//! and `@oN` stand for input and output `N`. The optional `:: choice ::
//! class [:: map :: agg]` suffix records how the node consumes its inputs
//! and how it parallelizes; when absent, both are looked up in the
//! annotation registry.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{Arg, Binding, CommandNode, DfgNode, DfgProgram, EdgeId, Helper, NodeFunction, NodeMetadata};
use crate::annotations::{ArgRole, ChoiceKind, CommandTemplate, InputSource, ParallelClass, Registry};
use crate::shell_ast::{parse, unquote, RedirDirection, ShellAst, SimpleCommand};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("IR line {line}: {message}")]
pub struct IrParseError {
    pub line: usize,
    pub message: String,
}

fn choice_text(c: &ChoiceKind) -> String {
    match c {
        ChoiceKind::Sequential => "seq".to_string(),
        ChoiceKind::AnyOrder => "any".to_string(),
        ChoiceKind::ConfigThenSequential(s) => {
            let idx: Vec<String> = s.iter().map(|i| i.to_string()).collect();
            format!("cfg:{}", idx.join(","))
        }
    }
}

fn class_text(c: &ParallelClass) -> String {
    match c {
        ParallelClass::NotParallelizable => "none".to_string(),
        ParallelClass::Stateless => "stateless".to_string(),
        ParallelClass::DataParallel { map, agg } => format!(
            "dp :: {} :: {agg}",
            map.as_ref().map_or("-".to_string(), |m| m.to_string())
        ),
    }
}

/// Shell text of a command node with `@iN` / `@oN` placeholders.
pub(crate) fn command_text(c: &CommandNode) -> String {
    let mut parts: Vec<String> = c
        .metadata
        .assignments
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    parts.push(c.label());
    if let Some(i) = c.stdin {
        parts.push(format!("<@i{i}"));
    }
    if let Some(o) = c.stdout {
        parts.push(format!(">@o{o}"));
    }
    parts.extend(c.metadata.redirs.iter().map(|r| r.to_string()));
    let mut s = parts.join(" ");
    for stage in &c.then {
        s.push_str(" | ");
        s.push_str(&stage.join(" "));
    }
    s
}

fn edge_list(edges: &[EdgeId]) -> String {
    edges.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

pub(super) fn write_program(p: &DfgProgram) -> String {
    let mut out = String::new();
    for (kw, list) in [("input", &p.inputs), ("output", &p.outputs)] {
        for e in list {
            match p.bindings.get(e) {
                Some(b) => out.push_str(&format!("{kw} {e} {b}\n")),
                None => out.push_str(&format!("{kw} {e}\n")),
            }
        }
    }
    let mut order = p.topo_order();
    order.extend(p.nodes.keys().filter(|id| !order.contains(id)).copied().collect::<Vec<_>>());
    for id in order {
        let n = &p.nodes[&id];
        let body = match &n.function {
            NodeFunction::Helper(h) => h.name().to_string(),
            NodeFunction::Command(c) => format!("`{}`", command_text(c)),
        };
        out.push_str(&format!(
            "{} <- {body}({})",
            edge_list(&n.outputs),
            edge_list(&n.inputs)
        ));
        if let NodeFunction::Command(c) = &n.function {
            out.push_str(&format!(" :: {} :: {}", choice_text(&c.choice), class_text(&c.class)));
        }
        out.push('\n');
    }
    out
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(.*)@([io])(\d+)$").expect("valid regex"))
}

struct LineParser<'a> {
    line: usize,
    registry: &'a Registry,
}

impl LineParser<'_> {
    fn err(&self, message: impl Into<String>) -> IrParseError {
        IrParseError {
            line: self.line,
            message: message.into(),
        }
    }

    fn edge(&self, s: &str) -> Result<EdgeId, IrParseError> {
        s.trim()
            .strip_prefix('x')
            .and_then(|n| n.parse().ok())
            .map(EdgeId)
            .ok_or_else(|| self.err(format!("invalid edge name {s:?}")))
    }

    fn edges(&self, s: &str) -> Result<Vec<EdgeId>, IrParseError> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|e| self.edge(e)).collect()
    }

    fn binding(&self, s: &str) -> Result<Binding, IrParseError> {
        Ok(match s {
            "stdin" => Binding::Stdin,
            "stdout" => Binding::Stdout,
            _ => match s.split_once(':') {
                Some(("file", n)) => Binding::File(n.to_string()),
                Some(("append", n)) => Binding::AppendFile(n.to_string()),
                Some(("pipe", n)) => Binding::Pipe(n.to_string()),
                _ => return Err(self.err(format!("unknown binding {s:?}"))),
            },
        })
    }

    fn node(&self, text: &str) -> Result<DfgNode, IrParseError> {
        let (lhs, rhs) = text
            .split_once(" <- ")
            .ok_or_else(|| self.err("expected `outputs <- function(inputs)`"))?;
        let outputs = self.edges(lhs)?;
        let rhs = rhs.trim();
        if let Some(rest) = rhs.strip_prefix('`') {
            let close = rest.find('`').ok_or_else(|| self.err("unterminated command"))?;
            let cmd_text = &rest[..close];
            let after = &rest[close + 1..];
            let open = after
                .strip_prefix('(')
                .ok_or_else(|| self.err("expected `(` after command"))?;
            let end = open.find(')').ok_or_else(|| self.err("expected `)`"))?;
            let inputs = self.edges(&open[..end])?;
            let suffix = open[end + 1..].trim();
            let cmd = self.command(cmd_text, suffix)?;
            Ok(DfgNode {
                inputs,
                outputs,
                function: NodeFunction::Command(cmd),
            })
        } else {
            let open = rhs.find('(').ok_or_else(|| self.err("expected `(`"))?;
            let helper = match &rhs[..open] {
                "split" => Helper::Split,
                "cat" => Helper::Cat,
                "tee" => Helper::Tee,
                "relay" => Helper::Relay,
                other => return Err(self.err(format!("unknown helper {other:?}"))),
            };
            let inner = rhs[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| self.err("expected `)` at end of line"))?;
            Ok(DfgNode::helper(helper, self.edges(inner)?, outputs))
        }
    }

    fn command(&self, text: &str, suffix: &str) -> Result<CommandNode, IrParseError> {
        let ast = parse(text).map_err(|e| self.err(e.to_string()))?;
        let stages: Vec<SimpleCommand> = match ast {
            ShellAst::Simple(c) => vec![c],
            ShellAst::Pipeline {
                commands,
                background: false,
            } => commands
                .into_iter()
                .map(|c| match c {
                    ShellAst::Simple(s) => Ok(s),
                    _ => Err(self.err("command stages must be simple commands")),
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(self.err("command must be a simple command or a pipeline")),
        };
        let mut stages = stages.into_iter();
        let first = stages.next().expect("at least one stage");
        let mut argv = Vec::new();
        for raw in first.word.fields() {
            argv.push(match placeholder_re().captures(raw) {
                Some(c) => {
                    let idx: usize = c[3].parse().map_err(|_| self.err("bad placeholder"))?;
                    if &c[2] == "i" {
                        Arg::Input {
                            idx,
                            prefix: c[1].to_string(),
                        }
                    } else if c[1].is_empty() {
                        Arg::Output(idx)
                    } else {
                        return Err(self.err("output placeholders cannot have a prefix"));
                    }
                }
                None => Arg::Lit(raw.to_string()),
            });
        }
        let mut stdin = None;
        let mut stdout = None;
        let mut metadata = NodeMetadata {
            assignments: first
                .assignments
                .iter()
                .map(|(n, w)| (n.clone(), w.to_string()))
                .collect(),
            redirs: Vec::new(),
        };
        for r in first.redirs {
            let slot = match (r.fd, r.direction, placeholder_re().captures(&r.target)) {
                (0, RedirDirection::Input, Some(c)) if &c[2] == "i" && c[1].is_empty() => {
                    Some((&mut stdin, c[3].parse().ok()))
                }
                (1, RedirDirection::Output, Some(c)) if &c[2] == "o" && c[1].is_empty() => {
                    Some((&mut stdout, c[3].parse().ok()))
                }
                _ => None,
            };
            match slot {
                Some((dst, Some(i))) => *dst = Some(i),
                Some((_, None)) => return Err(self.err("bad placeholder")),
                None => metadata.redirs.push(r),
            }
        }
        let then: Vec<Vec<String>> = stages
            .map(|s| s.word.fields().into_iter().map(str::to_string).collect())
            .collect();
        let mut node = CommandNode {
            argv,
            stdin,
            stdout,
            then,
            metadata,
            choice: ChoiceKind::Sequential,
            class: ParallelClass::NotParallelizable,
        };
        if suffix.is_empty() {
            self.annotate_from_registry(&mut node)?;
        } else {
            self.annotate_from_suffix(&mut node, suffix)?;
        }
        Ok(node)
    }

    fn annotate_from_suffix(&self, node: &mut CommandNode, suffix: &str) -> Result<(), IrParseError> {
        let rest = suffix
            .strip_prefix("::")
            .ok_or_else(|| self.err("expected `::` before the annotation suffix"))?;
        let parts: Vec<&str> = rest.splitn(4, " :: ").map(str::trim).collect();
        node.choice = match parts[0] {
            "seq" => ChoiceKind::Sequential,
            "any" => ChoiceKind::AnyOrder,
            s => match s.strip_prefix("cfg:") {
                Some(list) => ChoiceKind::ConfigThenSequential(
                    list.split(',')
                        .map(|i| i.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| self.err(format!("invalid config list {list:?}")))?,
                ),
                None => return Err(self.err(format!("unknown choice {s:?}"))),
            },
        };
        node.class = match parts.get(1).copied() {
            Some("none") => ParallelClass::NotParallelizable,
            Some("stateless") => ParallelClass::Stateless,
            Some("dp") => {
                let (Some(map), Some(agg)) = (parts.get(2), parts.get(3)) else {
                    return Err(self.err("dp needs `:: map :: agg`"));
                };
                let map = if *map == "-" {
                    None
                } else {
                    Some(CommandTemplate::parse(map).map_err(|e| self.err(e))?)
                };
                let agg = CommandTemplate::parse(agg).map_err(|e| self.err(e))?;
                ParallelClass::DataParallel { map, agg }
            }
            other => return Err(self.err(format!("unknown class {other:?}"))),
        };
        Ok(())
    }

    fn annotate_from_registry(&self, node: &mut CommandNode) -> Result<(), IrParseError> {
        if !node.then.is_empty() {
            return Err(self.err("multi-stage commands need an explicit annotation suffix"));
        }
        annotate(node, self.registry).map_err(|e| self.err(e))
    }
}

/// Looks the command up as if every input were a plain file and maps the
/// registry's input numbering onto the node's. Trailing stages are ignored.
pub(crate) fn annotate(node: &mut CommandNode, registry: &Registry) -> Result<(), String> {
    let words: Vec<String> = node
        .argv
        .iter()
        .map(|a| match a {
            Arg::Lit(raw) => unquote(raw),
            Arg::Input { prefix, idx } => format!("{prefix}@i{idx}"),
            Arg::Output(idx) => format!("@o{idx}"),
        })
        .collect();
    let Some((name, args)) = words.split_first() else {
        return Err("empty command".to_string());
    };
    let ann = registry
        .lookup(name, args)
        .ok_or_else(|| format!("`{name}` has no annotation; add a `::` suffix"))?;
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for (ann_idx, src) in ann.inputs.iter().enumerate() {
        let ours = match src {
            InputSource::Stdin => node.stdin,
            InputSource::Arg(pos) => match (&ann.roles[*pos], node.argv.get(pos + 1)) {
                (ArgRole::Input { .. }, Some(Arg::Input { idx, .. })) => Some(*idx),
                _ => None,
            },
        };
        let ours = ours.ok_or("node inputs do not match the annotation")?;
        map.insert(ann_idx, ours);
    }
    node.choice = match ann.choice {
        ChoiceKind::ConfigThenSequential(c) => {
            ChoiceKind::ConfigThenSequential(c.iter().map(|i| map[i]).collect())
        }
        other => other,
    };
    node.class = ann.class;
    Ok(())
}

/// Parses the text form; command nodes without a suffix are annotated from
/// `registry`.
pub fn parse_program(text: &str, registry: &Registry) -> Result<DfgProgram, IrParseError> {
    let mut p = DfgProgram::new();
    for (n, raw_line) in text.lines().enumerate() {
        let lp = LineParser {
            line: n + 1,
            registry,
        };
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let header = line
            .strip_prefix("input ")
            .map(|r| (true, r))
            .or_else(|| line.strip_prefix("output ").map(|r| (false, r)));
        if let Some((is_input, rest)) = header {
            let (edge, binding) = match rest.trim().split_once(' ') {
                Some((e, b)) => (lp.edge(e)?, Some(lp.binding(b.trim())?)),
                None => (lp.edge(rest)?, None),
            };
            if is_input {
                p.inputs.push(edge);
            } else {
                p.outputs.push(edge);
            }
            if let Some(b) = binding {
                p.bindings.insert(edge, b);
            }
            continue;
        }
        let node = lp.node(line)?;
        p.add_node(node);
    }
    Ok(p)
}
