//! Random programs, inputs and rewrite sites for property tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::annotations::Registry;
use crate::interp::{self, RoundRobin, RunOptions, StreamValue};
use crate::odfm::{parse_program, DfgNode, DfgProgram, EdgeId, Helper, NodeId};
use crate::transform::{self, OptimizerConfig, Rule, TransformError};

const UNARY: &[&str] = &[
    "tr a-z A-Z",
    "grep a",
    "sed s/a/x/g",
    "cut -c 1-2",
    "sort",
    "sort -r",
    "uniq",
    "wc -l",
    "grep -c b",
    "tr -cs a-z '\\n'",
];

const STATELESS: &[&str] = &["tr a-z A-Z", "grep a", "sed s/b/y/", "cut -c 2-", "tr -d c"];

/// Incremental builder for the text form of a program.
struct Builder {
    next: u32,
    header: String,
    body: String,
    open: Vec<u32>,
}

impl Builder {
    fn new(inputs: usize) -> Builder {
        let mut b = Builder {
            next: 1,
            header: String::new(),
            body: String::new(),
            open: Vec::new(),
        };
        for _ in 0..inputs {
            let x = b.fresh();
            b.header.push_str(&format!("input x{x}\n"));
            b.open.push(x);
        }
        b
    }

    fn fresh(&mut self) -> u32 {
        self.next += 1;
        self.next - 1
    }

    fn take(&mut self) -> u32 {
        self.open.remove(0)
    }

    fn unary(&mut self, cmd: &str) {
        let x = self.take();
        let y = self.fresh();
        self.body.push_str(&format!("x{y} <- `{cmd} <@i0 >@o0`(x{x})\n"));
        self.open.push(y);
    }

    fn line(&mut self, l: String) {
        self.body.push_str(&l);
        self.body.push('\n');
    }

    fn finish(mut self, registry: &Registry) -> DfgProgram {
        for o in &self.open {
            self.header.push_str(&format!("output x{o}\n"));
        }
        self.header.push_str(&self.body);
        parse_program(&self.header, registry).expect("generated program parses")
    }
}

fn list(v: &[u32]) -> String {
    v.iter().map(|e| format!("x{e}")).collect::<Vec<_>>().join(",")
}

/// A random valid program with at most `max_nodes` nodes mixing helpers
/// and commands of every consumption discipline.
pub fn random_program<R: Rng>(rng: &mut R, max_nodes: usize) -> DfgProgram {
    let registry = Registry::builtin();
    let mut b = Builder::new(rng.gen_range(1..4));
    let nodes = rng.gen_range(1..=max_nodes.max(1));
    for _ in 0..nodes {
        let kind = rng.gen_range(0..12);
        let k = rng.gen_range(1..4);
        match kind {
            0 => {
                let x = b.take();
                let y = b.fresh();
                b.line(format!("x{y} <- relay(x{x})"));
                b.open.push(y);
            }
            1 | 2 => {
                let x = b.take();
                let outs: Vec<u32> = (0..k).map(|_| b.fresh()).collect();
                let h = if kind == 1 { "split" } else { "tee" };
                b.line(format!("{} <- {h}(x{x})", list(&outs)));
                b.open.extend(outs);
            }
            3 => {
                let mut ins = vec![b.take()];
                while ins.len() < k && !b.open.is_empty() {
                    ins.push(b.take());
                }
                let y = b.fresh();
                b.line(format!("x{y} <- cat({})", list(&ins)));
                b.open.push(y);
            }
            4..=8 => b.unary(UNARY[rng.gen_range(0..UNARY.len())]),
            _ if b.open.len() < 2 => b.unary("sort -r"),
            _ => {
                let x = b.take();
                let z = b.take();
                let y = b.fresh();
                let cmd = match kind {
                    9 => "`sort -m @i0 @i1 >@o0`",
                    10 => "`paste -d: @i0 @i1 >@o0`",
                    _ => "`grep -vx -f @i0 <@i1 >@o0`",
                };
                b.line(format!("x{y} <- {cmd}(x{x},x{z})"));
                b.open.push(y);
            }
        }
    }
    b.finish(&registry)
}

/// A random program without split helpers: pipelines of commands, cats,
/// tees, configuration inputs and multi-input sequential commands.
pub fn random_pipeline<R: Rng>(rng: &mut R) -> DfgProgram {
    let registry = Registry::builtin();
    let mut b = Builder::new(rng.gen_range(1..4));
    for _ in 0..rng.gen_range(1..6) {
        match rng.gen_range(0..10) {
            0 => {
                let mut ins = vec![b.take()];
                if !b.open.is_empty() {
                    ins.push(b.take());
                }
                let y = b.fresh();
                b.line(format!("x{y} <- cat({})", list(&ins)));
                b.open.push(y);
            }
            1 => {
                let x = b.take();
                let outs = [b.fresh(), b.fresh()];
                b.line(format!("{} <- tee(x{x})", list(&outs)));
                b.open.extend(outs);
            }
            2 if b.open.len() >= 2 => {
                let x = b.take();
                let z = b.take();
                let y = b.fresh();
                b.line(format!("x{y} <- `cat @i0 @i1 >@o0`(x{x},x{z})"));
                b.open.push(y);
            }
            3 if b.open.len() >= 2 => {
                let x = b.take();
                let z = b.take();
                let y = b.fresh();
                b.line(format!("x{y} <- `grep -vx -f @i0 <@i1 >@o0`(x{x},x{z})"));
                b.open.push(y);
            }
            _ => b.unary(UNARY[rng.gen_range(0..UNARY.len())]),
        }
    }
    b.finish(&registry)
}

/// A chain of two to four commands, stateless or data parallel.
pub fn random_chain<R: Rng>(rng: &mut R) -> DfgProgram {
    let registry = Registry::builtin();
    let mut b = Builder::new(1);
    for _ in 0..rng.gen_range(2..5) {
        let pool = if rng.gen_bool(0.6) { STATELESS } else { UNARY };
        b.unary(pool[rng.gen_range(0..pool.len())]);
    }
    b.finish(&registry)
}

const WORDS: &[&str] = &["a", "b", "ab", "ba", "c", "a b", "", "bca", "b a c"];

/// Closed random inputs of at most `max_lines` lines for every input edge.
pub fn random_inputs<R: Rng>(rng: &mut R, p: &DfgProgram, max_lines: usize) -> BTreeMap<EdgeId, StreamValue> {
    p.inputs
        .iter()
        .map(|e| {
            let n = rng.gen_range(0..=max_lines);
            let v = (0..n).map(|_| WORDS.choose(rng).expect("non-empty").to_string()).collect();
            (*e, StreamValue::closed(v))
        })
        .collect()
}

/// Output streams of `p` under a round-robin schedule.
pub fn outputs(p: &DfgProgram, inputs: &BTreeMap<EdgeId, StreamValue>) -> BTreeMap<EdgeId, StreamValue> {
    interp::run(p, inputs.clone(), &mut RoundRobin::new(), RunOptions::default()).expect("program runs")
}

fn pick<R: Rng, T: Copy>(rng: &mut R, v: &[T]) -> Option<T> {
    v.choose(rng).copied()
}

fn connected_edges(p: &DfgProgram) -> Vec<EdgeId> {
    p.edges()
        .into_iter()
        .filter(|e| p.consumer(*e).is_some() || p.producer(*e).is_some())
        .collect()
}

/// A relay followed by an `n`-way split/cat pair on a random edge.
fn with_split_cat<R: Rng>(rng: &mut R, p: &DfgProgram, n: usize) -> Result<(DfgProgram, NodeId, NodeId), TransformError> {
    let e = pick(rng, &connected_edges(p)).expect("programs have edges");
    let (q, r) = transform::insert_relay(p, e)?;
    transform::split_concat(&q, r, n)
}

/// A program containing a site for `rule`, and the result of applying the
/// rule there. Both are valid; `None` when no site could be built.
pub fn rule_site<R: Rng>(rng: &mut R, rule: Rule, registry: &Registry) -> Option<(DfgProgram, DfgProgram)> {
    let base = random_pipeline(rng);
    let r = (|| -> Result<Option<(DfgProgram, DfgProgram)>, TransformError> {
        Ok(match rule {
            Rule::Relay => {
                let e = pick(rng, &connected_edges(&base)).expect("edges");
                let (after, relay) = transform::insert_relay(&base, e)?;
                let back = transform::remove_relay(&after, relay)?;
                Some((back, after))
            }
            Rule::SplitSplit => {
                let m = rng.gen_range(2..6);
                let (before, split, _) = with_split_cat(rng, &base, m)?;
                let after = transform::split_split(&before, split, rng.gen_range(1..m))?;
                Some((before, after))
            }
            Rule::ConcatConcat => {
                let m = rng.gen_range(2..6);
                let (before, _, cat) = with_split_cat(rng, &base, m)?;
                let after = transform::concat_concat(&before, cat, rng.gen_range(1..m))?;
                Some((before, after))
            }
            Rule::SplitConcat => {
                let e = pick(rng, &connected_edges(&base)).expect("edges");
                let (before, relay) = transform::insert_relay(&base, e)?;
                let (after, _, _) = transform::split_concat(&before, relay, rng.gen_range(1..6))?;
                Some((before, after))
            }
            Rule::TeeConcat => {
                let n = rng.gen_range(1..5);
                let (mut before, _, cat) = with_split_cat(rng, &base, n)?;
                let y = before.nodes[&cat].outputs[0];
                let fresh = before.fresh_edges(2).expect("two edges");
                let (y1, y2) = (fresh[0], fresh[1]);
                if let Some(c) = before.consumer(y) {
                    for e in &mut before.nodes.get_mut(&c).expect("consumer").inputs {
                        if *e == y {
                            *e = y1;
                        }
                    }
                } else {
                    let pos = before.outputs.iter().position(|o| *o == y).expect("output");
                    before.outputs[pos] = y1;
                    if let Some(b) = before.bindings.remove(&y) {
                        before.bindings.insert(y1, b);
                    }
                }
                before.outputs.push(y2);
                let tee = before.add_node(DfgNode::helper(Helper::Tee, vec![y], vec![y1, y2]));
                let after = transform::tee_concat(&before, cat, tee)?;
                Some((before, after))
            }
            Rule::OneConcat => {
                let e = pick(rng, &connected_edges(&base)).expect("edges");
                let (q, relay) = transform::insert_relay(&base, e)?;
                let before = transform::relay_to_one_concat(&q, relay)?;
                Some((before.clone(), transform::one_concat(&before, relay)?))
            }
            Rule::OneSplit => {
                let e = pick(rng, &connected_edges(&base)).expect("edges");
                let (q, relay) = transform::insert_relay(&base, e)?;
                let before = transform::relay_to_one_split(&q, relay)?;
                Some((before.clone(), transform::one_split(&before, relay)?))
            }
            Rule::ConcatSplit => {
                let chain = random_chain(rng);
                let config = OptimizerConfig {
                    width: rng.gen_range(2..5),
                    enable_concat_split: false,
                    ..OptimizerConfig::default()
                };
                let before = transform::optimize(&chain, registry, config)?;
                let pairs: Vec<(NodeId, NodeId)> = transform::cat_split_pairs(&before).collect();
                match pick(rng, &pairs) {
                    Some((cat, split)) => {
                        let after = transform::concat_split(&before, cat, split)?;
                        Some((before, after))
                    }
                    None => None,
                }
            }
            Rule::Parallel => {
                let mut before = base.clone();
                let candidates: Vec<NodeId> = before
                    .nodes
                    .iter()
                    .filter(|(_, n)| n.as_command().is_some_and(|c| c.class.is_parallelizable()))
                    .map(|(id, _)| *id)
                    .collect();
                let Some(f) = pick(rng, &candidates) else {
                    return Ok(None);
                };
                let n = &before.nodes[&f];
                let c = n.as_command().expect("command");
                if c.stdin.is_none() || n.inputs.len() != c.choice.configs().len() + 1 {
                    before = transform::sequential_consumption(&before, f)?;
                }
                let n = &before.nodes[&f];
                let Some(c) = n.as_command() else {
                    return Ok(None);
                };
                let data = n.inputs[c.stdin.expect("stdin")];
                let (q, relay) = transform::insert_relay(&before, data)?;
                let (q, _, cat) = transform::split_concat(&q, relay, rng.gen_range(1..6))?;
                let after = transform::apply_parallel(&q, cat, f, registry)?;
                Some((q, after))
            }
            Rule::SequentialConsumption => {
                let candidates: Vec<NodeId> = base
                    .nodes
                    .iter()
                    .filter(|(_, n)| n.as_command().is_some_and(|c| c.choice.is_sequential()))
                    .map(|(id, _)| *id)
                    .collect();
                match pick(rng, &candidates) {
                    Some(f) => Some((base.clone(), transform::sequential_consumption(&base, f)?)),
                    None => None,
                }
            }
        })
    })();
    r.expect("rewrite applies at the chosen site")
}

/// Applies `rule` at random sites until `count` comparisons were made;
/// returns the first mismatch found.
pub fn check_rule<R: Rng>(rng: &mut R, rule: Rule, count: usize) -> Result<usize, String> {
    let registry = Registry::builtin();
    let mut done = 0;
    let mut attempts = 0;
    while done < count {
        attempts += 1;
        if attempts > count * 20 {
            return Err(format!("only {done} sites found for {rule}"));
        }
        let Some((before, after)) = rule_site(rng, rule, &registry) else {
            continue;
        };
        let inputs = random_inputs(rng, &before, 12);
        let (a, b) = (outputs(&before, &inputs), outputs(&after, &inputs));
        if a != b {
            return Err(format!(
                "{rule} changed the outputs\nbefore:\n{before}\nafter:\n{after}\ninputs: {inputs:?}\n{a:?}\n{b:?}"
            ));
        }
        done += 1;
    }
    Ok(done)
}
