//! Semantics-preserving rewrites of dataflow programs and the optimizer
//! that uses them to expose data parallelism.
//!
//! Every rewrite takes a program and the nodes it applies to, checks that
//! they form the expected pattern, and returns a new valid program. Only
//! the matched nodes change; the rest of the graph is left as is.

mod optimize;
mod parallel;
mod rules;

use std::fmt;

use thiserror::Error;

use crate::odfm::{validate, DfgNode, DfgProgram, Helper, NodeId, Violation};

pub use optimize::{optimize, optimize_report, Optimized, OptimizerConfig};
pub use parallel::apply_parallel;
pub use rules::{
    concat_concat, concat_split, insert_relay, merge_concat_concat, merge_split_concat, merge_split_split,
    merge_tee_concat, one_concat, one_split, relay_to_one_concat, relay_to_one_split, remove_relay,
    sequential_consumption, split_concat, split_split, tee_concat,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Relay,
    SplitSplit,
    ConcatConcat,
    SplitConcat,
    TeeConcat,
    OneConcat,
    OneSplit,
    ConcatSplit,
    Parallel,
    SequentialConsumption,
}

impl Rule {
    pub const AUXILIARY: [Rule; 8] = [
        Rule::Relay,
        Rule::SplitSplit,
        Rule::ConcatConcat,
        Rule::SplitConcat,
        Rule::TeeConcat,
        Rule::OneConcat,
        Rule::OneSplit,
        Rule::ConcatSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Relay => "relay",
            Rule::SplitSplit => "split-split",
            Rule::ConcatConcat => "concat-concat",
            Rule::SplitConcat => "split-concat",
            Rule::TeeConcat => "tee-concat",
            Rule::OneConcat => "one-concat",
            Rule::OneSplit => "one-split",
            Rule::ConcatSplit => "concat-split",
            Rule::Parallel => "parallel",
            Rule::SequentialConsumption => "sequential-consumption",
        }
    }

    /// Whether the rewrite may also be applied right to left.
    pub fn bidirectional(self) -> bool {
        !matches!(self, Rule::ConcatSplit | Rule::Parallel | Rule::SequentialConsumption)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("{rule}: {message}")]
    PatternMismatch { rule: Rule, message: String },
    #[error("{rule}: cannot apply to a node of arity {arity}")]
    Arity { rule: Rule, arity: usize },
    #[error("concat-split needs equal arity, found {fan_in} inputs and {fan_out} outputs")]
    ArityMismatch { fan_in: usize, fan_out: usize },
    #[error("node {0} is neither stateless nor data parallel")]
    NotDataParallel(NodeId),
    #[error("node {0} does not read its data from a cat node")]
    MissingCatPredecessor(NodeId),
    #[error("optimization did not settle within {passes} rewrites")]
    PassBudgetExceeded { passes: usize, best: Box<DfgProgram> },
    #[error("rewrite produced an invalid program: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

pub(crate) fn mismatch(rule: Rule, message: impl Into<String>) -> TransformError {
    TransformError::PatternMismatch {
        rule,
        message: message.into(),
    }
}

pub(crate) fn checked(p: DfgProgram) -> Result<DfgProgram, TransformError> {
    validate(&p).map_err(TransformError::Invalid)?;
    Ok(p)
}

/// The node `id`, which must be helper `h`.
pub(crate) fn expect_helper(p: &DfgProgram, id: NodeId, h: Helper, rule: Rule) -> Result<&DfgNode, TransformError> {
    match p.node(id) {
        Some(n) if n.is_helper(h) => Ok(n),
        Some(_) => Err(mismatch(rule, format!("{id} is not a {} node", h.name()))),
        None => Err(mismatch(rule, format!("no node {id}"))),
    }
}

/// True when some cat node's only consumer is a split of the same arity.
pub fn has_cat_split_pair(p: &DfgProgram) -> bool {
    cat_split_pairs(p).next().is_some()
}

/// Every cat node whose output feeds a split with as many outputs.
pub fn cat_split_pairs(p: &DfgProgram) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
    p.nodes.iter().filter_map(move |(id, n)| {
        if !n.is_helper(Helper::Cat) {
            return None;
        }
        let s = p.consumer(n.outputs[0])?;
        let sn = &p.nodes[&s];
        (sn.is_helper(Helper::Split) && sn.outputs.len() == n.inputs.len()).then_some((*id, s))
    })
}

#[cfg(test)]
mod tests;
