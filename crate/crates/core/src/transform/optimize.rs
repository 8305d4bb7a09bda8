use crate::annotations::Registry;
use crate::odfm::{DfgProgram, Helper, NodeId};

use super::rules::{self, reads_one_stdin};
use super::{apply_parallel, cat_split_pairs, Rule, TransformError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizerConfig {
    /// Number of parallel copies of each parallelizable command.
    pub width: usize,
    /// Remove cat/split pairs between consecutive parallel stages.
    pub enable_concat_split: bool,
    /// Upper bound on rewrite applications.
    pub max_passes: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            width: 16,
            enable_concat_split: true,
            max_passes: 100_000,
        }
    }
}

/// Result of [`optimize_report`].
#[derive(Debug, Clone)]
pub struct Optimized {
    pub program: DfgProgram,
    /// Commands that were replaced by parallel copies.
    pub parallelized: usize,
    /// Rewrites applied, in order.
    pub rewrites: Vec<Rule>,
}

struct Driver<'a> {
    p: DfgProgram,
    registry: &'a Registry,
    budget: usize,
    rewrites: Vec<Rule>,
}

impl Driver<'_> {
    fn apply(
        &mut self,
        rule: Rule,
        f: impl FnOnce(&DfgProgram) -> Result<DfgProgram, TransformError>,
    ) -> Result<(), TransformError> {
        if self.rewrites.len() >= self.budget {
            return Err(TransformError::PassBudgetExceeded {
                passes: self.rewrites.len(),
                best: Box::new(self.p.clone()),
            });
        }
        self.p = f(&self.p)?;
        self.rewrites.push(rule);
        Ok(())
    }

    fn candidates_for_funnel(&self) -> Vec<NodeId> {
        self.p
            .topo_order()
            .into_iter()
            .filter(|id| {
                let n = &self.p.nodes[id];
                let Some(c) = n.as_command() else { return false };
                let bare_cat = c.name() == "cat" && c.choice.is_sequential();
                (c.class.is_parallelizable() || bare_cat) && c.choice.is_sequential() && !reads_one_stdin(n)
            })
            .collect()
    }

    fn parallelize(&mut self, id: NodeId, width: usize) -> Result<bool, TransformError> {
        let Some(n) = self.p.node(id) else { return Ok(false) };
        let Some(c) = n.as_command() else { return Ok(false) };
        if !c.class.is_parallelizable() || !reads_one_stdin(n) || n.outputs.len() != 1 || c.stdout != Some(0) {
            return Ok(false);
        }
        let data = n.inputs[c.stdin.expect("reads stdin")];
        let mut relay = None;
        self.apply(Rule::Relay, |p| {
            let (q, r) = rules::insert_relay(p, data)?;
            relay = Some(r);
            Ok(q)
        })?;
        let mut cat = None;
        self.apply(Rule::SplitConcat, |p| {
            let (q, _, c) = rules::split_concat(p, relay.expect("set"), width)?;
            cat = Some(c);
            Ok(q)
        })?;
        let cat = cat.expect("set");
        let registry = self.registry;
        self.apply(Rule::Parallel, |p| apply_parallel(p, cat, id, registry))?;
        Ok(true)
    }

    fn cleanup(&mut self) -> Result<(), TransformError> {
        loop {
            let one = self.p.nodes.iter().find_map(|(id, n)| {
                if n.is_helper(Helper::Cat) && n.inputs.len() == 1 {
                    Some((*id, Rule::OneConcat))
                } else if n.is_helper(Helper::Split) && n.outputs.len() == 1 {
                    Some((*id, Rule::OneSplit))
                } else {
                    None
                }
            });
            match one {
                Some((id, Rule::OneConcat)) => self.apply(Rule::OneConcat, |p| rules::one_concat(p, id))?,
                Some((id, _)) => self.apply(Rule::OneSplit, |p| rules::one_split(p, id))?,
                None => break,
            }
        }
        loop {
            let p = &self.p;
            let relay = p.nodes.iter().find_map(|(id, n)| {
                let removable = n.is_helper(Helper::Relay)
                    && !(p.inputs.contains(&n.inputs[0]) && p.outputs.contains(&n.outputs[0]));
                removable.then_some(*id)
            });
            match relay {
                Some(id) => self.apply(Rule::Relay, |p| rules::remove_relay(p, id))?,
                None => return Ok(()),
            }
        }
    }
}

/// Exposes data parallelism: funnels sequential inputs through cats,
/// replaces each parallelizable command by `width` copies, removes cat/split
/// pairs between stages (when enabled) and tidies up helpers.
pub fn optimize(p: &DfgProgram, registry: &Registry, config: OptimizerConfig) -> Result<DfgProgram, TransformError> {
    optimize_report(p, registry, config).map(|o| o.program)
}

pub fn optimize_report(p: &DfgProgram, registry: &Registry, config: OptimizerConfig) -> Result<Optimized, TransformError> {
    let mut d = Driver {
        p: p.clone(),
        registry,
        budget: config.max_passes,
        rewrites: Vec::new(),
    };
    for id in d.candidates_for_funnel() {
        d.apply(Rule::SequentialConsumption, |p| rules::sequential_consumption(p, id))?;
    }
    let mut parallelized = 0;
    if config.width >= 2 {
        let order: Vec<NodeId> = d
            .p
            .topo_order()
            .into_iter()
            .filter(|id| d.p.nodes[id].as_command().is_some_and(|c| c.class.is_parallelizable()))
            .collect();
        for id in order {
            if d.parallelize(id, config.width)? {
                parallelized += 1;
            }
        }
    }
    loop {
        d.cleanup()?;
        let pair = cat_split_pairs(&d.p).next().filter(|_| config.enable_concat_split);
        let Some((cat, split)) = pair else { break };
        d.apply(Rule::ConcatSplit, |p| rules::concat_split(p, cat, split))?;
    }
    Ok(Optimized {
        program: d.p,
        parallelized,
        rewrites: d.rewrites,
    })
}
