//! Strategies for picking the next enabled step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::odfm::NodeId;

/// Picks one of the enabled `(node, input index)` pairs. `enabled` is never
/// empty and is sorted by node id, then input index.
pub trait Scheduler {
    fn pick(&mut self, enabled: &[(NodeId, usize)]) -> usize;
}

/// Visits nodes in turn, starting after the node stepped last.
#[derive(Debug, Default)]
pub struct RoundRobin {
    last: Option<NodeId>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Scheduler for RoundRobin {
    fn pick(&mut self, enabled: &[(NodeId, usize)]) -> usize {
        let i = match self.last {
            Some(l) => enabled.iter().position(|(n, _)| *n > l).unwrap_or(0),
            None => 0,
        };
        self.last = Some(enabled[i].0);
        i
    }
}

/// Uniformly random choice from a seeded generator.
#[derive(Debug)]
pub struct Random {
    rng: ChaCha8Rng,
}

impl Random {
    pub fn new(seed: u64) -> Self {
        Random {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for Random {
    fn pick(&mut self, enabled: &[(NodeId, usize)]) -> usize {
        self.rng.gen_range(0..enabled.len())
    }
}

/// Always the last enabled pair: favors downstream nodes and late inputs.
#[derive(Debug, Default)]
pub struct Lifo;

impl Scheduler for Lifo {
    fn pick(&mut self, enabled: &[(NodeId, usize)]) -> usize {
        enabled.len() - 1
    }
}

/// Always the first enabled pair.
#[derive(Debug, Default)]
pub struct Fifo;

impl Scheduler for Fifo {
    fn pick(&mut self, _enabled: &[(NodeId, usize)]) -> usize {
        0
    }
}
