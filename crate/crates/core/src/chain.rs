//! Stochastic dynamics.
//!
//! [`SearchChain`] is the backward search chain over configurations: a node
//! whose 1-neighbors are at least as many as its 0-neighbors may switch, a
//! 1-node always drops to 0 and a 0-node rises with probability ε. Started
//! at all-ones it never leaves the set of configurations whose support is a
//! sufficient control set, and its invariant law is proportional to
//! `ε^‖x‖₁` there. Two kernels are offered:
//!
//! * [`Variant::Plain`]: activate a uniform node, possibly a self-loop.
//! * [`Variant::Jump`]: skip the self-loops and pick directly among feasible
//!   moves, weight 1 for drops and ε for rises.
//!
//! [`BestResponseDynamics`] is the asynchronous best-response chain, with an
//! optional set of nodes frozen at 1.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::ControlSet;
use crate::game::{BestResponse, Configuration, NeighborCount};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("no feasible move at step {step} (state left the reachable set?)")]
    Stuck { step: u64 },
    #[error("frozen node {0} is not at action 1")]
    FrozenAtZero(NodeId),
    #[error("configuration has length {got}, graph has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("number of trials must be positive")]
    NoTrials,
    #[error("invariant violated at step {step}: {msg}")]
    Invariant { step: u64, msg: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Plain,
    Jump,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Jump => "jump",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Variant::Plain),
            "jump" => Ok(Variant::Jump),
            other => Err(format!("unknown variant `{other}` (expected plain or jump)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub epsilon: f64,
    pub budget: u64,
    pub variant: Variant,
    pub seed: u64,
}

impl ChainParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.epsilon > 0.0 && self.epsilon <= 1.0 {
            Ok(())
        } else {
            Err(ChainError::InvalidEpsilon(self.epsilon))
        }
    }
}

/// Current configuration with cached potential and weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub x: Configuration,
    pub step: u64,
    pub phi: i64,
    pub ones: usize,
}

/// Indexed set with O(1) insert, remove and uniform access.
#[derive(Clone, Debug)]
struct MoveSet {
    items: Vec<NodeId>,
    slot: Vec<usize>,
}

impl MoveSet {
    const ABSENT: usize = usize::MAX;

    fn new(n: usize) -> Self {
        MoveSet {
            items: Vec::with_capacity(n),
            slot: vec![Self::ABSENT; n],
        }
    }

    fn insert(&mut self, i: NodeId) {
        if self.slot[i] == Self::ABSENT {
            self.slot[i] = self.items.len();
            self.items.push(i);
        }
    }

    fn remove(&mut self, i: NodeId) {
        let k = self.slot[i];
        if k == Self::ABSENT {
            return;
        }
        let last = *self.items.last().unwrap();
        self.items.swap_remove(k);
        if last != i {
            self.slot[last] = k;
        }
        self.slot[i] = Self::ABSENT;
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// The ε-search chain with incrementally maintained neighbor counts and
/// feasible-move sets.
#[derive(Clone, Debug)]
pub struct SearchChain<'g> {
    graph: &'g Graph,
    state: ChainState,
    ones_around: Vec<usize>,
    down: MoveSet,
    up: MoveSet,
}

impl<'g> SearchChain<'g> {
    /// Chain positioned at all-ones.
    pub fn new(graph: &'g Graph) -> Self {
        Self::from_configuration(graph, Configuration::ones(graph.node_count()))
            .expect("length matches")
    }

    pub fn from_configuration(graph: &'g Graph, x: Configuration) -> Result<Self, ChainError> {
        let n = graph.node_count();
        if x.len() != n {
            return Err(ChainError::LengthMismatch {
                got: x.len(),
                expected: n,
            });
        }
        let ones_around: Vec<usize> = (0..n)
            .map(|i| graph.neighbors(i).iter().filter(|&&j| x.get(j)).count())
            .collect();
        let phi = graph.edges().filter(|&(u, v)| x.get(u) == x.get(v)).count() as i64;
        let ones = x.count_ones();
        let mut chain = SearchChain {
            graph,
            state: ChainState { x, step: 0, phi, ones },
            ones_around,
            down: MoveSet::new(n),
            up: MoveSet::new(n),
        };
        for i in 0..n {
            chain.refresh(i);
        }
        Ok(chain)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    #[inline]
    fn feasible(&self, i: NodeId) -> bool {
        2 * self.ones_around[i] >= self.graph.degree(i)
    }

    #[inline]
    fn refresh(&mut self, i: NodeId) {
        self.down.remove(i);
        self.up.remove(i);
        if self.feasible(i) {
            if self.state.x.get(i) {
                self.down.insert(i);
            } else {
                self.up.insert(i);
            }
        }
    }

    /// Feasible drops `(x_i = 1)` and rises `(x_i = 0)`.
    pub fn feasible_moves(&self) -> (Vec<NodeId>, Vec<NodeId>) {
        let mut d = self.down.items.clone();
        let mut u = self.up.items.clone();
        d.sort_unstable();
        u.sort_unstable();
        (d, u)
    }

    fn flip(&mut self, i: NodeId) {
        let ones = self.ones_around[i] as i64;
        let zeros = self.graph.degree(i) as i64 - ones;
        let rising = !self.state.x.get(i);
        // agreeing edges at i swap between the two neighbor classes
        if rising {
            self.state.phi += ones - zeros;
            self.state.ones += 1;
        } else {
            self.state.phi += zeros - ones;
            self.state.ones -= 1;
        }
        self.state.x.set(i, rising);
        for &j in self.graph.neighbors(i) {
            if rising {
                self.ones_around[j] += 1;
            } else {
                self.ones_around[j] -= 1;
            }
            self.refresh(j);
        }
        self.refresh(i);
    }

    /// One step of the kernel with self-loops. Returns the flipped node.
    pub fn step_plain<R: Rng + ?Sized>(&mut self, epsilon: f64, rng: &mut R) -> Option<NodeId> {
        let i = rng.gen_range(0..self.graph.node_count());
        self.state.step += 1;
        if !self.feasible(i) {
            return None;
        }
        if self.state.x.get(i) || rng.gen_bool(epsilon) {
            self.flip(i);
            Some(i)
        } else {
            None
        }
    }

    /// One step of the self-loop-free kernel.
    pub fn step_jump<R: Rng + ?Sized>(
        &mut self,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<NodeId, ChainError> {
        let downs = self.down.len();
        let ups = self.up.len();
        if downs + ups == 0 {
            return Err(ChainError::Stuck {
                step: self.state.step,
            });
        }
        let total = downs as f64 + epsilon * ups as f64;
        let u = rng.gen::<f64>() * total;
        let i = if u < downs as f64 {
            self.down.items[(u as usize).min(downs - 1)]
        } else {
            let k = ((u - downs as f64) / epsilon) as usize;
            self.up.items[k.min(ups - 1)]
        };
        self.state.step += 1;
        self.flip(i);
        Ok(i)
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        variant: Variant,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Option<NodeId>, ChainError> {
        match variant {
            Variant::Plain => Ok(self.step_plain(epsilon, rng)),
            Variant::Jump => self.step_jump(epsilon, rng).map(Some),
        }
    }

    /// Recomputes every cache from scratch and compares.
    pub fn check_coherence(&self) -> Result<(), String> {
        let g = self.graph;
        let x = &self.state.x;
        let phi = g.edges().filter(|&(u, v)| x.get(u) == x.get(v)).count() as i64;
        if phi != self.state.phi {
            return Err(format!("cached potential {} != {}", self.state.phi, phi));
        }
        if x.count_ones() != self.state.ones {
            return Err(format!("cached weight {} != {}", self.state.ones, x.count_ones()));
        }
        for i in 0..g.node_count() {
            let ones = g.neighbors(i).iter().filter(|&&j| x.get(j)).count();
            if ones != self.ones_around[i] {
                return Err(format!("stale neighbor count at {i}"));
            }
            let feasible = 2 * ones >= g.degree(i);
            let in_down = self.down.slot[i] != MoveSet::ABSENT;
            let in_up = self.up.slot[i] != MoveSet::ABSENT;
            if in_down != (feasible && x.get(i)) || in_up != (feasible && !x.get(i)) {
                return Err(format!("stale move set at {i}"));
            }
        }
        Ok(())
    }
}

/// Outcome of one search run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub best_x: Configuration,
    pub best_size: usize,
    pub steps_executed: u64,
    pub step_of_best: u64,
    pub final_x: Configuration,
    pub final_size: usize,
    pub params: ChainParams,
    pub n: usize,
    pub m: usize,
    pub graph_digest: String,
}

impl RunRecord {
    pub fn best_set(&self) -> ControlSet {
        ControlSet::of_configuration(&self.best_x)
    }

    pub fn csv_row(&self, run_id: u64) -> RunCsvRow {
        RunCsvRow {
            run_id,
            n: self.n,
            m: self.m,
            seed: self.params.seed,
            epsilon: self.params.epsilon,
            variant: self.params.variant,
            budget: self.params.budget,
            best_size: self.best_size,
            step_of_best: self.step_of_best,
        }
    }
}

/// Flat per-run record, one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunCsvRow {
    pub run_id: u64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub variant: Variant,
    pub budget: u64,
    pub best_size: usize,
    pub step_of_best: u64,
}

/// Runs the search from all-ones for `params.budget` steps, tracking the
/// lightest configuration seen (earliest wins ties).
pub fn run_search(g: &Graph, params: &ChainParams) -> Result<RunRecord, ChainError> {
    run_search_observed(g, params, |_| Ok(()))
}

/// [`run_search`] with a hook invoked on the initial state and after every
/// step; an `Err` from the hook aborts the run.
pub fn run_search_observed<F>(
    g: &Graph,
    params: &ChainParams,
    mut observe: F,
) -> Result<RunRecord, ChainError>
where
    F: FnMut(&ChainState) -> Result<(), ChainError>,
{
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut chain = SearchChain::new(g);
    observe(chain.state())?;
    let mut best_x = chain.state().x.clone();
    let mut best_size = chain.state().ones;
    let mut step_of_best = 0;
    for _ in 0..params.budget {
        chain.step(params.variant, params.epsilon, &mut rng)?;
        let state = chain.state();
        observe(state)?;
        if state.ones < best_size {
            best_size = state.ones;
            best_x = state.x.clone();
            step_of_best = state.step;
        }
    }
    let state = chain.state();
    Ok(RunRecord {
        best_x,
        best_size,
        steps_executed: state.step,
        step_of_best,
        final_x: state.x.clone(),
        final_size: state.ones,
        params: *params,
        n: g.node_count(),
        m: g.edge_count(),
        graph_digest: g.digest(),
    })
}

/// Seed for run `run_index` on graph `graph_index`: the first output of a
/// ChaCha8 generator keyed by `base_seed` on stream
/// `(graph_index << 32) | run_index`.
pub fn derive_seed(base_seed: u64, graph_index: u32, run_index: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((u64::from(graph_index) << 32) | u64::from(run_index));
    rng.next_u64()
}

/// Asynchronous best-response dynamics with nodes optionally frozen at 1.
#[derive(Clone, Debug)]
pub struct BestResponseDynamics<'g> {
    graph: &'g Graph,
    x: Configuration,
    frozen: Vec<bool>,
    ones_around: Vec<usize>,
    ones: usize,
    step: u64,
}

impl<'g> BestResponseDynamics<'g> {
    pub fn new(graph: &'g Graph, frozen: &ControlSet, x0: Configuration) -> Result<Self, ChainError> {
        let n = graph.node_count();
        if x0.len() != n {
            return Err(ChainError::LengthMismatch {
                got: x0.len(),
                expected: n,
            });
        }
        let mut mask = vec![false; n];
        for &i in frozen.members() {
            if i >= n || !x0.get(i) {
                return Err(ChainError::FrozenAtZero(i));
            }
            mask[i] = true;
        }
        let ones_around = (0..n)
            .map(|i| graph.neighbors(i).iter().filter(|&&j| x0.get(j)).count())
            .collect();
        Ok(BestResponseDynamics {
            graph,
            ones: x0.count_ones(),
            x: x0,
            frozen: mask,
            ones_around,
            step: 0,
        })
    }

    pub fn configuration(&self) -> &Configuration {
        &self.x
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn is_all_ones(&self) -> bool {
        self.ones == self.x.len()
    }

    fn counts(&self, i: NodeId) -> NeighborCount {
        NeighborCount {
            zeros: self.graph.degree(i) - self.ones_around[i],
            ones: self.ones_around[i],
        }
    }

    /// Whether every node plays a best response.
    pub fn is_nash(&self) -> bool {
        (0..self.x.len()).all(|i| BestResponse::majority(self.counts(i)).contains(self.x.get(i)))
    }

    /// Activates a uniform node; unfrozen nodes resample from their best
    /// response set (a fair coin on ties). Returns whether `x` changed.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let i = rng.gen_range(0..self.x.len());
        self.step += 1;
        if self.frozen[i] {
            return false;
        }
        let action = match BestResponse::majority(self.counts(i)) {
            BestResponse::OnlyZero => false,
            BestResponse::OnlyOne => true,
            BestResponse::Both => rng.gen_bool(0.5),
        };
        if action == self.x.get(i) {
            return false;
        }
        self.x.set(i, action);
        if action {
            self.ones += 1;
        } else {
            self.ones -= 1;
        }
        for &j in self.graph.neighbors(i) {
            if action {
                self.ones_around[j] += 1;
            } else {
                self.ones_around[j] -= 1;
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitResult {
    /// All-ones reached after this many steps.
    Hit(u64),
    /// Budget spent without reaching all-ones. Not a proof of insufficiency.
    Exhausted(u64),
}

impl HitResult {
    pub fn is_hit(self) -> bool {
        matches!(self, HitResult::Hit(_))
    }
}

/// Simulates the controlled dynamics from `x0` until all-ones or the budget
/// runs out.
pub fn run_controlled<R: Rng + ?Sized>(
    g: &Graph,
    c: &ControlSet,
    x0: Configuration,
    max_steps: u64,
    rng: &mut R,
) -> Result<HitResult, ChainError> {
    let mut dynamics = BestResponseDynamics::new(g, c, x0)?;
    while !dynamics.is_all_ones() {
        if dynamics.steps() >= max_steps {
            return Ok(HitResult::Exhausted(max_steps));
        }
        dynamics.step(rng);
    }
    Ok(HitResult::Hit(dynamics.steps()))
}

/// Fraction of `trials` controlled runs from `𝟙_c` that reach all-ones.
pub fn empirical_sufficiency(
    g: &Graph,
    c: &ControlSet,
    trials: u32,
    budget: u64,
    seed: u64,
) -> Result<f64, ChainError> {
    if trials == 0 {
        return Err(ChainError::NoTrials);
    }
    let mut hits = 0u32;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, t));
        if run_controlled(g, c, c.indicator(g.node_count()), budget, &mut rng)?.is_hit() {
            hits += 1;
        }
    }
    Ok(f64::from(hits) / f64::from(trials))
}

/// Runs the unrestricted dynamics until a Nash equilibrium of the majority
/// game is reached. Returns the step count, or `None` if the budget ran out.
pub fn run_until_nash<R: Rng + ?Sized>(
    g: &Graph,
    x0: Configuration,
    max_steps: u64,
    rng: &mut R,
) -> Result<Option<u64>, ChainError> {
    let mut dynamics = BestResponseDynamics::new(g, &ControlSet::empty(), x0)?;
    loop {
        if dynamics.is_nash() {
            return Ok(Some(dynamics.steps()));
        }
        if dynamics.steps() >= max_steps {
            return Ok(None);
        }
        dynamics.step(rng);
    }
}
